"""Model-free survival probability estimates read off the left wing of a smile."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np
from scipy import special

from atomvol.errors import DomainError, EstimationError
from atomvol.models import Merton

Method = Literal["d2", "second_order", "third_order"]
TABLE1_MONEYNESS = (0.5, 0.4, 0.3, 0.2, 0.1, 1e-10)
TABLE_COLUMNS = ("moneyness", "x", "d2_est", "second_order_est", "third_order_est", "exact")


@dataclass(frozen=True)
class SurvivalEstimate:
    method: Method
    x: float
    survival: float


def _gap(x, T, iv):
    """``c(x) = sqrt(T) I(x) - sqrt(2|x|)``."""
    return math.sqrt(T) * iv - math.sqrt(2.0 * abs(x))


def survival_from_d2(x: float, T: float, iv: float) -> SurvivalEstimate:
    """``N(d2(x, T, I(x)))``, using ``d2 -> -q``."""
    if not iv > 0.0:
        raise DomainError("survival_from_d2 requires iv > 0")
    s = iv * math.sqrt(T)
    return SurvivalEstimate("d2", float(x), float(special.ndtr(-x / s - 0.5 * s)))


def survival_second_order(x: float, T: float, iv: float) -> SurvivalEstimate:
    """Invert ``I = sqrt(2|x|/T) + q/sqrt(T)`` for ``q`` and return ``N(-q)``."""
    q_hat = _gap(x, T, iv)
    return SurvivalEstimate("second_order", float(x), float(np.clip(special.ndtr(-q_hat), 0.0, 1.0)))


def q_roots(x: float, T: float, iv: float) -> tuple[float, float]:
    """Both roots ``q_+, q_-`` of the quadratic obtained from the order-3 formula.

    Raises :class:`EstimationError` when the discriminant is negative.
    """
    r = math.sqrt(2.0 * abs(x))
    disc = r * r + 2.0 * r * _gap(x, T, iv)
    if disc < 0.0:
        raise EstimationError(f"third-order inversion has complex roots at x = {x!r} (discriminant {disc:.3e})")
    root = math.sqrt(disc)
    return -r + root, -r - root


def survival_third_order(x: float, T: float, iv: float) -> SurvivalEstimate:
    """``N(-q_+(x))``; ``q_+`` is the root that converges to ``q``."""
    q_plus, _ = q_roots(x, T, iv)
    return SurvivalEstimate("third_order", float(x), float(special.ndtr(-q_plus)))


ESTIMATORS = {
    "d2": survival_from_d2,
    "second_order": survival_second_order,
    "third_order": survival_third_order,
}


@dataclass(frozen=True)
class TableRow:
    moneyness: float
    x: float
    d2_est: float
    second_order_est: float
    third_order_est: float
    exact: float

    def as_tuple(self):
        return (self.moneyness, self.x, self.d2_est, self.second_order_est, self.third_order_est, self.exact)


def table1(params: Merton, moneyness: Iterable[float] = TABLE1_MONEYNESS) -> list[TableRow]:
    """Survival estimates of all three methods on the Merton smile, plus ``exp(-lam T)``."""
    m = np.asarray(list(moneyness), dtype=float)
    if np.any(~(m > 0.0)):
        raise DomainError("moneyness must be positive")
    x = np.log(m)
    iv = np.atleast_1d(params.implied_vol(x))
    T = params.maturity
    rows = []
    for mi, xi, vi in zip(m, x, iv):
        rows.append(
            TableRow(
                moneyness=float(mi),
                x=float(xi),
                d2_est=survival_from_d2(xi, T, vi).survival,
                second_order_est=survival_second_order(xi, T, vi).survival,
                third_order_est=survival_third_order(xi, T, vi).survival,
                exact=params.survival,
            )
        )
    return rows


def table_to_csv(rows: list[TableRow], digits: int = 17) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        w.writerow([f"{v:.{digits}g}" for v in r.as_tuple()])
    return buf.getvalue()
