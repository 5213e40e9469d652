"""Butterfly-arbitrage checks on smile functions.

The test is the Roper positivity condition on the total-volatility function
``omega(x) = sqrt(T) sigma(x)``. Built-in families are the square-root smiles
``sigma_gamma(x) = sqrt(gamma |x| / T)`` and the Guo et al. total-variance
parameterisation; arbitrary callables are differentiated numerically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from atomvol.errors import DomainError, NumericalError

FD_STEP = 1e-3


def _fd_derivs(f: Callable[[float], float], x: float, h: float) -> tuple[float, float]:
    """Central first and second differences, Richardson-extrapolated once."""

    def raw(hh):
        fp, f0, fm = f(x + hh), f(x), f(x - hh)
        return (fp - fm) / (2.0 * hh), (fp - 2.0 * f0 + fm) / (hh * hh)

    a1, a2 = raw(h)
    b1, b2 = raw(0.5 * h)
    d1 = (4.0 * b1 - a1) / 3.0
    d2 = (4.0 * b2 - a2) / 3.0
    if not (math.isfinite(d1) and math.isfinite(d2)):
        raise NumericalError(f"finite-difference derivative failed at x = {x!r}")
    return d1, d2


@dataclass(frozen=True)
class SmileFunction:
    """Total-volatility function ``omega(x)`` with optional analytic derivatives."""

    omega: Callable[[float], float]
    d_omega: Callable[[float], float] | None = None
    dd_omega: Callable[[float], float] | None = None
    h: float = FD_STEP

    def __call__(self, x: float) -> float:
        return float(self.omega(x))

    def derivatives(self, x: float) -> tuple[float, float, float]:
        w = float(self.omega(x))
        if self.d_omega is not None and self.dd_omega is not None:
            return w, float(self.d_omega(x)), float(self.dd_omega(x))
        step = max(self.h, self.h * abs(x))
        d1, d2 = _fd_derivs(lambda t: float(self.omega(t)), x, step)
        return w, d1, d2

    @classmethod
    def flat(cls, c: float) -> "SmileFunction":
        return cls(lambda x: c, lambda x: 0.0, lambda x: 0.0)


def roper_operator(smile: SmileFunction, x: float) -> float:
    """``(1 - x w'/w)^2 - w^2 w'^2 / 4 + w w''``; nonnegative iff no butterfly arbitrage at ``x``."""
    w, d1, d2 = smile.derivatives(float(x))
    if not w > 0.0:
        raise DomainError(f"roper_operator needs omega(x) > 0, got {w!r} at x = {x!r}")
    return (1.0 - x * d1 / w) ** 2 - 0.25 * w * w * d1 * d1 + w * d2


# --------------------------------------------------------------------------
# square-root family
# --------------------------------------------------------------------------


def sigma_gamma(x, gamma: float, T: float):
    """``sqrt(gamma |x| / T)`` on ``x < 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x < 0.0)):
        raise DomainError("sigma_gamma is defined for x < 0")
    out = np.sqrt(gamma * np.abs(x) / T)
    return float(out) if out.ndim == 0 else out


def sigma_gamma_smile(gamma: float, T: float = 1.0) -> SmileFunction:
    """``omega = sqrt(gamma |x|)``, with exact derivatives in ``x``."""
    if gamma < 0.0:
        raise DomainError("gamma must be nonnegative")
    g = math.sqrt(gamma)
    return SmileFunction(
        omega=lambda x: g * math.sqrt(-x),
        d_omega=lambda x: -g / (2.0 * math.sqrt(-x)),
        dd_omega=lambda x: -g / (4.0 * (-x) ** 1.5),
    )


def phi_gamma(x, gamma: float):
    """Closed form of the Roper operator on ``sigma_gamma``: ``(4u - gamma^2 u - 4 gamma) / (16 u)``."""
    u = -np.asarray(x, dtype=float)
    if np.any(~(u > 0.0)):
        raise DomainError("phi_gamma is defined for x < 0")
    out = ((4.0 - gamma * gamma) * u - 4.0 * gamma) / (16.0 * u)
    return float(out) if out.ndim == 0 else out


def valid_at(x, gamma: float):
    """``gamma^2 |x| + 4 gamma - 4 |x| < 0``."""
    u = np.abs(np.asarray(x, dtype=float))
    out = gamma * gamma * u + 4.0 * gamma - 4.0 * u < 0.0
    return bool(out) if out.ndim == 0 else out


def gamma_plus(x):
    """Largest admissible ``gamma`` at ``x``: ``2 (sqrt(1 + 1/x^2) - 1/|x|)``."""
    u = np.abs(np.asarray(x, dtype=float))
    # 2 (sqrt(1 + u^2) - 1) / u without cancellation for small u
    out = 2.0 * u / (np.sqrt(1.0 + u * u) + 1.0)
    return float(out) if out.ndim == 0 else out


def x_star(gamma: float) -> float:
    """Right end ``4 gamma / (gamma^2 - 4)`` of the interval where ``sigma_gamma`` is valid."""
    if not 0.0 < gamma < 2.0:
        raise DomainError("x_star needs 0 < gamma < 2")
    return 4.0 * gamma / (gamma * gamma - 4.0)


def gamma2_put(K, spot: float = 1.0):
    """Limiting ``gamma = 2`` put ``K/2 - S0 N(-sqrt(2 |log(K/S0)|))`` for ``0 < K < S0``."""
    K = np.asarray(K, dtype=float)
    if np.any(~((K > 0.0) & (K < spot))):
        raise DomainError("gamma2_put needs 0 < K < S0")
    out = 0.5 * K - spot * special.ndtr(-np.sqrt(2.0 * np.abs(np.log(K / spot))))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Guo et al. parameterisation
# --------------------------------------------------------------------------


def _guo_psi(z):
    az = np.abs(z)
    return az + 0.5 * (1.0 + np.sqrt(1.0 + az))


def _xi(u: float, alpha: float) -> float:
    return alpha * -math.expm1(-u) / u if u > 0.0 else 1.0


@dataclass(frozen=True)
class GuoResult:
    w: np.ndarray
    slope: float
    f_T: float
    alpha_star: float
    verdict: str
    remainder: np.ndarray = field(repr=False)


GUO_TOL = 1e-12


def guo_param(x, T: float, alpha: float, sigma: float) -> GuoResult:
    """Total variance ``theta Psi(x xi(theta))`` with ``theta = sigma^2 T`` and its left-wing diagnostics.

    ``slope`` is the asymptotic left slope ``alpha (1 - e^-theta)``; the sign
    of ``f_T(alpha) = alpha (e^theta - 1) - 2 e^theta`` decides the limits of
    ``d2`` on the left and ``d1`` on the right. ``remainder`` is
    ``w - slope |x| - theta/2``.
    """
    if not (alpha > 0.0 and sigma > 0.0 and T > 0.0):
        raise DomainError("guo_param needs alpha, sigma, T > 0")
    x = np.asarray(x, dtype=float)
    theta = sigma * sigma * T
    w = theta * _guo_psi(x * _xi(theta, alpha))
    slope = alpha * -math.expm1(-theta)
    f = alpha * math.expm1(theta) - 2.0 * math.exp(theta)
    a_star = 2.0 / -math.expm1(-theta)
    if f < -GUO_TOL * max(1.0, abs(alpha)):
        # slope < 2: d2 -> +inf on the left, no atom, calls vanish on the right
        verdict = "consistent: slope below 2, no mass at zero"
    else:
        verdict = "inconsistent: slope 2 or more is incompatible with call prices vanishing at large strikes"
    rem = w - slope * np.abs(x) - 0.5 * theta
    return GuoResult(w=w, slope=slope, f_T=f, alpha_star=a_star, verdict=verdict, remainder=rem)


def guo_smile(T: float, alpha: float, sigma: float) -> SmileFunction:
    """``omega(x) = sqrt(w(x, T))`` for the Roper check (numerical derivatives)."""
    theta = sigma * sigma * T
    k = _xi(theta, alpha)
    return SmileFunction(omega=lambda x: math.sqrt(theta * float(_guo_psi(x * k))))


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

FAMILIES = ("flat", "sigma-gamma", "guo")


@dataclass
class ValidationReport:
    family: str
    params: dict
    grid: list
    verdicts: list
    first_violation: float | None
    margins: list
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "family": self.family,
            "params": self.params,
            "grid": self.grid,
            "verdicts": self.verdicts,
            "first_violation": self.first_violation,
            "margins": self.margins,
        }
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def smile_for(family: str, params: dict) -> SmileFunction:
    if family == "flat":
        return SmileFunction.flat(math.sqrt(params.get("T", 1.0)) * params["sigma"])
    if family == "sigma-gamma":
        return sigma_gamma_smile(params["gamma"], params.get("T", 1.0))
    if family == "guo":
        return guo_smile(params.get("T", 1.0), params["alpha"], params["sigma"])
    raise DomainError(f"unknown smile family {family!r}; choose from {FAMILIES}")


def validate(family: str, params: dict, grid) -> ValidationReport:
    """Roper verdict at every grid point, scanning from the left."""
    smile = smile_for(family, params)
    xs = [float(v) for v in np.asarray(grid, dtype=float)]
    margins = [roper_operator(smile, x) for x in xs]
    verdicts = [bool(m >= 0.0) for m in margins]
    first = next((x for x, ok in zip(xs, verdicts) if not ok), None)
    extra: dict = {}
    if family == "guo":
        g = guo_param(np.asarray(xs), params.get("T", 1.0), params["alpha"], params["sigma"])
        extra = {"slope": g.slope, "f_T": g.f_T, "alpha_star": g.alpha_star, "verdict": g.verdict}
    elif family == "sigma-gamma" and 0.0 < params["gamma"] < 2.0:
        extra = {"x_star": x_star(params["gamma"])}
    return ValidationReport(family, dict(params), xs, verdicts, first, margins, extra)
