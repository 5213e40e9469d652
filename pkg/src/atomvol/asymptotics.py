"""Left-wing smile expansions for laws with an atom at zero.

Three families live here: the model-free tail-wing main term built on
``psi``; the atom expansion ``sqrt(2|x|/T) + q/sqrt(T) + q^2/(2 sqrt(2T|x|))``
with its guaranteed band; and the competing formula that replaces ``q`` by the
root of ``U(x, w) = p``. Diagnostics on ``d2`` ride along.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from atomvol.errors import DomainError, InversionError
from atomvol.specfun import _out, norm_cdf_inv
from scipy import special

SQRT2 = math.sqrt(2.0)
U_BISECT_TOL = 1e-12


def psi(z):
    """``2 - 4 (sqrt(z (z + 1)) - z)``, with ``psi(inf) = 0``."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0.0):
        raise DomainError("psi requires z >= 0")
    # same quantity as 2 / (sqrt(z + 1) + sqrt(z))^2, which has no cancellation
    return _out(2.0 / (np.sqrt(z + 1.0) + np.sqrt(z)) ** 2)


def tail_wing_iv(K, put_price, T):
    """Main term ``sqrt(|log K| / T) sqrt(psi(log P / log K - 1))``.

    ``K`` and ``put_price`` are normalised by the spot. The correction term
    of the underlying asymptotic formula has no explicit constant and is
    not included.
    """
    K = np.asarray(K, dtype=float)
    P = np.asarray(put_price, dtype=float)
    if np.any(~((K > 0.0) & (K < 1.0))):
        raise DomainError("tail_wing_iv requires 0 < K < 1 (normalised)")
    if np.any(~((P > 0.0) & (P < K))):
        raise DomainError("tail_wing_iv requires 0 < put < K")
    lk = np.log(K)
    ratio = np.log(P) / lk - 1.0
    return _out(np.sqrt(-lk / T) * np.sqrt(psi(np.maximum(ratio, 0.0))))


@dataclass(frozen=True)
class ExpansionResult:
    x: float
    order: int
    iv_approx: float
    band_halfwidth: float

    @property
    def lower(self) -> float:
        return self.iv_approx - self.band_halfwidth

    @property
    def upper(self) -> float:
        return self.iv_approx + self.band_halfwidth


def _check_left(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x < 0.0)):
        raise DomainError("the left-wing expansion needs x < 0")
    return x


def _check_mass(p):
    if not 0.0 < p < 1.0:
        raise DomainError("mass at zero must lie strictly inside (0, 1)")
    return float(norm_cdf_inv(p))


def expansion_terms(x, T, p):
    """Arrays ``(order1, order2, order3, band)`` on a grid of log-moneyness."""
    x = _check_left(x)
    q = _check_mass(p)
    ax = np.abs(x)
    o1 = np.sqrt(2.0 * ax / T)
    o2 = o1 + q / math.sqrt(T)
    band = 1.0 / np.sqrt(2.0 * T * ax)
    o3 = o2 + 0.5 * q * q * band
    return _out(o1), _out(o2), _out(o3), _out(band)


def expansion(x: float, T: float, p: float, order: int = 3) -> ExpansionResult:
    """Truncated atom expansion of the smile at ``x``.

    Only order 3 carries a band: the remainder is at most ``1/sqrt(2T|x|)``
    in the limsup sense.
    """
    if order not in (1, 2, 3):
        raise DomainError("order must be 1, 2 or 3")
    o1, o2, o3, band = expansion_terms(float(x), T, p)
    val = (o1, o2, o3)[order - 1]
    return ExpansionResult(x=float(x), order=order, iv_approx=float(val), band_halfwidth=float(band) if order == 3 else 0.0)


def synthetic_smile(x, T, p, remainder: float = 1.0):
    """Order-3 smile plus ``remainder / sqrt(2T|x|)``.

    ``remainder = 1`` sits on the edge of the guaranteed band, which is the
    slowest decay the theory allows; ``remainder = 0`` is the bare expansion.
    """
    _, _, o3, band = expansion_terms(x, T, p)
    return _out(np.asarray(o3) + remainder * np.asarray(band))


def normalized_smile(x, T, iv):
    """``J_T(x) = I(x) sqrt(T / |x|)``; tends to ``sqrt(2)`` when there is an atom."""
    x = _check_left(x)
    return _out(np.asarray(iv, dtype=float) * np.sqrt(T / np.abs(x)))


def J2(x, T, p):
    x = _check_left(x)
    q = _check_mass(p)
    return _out(SQRT2 + q / np.sqrt(np.abs(x)))


def J3(x, T, p):
    x = _check_left(x)
    q = _check_mass(p)
    ax = np.abs(x)
    return _out(SQRT2 + q / np.sqrt(ax) + q * q / (2.0 * SQRT2 * ax))


def U(x, w):
    """``N(w) - exp(-w^2/2) / (2 sqrt(pi) |x|)``."""
    w = np.asarray(w, dtype=float)
    return _out(special.ndtr(w) - np.exp(-0.5 * w * w) / (2.0 * math.sqrt(math.pi) * np.abs(x)))


def u_inverse(x, p):
    """Root ``w`` of ``U(x, w) = p`` by bisection on ``[q - 5, q + 5]``."""
    x = _check_left(x)
    q = _check_mass(p)
    xs = np.atleast_1d(x).astype(float)
    lo = np.full(xs.shape, q - 5.0)
    hi = np.full(xs.shape, q + 5.0)
    flo = np.asarray(U(xs, lo)) - p
    fhi = np.asarray(U(xs, hi)) - p
    if np.any(~((flo < 0.0) & (fhi > 0.0))):
        bad = xs[~((flo < 0.0) & (fhi > 0.0))]
        raise InversionError(f"U(x, .) = p has no bracketed root for x = {bad[0]!r}")
    while np.any(hi - lo > U_BISECT_TOL):
        mid = 0.5 * (lo + hi)
        up = np.asarray(U(xs, mid)) - p > 0.0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return _out((0.5 * (lo + hi)).reshape(np.shape(x)))


def gulisashvili_iv(x, T, p, terms: int = 3):
    """``sqrt(2|x|/T) + w/sqrt(T) + w^2/(2 sqrt(2T|x|))`` with ``w = U(x,.)^-1(p)``.

    ``terms = 2`` drops the last correction.
    """
    if terms not in (2, 3):
        raise DomainError("terms must be 2 or 3")
    x = _check_left(x)
    w = np.asarray(u_inverse(x, p))
    ax = np.abs(x)
    val = np.sqrt(2.0 * ax / T) + w / math.sqrt(T)
    if terms == 3:
        val = val + w * w / (2.0 * np.sqrt(2.0 * T * ax))
    return _out(val)


@dataclass(frozen=True)
class SmileSlice:
    """Implied vols on an increasing log-moneyness grid at one maturity."""

    T: float
    x: np.ndarray
    iv: np.ndarray
    d2: np.ndarray = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        iv = np.asarray(self.iv, dtype=float)
        if x.shape != iv.shape or x.ndim != 1:
            raise DomainError("x and iv must be matching 1-d arrays")
        if np.any(np.diff(x) <= 0.0):
            raise DomainError("x must be strictly increasing")
        if np.any(iv < 0.0):
            raise DomainError("implied vols must be nonnegative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "iv", iv)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = iv * math.sqrt(self.T)
            d2 = np.where(iv > 0.0, -x / np.where(s > 0, s, 1.0) - 0.5 * s, np.nan)
        object.__setattr__(self, "d2", d2)

    @classmethod
    def from_model(cls, model, x) -> "SmileSlice":
        x = np.asarray(x, dtype=float)
        return cls(T=model.maturity, x=x, iv=np.atleast_1d(model.implied_vol(x)))


@dataclass(frozen=True)
class D2Diagnostic:
    x: np.ndarray
    deviation: np.ndarray
    scaled: np.ndarray
    flagged: np.ndarray

    @property
    def any_flagged(self) -> bool:
        return bool(np.any(self.flagged))


def d2_diagnostic(slice_: SmileSlice, p: float, slack: float = 0.1) -> D2Diagnostic:
    """``d2(x) + q`` per point; flags ``|d2 + q| sqrt(2|x|) > 1 + slack``."""
    if np.any(~(slice_.iv > 0.0)):
        raise DomainError("d2_diagnostic needs strictly positive implied vols")
    q = _check_mass(p) if p > 0.0 else -math.inf
    dev = slice_.d2 + q
    scaled = np.abs(dev) * np.sqrt(2.0 * np.abs(slice_.x))
    flagged = ~(scaled <= 1.0 + slack)
    return D2Diagnostic(x=slice_.x, deviation=dev, scaled=scaled, flagged=flagged)


def no_atom_divergence(slice_: SmileSlice) -> float:
    """``I(x) - sqrt(2|x|/T)`` at the leftmost grid point.

    Tends to ``q/sqrt(T)`` with an atom and to ``-inf`` without one.
    """
    x0 = slice_.x[0]
    return float(slice_.iv[0] - math.sqrt(2.0 * abs(x0) / slice_.T))


def divergence_threshold(sigma: float, T: float, M: float) -> float:
    """Log-moneyness beyond which a flat smile at ``sigma`` has ``I - sqrt(2|x|/T) < -M``."""
    if M <= 0.0:
        raise DomainError("M must be positive")
    return -0.5 * T * (sigma + M) ** 2


def band_violation(x, T, p, iv, slack: float = 1.25):
    """Scaled error ``sqrt(2T|x|) |I - order3|`` and a mask of points above ``slack``."""
    _, _, o3, _ = expansion_terms(x, T, p)
    scaled = np.sqrt(2.0 * T * np.abs(np.asarray(x))) * np.abs(np.asarray(iv) - np.asarray(o3))
    return _out(scaled), scaled > slack


def smile_slope_bound(x, T):
    """Lower bound ``-1/sqrt(2T|x|)`` on the left derivative when the support reaches 0."""
    x = _check_left(x)
    return _out(-1.0 / np.sqrt(2.0 * T * np.abs(x)))


__all__ = [
    "psi",
    "tail_wing_iv",
    "ExpansionResult",
    "expansion",
    "expansion_terms",
    "synthetic_smile",
    "normalized_smile",
    "J2",
    "J3",
    "U",
    "u_inverse",
    "gulisashvili_iv",
    "SmileSlice",
    "D2Diagnostic",
    "d2_diagnostic",
    "no_atom_divergence",
    "divergence_threshold",
    "band_violation",
    "smile_slope_bound",
]

