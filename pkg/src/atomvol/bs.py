"""Black-Scholes prices in normalised form and a guaranteed implied-vol inverter.

All prices are divided by the forward ``S0`` (rates are zero) and quoted at
log-moneyness ``x = log(K / S0)``. Internally everything is reduced to the
out-of-the-money call at ``|x|`` through the identity ``P(x) = e^x C(-x)``, and
that OTM call is evaluated in log space so deep-wing prices keep full relative
accuracy.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from scipy import special

from atomvol.errors import ArbitrageError, DomainError, InversionError
from atomvol.specfun import LOG_SQRT_2PI, _out

EPS = np.finfo(float).eps
SIGMA_LO = 1e-12
SIGMA_HI = 10.0
MAX_ITER = 200

OptionKind = Literal["call", "put"]


def d12(x, T, sigma):
    """``(d1, d2)`` at log-moneyness ``x``; ``d1 - d2 = sigma * sqrt(T)``."""
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0.0)):
        raise DomainError("d12 requires sigma > 0")
    if np.any(~(np.asarray(T, dtype=float) > 0.0)):
        raise DomainError("d12 requires T > 0")
    s = sigma * np.sqrt(T)
    d1 = -x / s + 0.5 * s
    return _out(d1), _out(d1 - s)


def _log_otm_call(x, s):
    """log of the normalised call at ``x >= 0`` with total vol ``s > 0``."""
    d1 = -x / s + 0.5 * s
    d2 = d1 - s
    a = special.log_ndtr(d1)
    r = x + special.log_ndtr(d2) - a
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a + np.log(-np.expm1(np.minimum(r, 0.0)))
    return np.where(r < 0.0, out, -np.inf)


def _log_vega_ratio(x, s, logc):
    """``log(dC/ds) - log C`` for the OTM call at ``x >= 0``."""
    d1 = -x / s + 0.5 * s
    return -0.5 * d1 * d1 - LOG_SQRT_2PI - logc


def otm_call(x, s):
    """Normalised call at ``x >= 0`` as a function of total vol ``s = sigma sqrt(T)``."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    pos = s > 0.0
    safe = np.where(pos, s, 1.0)
    out = np.where(pos, np.exp(_log_otm_call(x, safe)), 0.0)
    return _out(out)


def bs_call(x, T, sigma):
    """Normalised call ``C_BS(x, T; sigma)``; ``sigma = 0`` gives ``(1 - e^x)^+``."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(sigma, dtype=float) * np.sqrt(T)
    ax = np.abs(x)
    pos = s > 0.0
    c = np.where(pos, np.exp(_log_otm_call(ax, np.where(pos, s, 1.0))), 0.0)
    out = np.where(x >= 0.0, c, -np.expm1(x) + np.exp(x) * c)
    return _out(out)


def bs_put(x, T, sigma):
    """Normalised put ``P_BS(x, T; sigma)``; ``sigma = 0`` gives ``(e^x - 1)^+``."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(sigma, dtype=float) * np.sqrt(T)
    ax = np.abs(x)
    pos = s > 0.0
    c = np.where(pos, np.exp(_log_otm_call(ax, np.where(pos, s, 1.0))), 0.0)
    out = np.where(x < 0.0, np.exp(x) * c, c + np.expm1(x))
    return _out(out)


def vega(x, T, sigma):
    """``dC_BS/dsigma`` in normalised units: ``e^x phi(d2) sqrt(T)``."""
    d1, _ = d12(x, T, sigma)
    return _out(np.exp(-0.5 * np.asarray(d1) ** 2 - LOG_SQRT_2PI) * np.sqrt(T))


def _reduce_to_otm(price, x, kind):
    """Map a normalised call/put quote to the OTM call value ``y`` at ``|x|``.

    Returns ``(y, zero)`` where ``zero`` flags quotes equal to intrinsic value
    up to rounding of the input.
    """
    price = np.asarray(price, dtype=float)
    x = np.asarray(x, dtype=float)
    price, x = np.broadcast_arrays(price, x)
    if np.any(~np.isfinite(price)) or np.any(~np.isfinite(x)):
        raise DomainError("implied_vol requires finite price and log-moneyness")
    if kind == "call":
        intrinsic = np.where(x < 0.0, -np.expm1(x), 0.0)
        upper = np.ones_like(x)
    elif kind == "put":
        intrinsic = np.where(x > 0.0, np.expm1(x), 0.0)
        upper = np.exp(x)
    else:
        raise DomainError(f"unknown option kind {kind!r}")
    tv = price - intrinsic
    noise = 4.0 * EPS * np.maximum(price, intrinsic)
    if np.any(tv < -noise):
        raise ArbitrageError("price below intrinsic value")
    if np.any(price >= upper):
        raise ArbitrageError("price at or above the upper no-arbitrage bound")
    zero = tv <= noise
    # tv is the OTM price at x; rescale puts (x < 0) to calls at -x
    y = np.where(x < 0.0, tv * np.exp(-x), tv)
    if np.any(y[~zero] >= 1.0):
        raise ArbitrageError("price at or above the upper no-arbitrage bound")
    return y, zero


def _solve_total_vol(ax, logy, s_lo, s_hi):
    """Safeguarded Newton on ``log C(ax, s) = logy`` (vectorised)."""
    lo = s_lo.copy()
    hi = s_hi.copy()
    # widen the upper end until it brackets the root
    for _ in range(64):
        short = _log_otm_call(ax, hi) < logy
        if not np.any(short):
            break
        hi = np.where(short, 2.0 * hi, hi)
    else:
        raise InversionError("could not bracket the implied volatility")
    below = _log_otm_call(ax, lo) > logy
    if np.any(below):
        # price below what the lower bracket produces: the root is tinier still
        lo = np.where(below, 0.0, lo)

    s = np.clip(np.sqrt(2.0 * ax), np.maximum(lo, 1e-300), hi)
    s = np.where((s <= lo) | (s >= hi), np.sqrt(np.maximum(lo, 1e-300) * hi), s)
    active = np.ones(ax.shape, dtype=bool)
    for _ in range(MAX_ITER):
        a = ax[active]
        sa = s[active]
        lc = _log_otm_call(a, sa)
        f = lc - logy[active]
        lo_a = np.where(f < 0.0, sa, lo[active])
        hi_a = np.where(f > 0.0, sa, hi[active])
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            slope = np.exp(_log_vega_ratio(a, sa, lc))
            step = f / slope
            s_new = sa - step
        bad = ~np.isfinite(s_new) | (s_new <= lo_a) | (s_new >= hi_a)
        wide = hi_a > 4.0 * np.maximum(lo_a, 1e-300)
        bis = np.where(wide, np.sqrt(np.maximum(lo_a, 1e-300) * hi_a), 0.5 * (lo_a + hi_a))
        s_new = np.where(bad, bis, s_new)
        done = (f == 0.0) | (np.abs(s_new - sa) <= 2.0 * EPS * sa) | (hi_a - lo_a <= 2.0 * EPS * hi_a)
        s_new = np.where(f == 0.0, sa, s_new)
        idx = np.flatnonzero(active)
        s[idx] = s_new
        lo[idx] = lo_a
        hi[idx] = hi_a
        active[idx[done]] = False
        if not np.any(active):
            return s
    raise InversionError("implied volatility iteration did not converge")


def implied_vol(price, x, T, kind: OptionKind = "call"):
    """Black-Scholes implied volatility of a normalised quote.

    ``price`` is a call (default) or put divided by ``S0``. Quotes equal to
    intrinsic value return exactly 0; quotes outside the no-arbitrage bounds
    raise :class:`ArbitrageError`. Accepts arrays.
    """
    if np.any(~(np.asarray(T, dtype=float) > 0.0)):
        raise DomainError("implied_vol requires T > 0")
    y, zero = _reduce_to_otm(price, x, kind)
    ax = np.abs(np.broadcast_to(np.asarray(x, dtype=float), y.shape)).astype(float)
    sqT = np.sqrt(np.broadcast_to(np.asarray(T, dtype=float), y.shape))
    out = np.zeros(y.shape)
    live = ~zero
    if np.any(live):
        yl = y[live]
        axl = ax[live]
        logy = np.log(yl)
        s = _solve_total_vol(axl, logy, SIGMA_LO * sqT[live], SIGMA_HI * sqT[live])
        out[live] = s / sqT[live]
    return _out(out)


def smile_slope(x, T, iv, tail_prob, side: Literal["left", "right"] = "right"):
    """One-sided derivative of the smile in log-moneyness.

    ``tail_prob`` is ``P(S_T > K_x)`` for the right derivative and
    ``P(S_T >= K_x)`` for the left one; the two differ only at atoms.
    """
    if side not in ("left", "right"):
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    iv = np.asarray(iv, dtype=float)
    if np.any(~(iv > 0.0)):
        raise DomainError("smile_slope requires a strictly positive implied vol")
    _, d2 = d12(x, T, iv)
    d2 = np.asarray(d2)
    phi = np.exp(-0.5 * d2 * d2 - LOG_SQRT_2PI)
    return _out((special.ndtr(d2) - np.asarray(tail_prob, dtype=float)) / (np.sqrt(T) * phi))


def log_otm_price(x, T, sigma):
    """log of the normalised out-of-the-money price at ``x`` (put for ``x < 0``)."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(sigma, dtype=float) * np.sqrt(T)
    if np.any(~(s > 0.0)):
        raise DomainError("log_otm_price requires sigma > 0")
    lc = _log_otm_call(np.abs(x), s)
    return _out(np.where(x < 0.0, x + lc, lc))


def implied_vol_from_log(log_price, x, T):
    """Implied vol from the log of the normalised OTM price.

    Reaches strikes whose prices underflow double precision.
    """
    x = np.asarray(x, dtype=float)
    lp = np.asarray(log_price, dtype=float)
    lp, x = np.broadcast_arrays(lp, x)
    # OTM put at x < 0 equals e^x times the call at -x
    logy = np.where(x < 0.0, lp - x, lp)
    if np.any(~(logy < 0.0)):
        raise ArbitrageError("OTM price at or above the upper bound")
    sqT = np.sqrt(np.broadcast_to(np.asarray(T, dtype=float), x.shape))
    ax = np.abs(x).astype(float)
    finite = np.isfinite(logy)
    out = np.zeros(x.shape)
    if np.any(finite):
        s = _solve_total_vol(ax[finite], logy[finite], SIGMA_LO * sqT[finite], SIGMA_HI * sqT[finite])
        out[finite] = s / sqT[finite]
    return _out(out)
