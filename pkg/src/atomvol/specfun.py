"""Special functions used throughout the package.

Thin wrappers over :mod:`scipy.special` that pin down domains, return plain
floats for scalar input, and expose the log-space variants needed deep in the
left wing (tail probabilities below 1e-300).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from atomvol.errors import DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    return _out(np.exp(-0.5 * z * z) / SQRT_2PI)


def log_norm_pdf(z):
    z = np.asarray(z, dtype=float)
    return _out(-0.5 * z * z - LOG_SQRT_2PI)


def norm_cdf(z):
    """Standard Gaussian cdf, relative accuracy preserved in both tails."""
    return _out(special.ndtr(np.asarray(z, dtype=float)))


def log_norm_cdf(z):
    return _out(special.log_ndtr(np.asarray(z, dtype=float)))


def norm_cdf_inv(p):
    """Gaussian quantile.

    ``p`` must lie in ``[0, 1]``. The endpoints map to ``-inf`` and ``+inf``
    respectively; anything outside raises :class:`DomainError`.
    """
    p = np.asarray(p, dtype=float)
    if np.any(~((p >= 0.0) & (p <= 1.0))):
        raise DomainError("norm_cdf_inv requires 0 <= p <= 1")
    return _out(special.ndtri(p))


def erfc(x):
    return _out(special.erfc(np.asarray(x, dtype=float)))


def bessel_i_scaled(nu, z):
    """``exp(-z) * I_nu(z)`` for ``z > 0`` and ``nu >= 0``."""
    z = np.asarray(z, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(~(z > 0.0)):
        raise DomainError("bessel_i_scaled requires z > 0")
    if np.any(nu < 0.0):
        raise DomainError("bessel_i_scaled requires nu >= 0")
    return _out(special.ive(nu, z))


def log_bessel_i(nu, z):
    """``log I_nu(z)``, finite where ``I_nu`` itself over- or underflows."""
    z = np.asarray(z, dtype=float)
    shape = np.broadcast_shapes(z.shape, np.shape(nu))
    z1 = np.atleast_1d(np.broadcast_to(z, shape)).astype(float)
    nu1 = np.atleast_1d(np.broadcast_to(np.asarray(nu, dtype=float), shape))
    scaled = special.ive(nu1, z1)
    out = np.empty_like(z1)
    ok = scaled > 0.0
    out[ok] = np.log(scaled[ok]) + z1[ok]
    # ive underflows for tiny z: leading power term of the series
    bad = ~ok
    out[bad] = nu1[bad] * np.log(0.5 * z1[bad]) - special.gammaln(nu1[bad] + 1.0)
    return _out(out.reshape(shape))


def reg_lower_gamma(a, z):
    """Regularised lower incomplete gamma ``P(a, z)``; ``a > 0``, ``z >= 0``."""
    a = np.asarray(a, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(~(a > 0.0)):
        raise DomainError("reg_lower_gamma requires a > 0")
    if np.any(z < 0.0):
        raise DomainError("reg_lower_gamma requires z >= 0")
    return _out(special.gammainc(a, z))


def reg_upper_gamma(a, z):
    """``1 - P(a, z)`` computed without cancellation."""
    a = np.asarray(a, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(~(a > 0.0)):
        raise DomainError("reg_upper_gamma requires a > 0")
    if np.any(z < 0.0):
        raise DomainError("reg_upper_gamma requires z >= 0")
    return _out(special.gammaincc(a, z))
