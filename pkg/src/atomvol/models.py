"""Distributions with an atom at zero and their vanilla prices.

Every model prices in absolute units (spot ``S0``, strike ``K``) and exposes
the same small surface: mass at zero, cdf, density where one exists, put and
call. The normalised smile helpers quote log-moneyness against the model's
forward ``E[S_T]``, which equals the spot for all martingale models here.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from typing import Any, ClassVar

import numpy as np
from scipy import integrate, special

from atomvol import bs
from atomvol.errors import DomainError, QuadratureError, UnsupportedModelError
from atomvol.specfun import _out

QUAD_EPSREL = 1e-12
QUAD_LIMIT = 200


def _quad(fun, a, b, what: str, points=None, epsabs: float = 0.0) -> float:
    val, err, info = _quad_full(fun, a, b, points, epsabs)
    if not np.isfinite(val) or err > max(epsabs, 1e-8 * abs(val), 1e-14):
        raise QuadratureError(f"{what}: quadrature did not converge (estimate {val!r}, error {err!r})")
    return val


def _quad_full(fun, a, b, points, epsabs):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(fun, a, b, epsabs=epsabs, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, points=points)
    return out[0], out[1], None


def _vectorize(method):
    """Make a scalar ``method(self, K)`` accept arrays."""

    def wrapper(self, K):
        arr = np.asarray(K, dtype=float)
        if arr.ndim == 0:
            return float(method(self, float(arr)))
        return np.array([method(self, float(k)) for k in arr.ravel()]).reshape(arr.shape)

    wrapper.__name__ = method.__name__
    wrapper.__doc__ = method.__doc__
    return wrapper


class AtomDistribution(ABC):
    """Law of ``S_T`` of the form ``p delta_0 + (1 - p) mu_p``."""

    name: ClassVar[str] = "abstract"
    martingale: ClassVar[bool] = True
    # upper critical moment sup{r : E[S_T^(1+r)] < inf}
    p_star: float = math.inf

    spot: float
    maturity: float

    @property
    @abstractmethod
    def mass_at_zero(self) -> float: ...

    @abstractmethod
    def put(self, K): ...

    @abstractmethod
    def call(self, K): ...

    @abstractmethod
    def cdf(self, K):
        """``P(S_T <= K)``."""

    def density(self, s):
        raise UnsupportedModelError(f"{self.name} has no density")

    @property
    def forward(self) -> float:
        return self.spot

    def sf(self, K):
        """``P(S_T > K)``."""
        return _out(1.0 - np.asarray(self.cdf(K)))

    def tail_prob(self, K, side: str = "right"):
        """``P(S_T > K)`` (right) or ``P(S_T >= K)`` (left)."""
        if side == "right":
            return self.sf(K)
        if side == "left":
            return self._sf_left(K)
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")

    def _sf_left(self, K):
        return self.sf(K)

    # --- normalised quotes -------------------------------------------------
    def strike(self, x):
        return _out(self.forward * np.exp(np.asarray(x, dtype=float)))

    def put_x(self, x):
        """Put at log-moneyness ``x`` divided by the forward."""
        return _out(np.asarray(self.put(self.strike(x))) / self.forward)

    def call_x(self, x):
        return _out(np.asarray(self.call(self.strike(x))) / self.forward)

    def implied_vol(self, x):
        """Implied volatility at log-moneyness ``x`` from the OTM option."""
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x)
        iv = np.empty(flat.shape)
        left = flat <= 0.0
        if np.any(left):
            iv[left] = bs.implied_vol(np.atleast_1d(self.put_x(flat[left])), flat[left], self.maturity, kind="put")
        if np.any(~left):
            iv[~left] = bs.implied_vol(np.atleast_1d(self.call_x(flat[~left])), flat[~left], self.maturity)
        return _out(iv.reshape(x.shape))

    def remainder_R(self, K):
        return remainder_R(K, self)

    def excess_put(self, K):
        """``P(K) - p K``: the put on the surviving part of the law."""
        K = np.asarray(K, dtype=float)
        return _out(np.asarray(self.put(K)) - self.mass_at_zero * K)

    # --- serialisation -----------------------------------------------------
    def params(self) -> dict[str, float]:
        return {k: v for k, v in asdict(self).items()}  # type: ignore[call-overload]

    def to_dict(self) -> dict[str, Any]:
        return {"model": self.name, "params": self.params()}


def remainder_R(K, model: AtomDistribution):
    """``R(K) = P(K)/K - p``; lies in ``[0, F(K) - F(0)]``."""
    K = np.asarray(K, dtype=float)
    if np.any(~(K > 0.0)):
        raise DomainError("remainder_R requires K > 0")
    return _out(np.asarray(model.put(K)) / K - model.mass_at_zero)


def _check_pos(**kw):
    for k, v in kw.items():
        if not (np.isfinite(v) and v > 0.0):
            raise DomainError(f"{k} must be positive and finite, got {v!r}")


def _nonneg_strike(K):
    K = np.asarray(K, dtype=float)
    if np.any(~(K >= 0.0)):
        raise DomainError("strike must be nonnegative")
    return K


# --------------------------------------------------------------------------
# toy piecewise-affine call
# --------------------------------------------------------------------------


def toy_affine_call(K, p: float, spot: float = 1.0):
    """``(S0 - (1 - p) K)^+``: the call of ``p delta_0 + (1-p) delta_{S0/(1-p)}``."""
    if not 0.0 <= p < 1.0:
        raise DomainError("toy affine model requires 0 <= p < 1")
    K = _nonneg_strike(K)
    return _out(np.maximum(spot - (1.0 - p) * K, 0.0))


@dataclass(frozen=True)
class ToyAffine(AtomDistribution):
    """Two-point law: ``p`` at zero, ``1 - p`` at ``S0 / (1 - p)``."""

    p: float
    spot: float = 1.0
    maturity: float = 1.0
    name: ClassVar[str] = "toy"

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise DomainError("toy affine model requires 0 <= p < 1")
        _check_pos(spot=self.spot, maturity=self.maturity)

    @property
    def mass_at_zero(self) -> float:
        return self.p

    @property
    def kink(self) -> float:
        """Upper support point ``S0 / (1 - p)``."""
        return self.spot / (1.0 - self.p)

    def call(self, K):
        return toy_affine_call(K, self.p, self.spot)

    def put(self, K):
        K = _nonneg_strike(K)
        return _out(np.where(K < self.kink, self.p * K, K - self.spot))

    def cdf(self, K):
        K = np.asarray(K, dtype=float)
        return _out(np.where(K < self.kink, self.p, 1.0))

    def sf(self, K):
        K = np.asarray(K, dtype=float)
        return _out(np.where(K < self.kink, 1.0 - self.p, 0.0))

    def _sf_left(self, K):
        K = np.asarray(K, dtype=float)
        return _out(np.where(K <= self.kink, 1.0 - self.p, 0.0))


# --------------------------------------------------------------------------
# Merton jump to default
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Merton(AtomDistribution):
    """Lognormal stock that jumps to zero at the first event of a Poisson clock.

    Survival has probability ``exp(-lam T)``; conditionally on survival the
    stock is lognormal with forward ``S0 / (1 - p)``.
    """

    sigma: float
    lam: float
    spot: float = 1.0
    maturity: float = 1.0
    name: ClassVar[str] = "merton"

    def __post_init__(self):
        _check_pos(sigma=self.sigma, spot=self.spot, maturity=self.maturity)
        if not (np.isfinite(self.lam) and self.lam >= 0.0):
            raise DomainError("lam must be nonnegative")

    @classmethod
    def from_mass(cls, p: float, sigma: float, spot: float = 1.0, maturity: float = 1.0) -> "Merton":
        """Intensity chosen so that ``P(S_T = 0) = p``."""
        if not 0.0 <= p < 1.0:
            raise DomainError("mass at zero must lie in [0, 1)")
        return cls(sigma=sigma, lam=-math.log1p(-p) / maturity, spot=spot, maturity=maturity)

    @property
    def mass_at_zero(self) -> float:
        return -math.expm1(-self.lam * self.maturity)

    @property
    def survival(self) -> float:
        return math.exp(-self.lam * self.maturity)

    @property
    def shifted_forward(self) -> float:
        return self.spot / self.survival

    def _y(self, K):
        """Log-moneyness against the conditional forward."""
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(K, dtype=float) / self.spot) - self.lam * self.maturity

    def put(self, K):
        K = _nonneg_strike(K)
        out = self.mass_at_zero * K
        pos = K > 0.0
        y = self._y(np.where(pos, K, 1.0))
        out = out + np.where(pos, self.spot * np.asarray(bs.bs_put(y, self.maturity, self.sigma)), 0.0)
        return _out(out)

    def excess_put(self, K):
        K = _nonneg_strike(K)
        pos = K > 0.0
        y = self._y(np.where(pos, K, 1.0))
        return _out(np.where(pos, self.spot * np.asarray(bs.bs_put(y, self.maturity, self.sigma)), 0.0))

    def call(self, K):
        K = _nonneg_strike(K)
        pos = K > 0.0
        y = self._y(np.where(pos, K, 1.0))
        return _out(np.where(pos, self.spot * np.asarray(bs.bs_call(y, self.maturity, self.sigma)), self.spot))

    def implied_vol(self, x):
        """As the generic version, but the left wing is inverted from the log price.

        Without default the deep put underflows long before the smile is
        uninteresting; in log space ``p e^x`` and the diffusive part combine
        without loss.
        """
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x)
        left = flat <= 0.0
        if not np.any(left):
            return super().implied_vol(x)
        iv = np.empty(flat.shape)
        xl = flat[left]
        # normalised put = p e^x + bs_put(x - lam T), the second leg out of the money
        with np.errstate(divide="ignore"):
            log_atom = math.log(self.mass_at_zero) + xl if self.mass_at_zero > 0.0 else np.full(xl.shape, -np.inf)
        log_put = np.logaddexp(log_atom, np.asarray(bs.log_otm_price(xl - self.lam * self.maturity, self.maturity, self.sigma)))
        iv[left] = bs.implied_vol_from_log(log_put, xl, self.maturity)
        if np.any(~left):
            iv[~left] = np.atleast_1d(super().implied_vol(flat[~left]))
        return _out(iv.reshape(x.shape))

    def _d2(self, K):
        s = self.sigma * math.sqrt(self.maturity)
        return -self._y(K) / s - 0.5 * s

    def cdf(self, K):
        K = np.asarray(K, dtype=float)
        with np.errstate(divide="ignore"):
            cont = special.ndtr(-self._d2(np.where(K > 0.0, K, 1.0)))
        out = np.where(K > 0.0, self.mass_at_zero + self.survival * cont, np.where(K == 0.0, self.mass_at_zero, 0.0))
        return _out(out)

    def sf(self, K):
        K = np.asarray(K, dtype=float)
        out = np.where(K > 0.0, self.survival * special.ndtr(self._d2(np.where(K > 0.0, K, 1.0))), np.where(K == 0.0, self.survival, 1.0))
        return _out(out)

    def density(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(~(s > 0.0)):
            raise DomainError("density requires s > 0")
        sd = self.sigma * math.sqrt(self.maturity)
        z = (self._y(s) + 0.5 * sd * sd) / sd
        return _out(self.survival * np.exp(-0.5 * z * z) / (s * sd * math.sqrt(2.0 * math.pi)))


def merton_put(K, params: Merton):
    return params.put(K)


def merton_cdf(K, params: Merton):
    K = np.asarray(K, dtype=float)
    if np.any(~(K > 0.0)):
        raise DomainError("merton_cdf requires K > 0")
    return params.cdf(K)


@dataclass(frozen=True)
class BlackScholes(Merton):
    """Plain lognormal model: Merton without default."""

    sigma: float = 0.2
    lam: float = field(default=0.0)
    spot: float = 1.0
    maturity: float = 1.0
    name: ClassVar[str] = "bs"

    def __post_init__(self):
        super().__post_init__()
        if self.lam != 0.0:
            raise DomainError("the plain lognormal model has no default intensity")

    def params(self) -> dict[str, float]:
        return {"sigma": self.sigma, "spot": self.spot, "maturity": self.maturity}


# --------------------------------------------------------------------------
# CEV with absorption
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CEV(AtomDistribution):
    """``dS = sigma S^(1 + beta) dW`` with ``beta`` in ``[-1/2, 0)``, absorbed at zero.

    ``X = S^(-2 beta) / (sigma^2 beta^2)`` is a squared Bessel process of
    dimension ``2 + 1/beta``, which is what the closed-form pieces use.
    """

    sigma: float
    beta: float
    spot: float = 1.0
    maturity: float = 1.0
    name: ClassVar[str] = "cev"

    def __post_init__(self):
        _check_pos(sigma=self.sigma, spot=self.spot, maturity=self.maturity)
        if not (-0.5 <= self.beta < 0.0):
            raise DomainError("CEV requires beta in [-1/2, 0) (absorbing regime)")

    @property
    def nu(self) -> float:
        return 1.0 / (2.0 * self.beta)

    @property
    def order(self) -> float:
        """Bessel order ``|nu| = 1 / (2 |beta|)``."""
        return -self.nu

    @property
    def X0(self) -> float:
        return self.spot ** (-2.0 * self.beta) / (self.sigma**2 * self.beta**2)

    def _X(self, s):
        return np.asarray(s, dtype=float) ** (-2.0 * self.beta) / (self.sigma**2 * self.beta**2)

    @property
    def mass_at_zero(self) -> float:
        return cev_mass(self)

    def log_density(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(~(s > 0.0)):
            raise DomainError("CEV density requires s > 0")
        T = self.maturity
        b = self.beta
        X0 = self.X0
        y = self._X(s)
        z = np.sqrt(X0 * y) / T
        with np.errstate(divide="ignore"):
            log_scaled = np.log(special.ive(self.order, z))
        small = ~np.isfinite(log_scaled)
        if np.any(small):
            # ive underflows for tiny z: leading series term
            zs = np.asarray(z)[small] if np.ndim(z) else z
            alt = self.order * np.log(0.5 * zs) - special.gammaln(self.order + 1.0) - zs
            if np.ndim(log_scaled):
                log_scaled[small] = alt
            else:
                log_scaled = alt
        logpref = 0.5 * math.log(self.spot) + (-2.0 * b - 1.5) * np.log(s) - math.log(self.sigma**2 * abs(b) * T)
        expo = -((math.sqrt(X0) - np.sqrt(y)) ** 2) / (2.0 * T)
        return _out(logpref + expo + log_scaled)

    def density(self, s):
        return _out(np.exp(self.log_density(s)))

    # integrals over (0, K] in the variable w = (s / K)^(2|beta|)
    def _lower_integral(self, K: float, weight) -> float:
        a = 1.0 / (2.0 * abs(self.beta))

        def g(w):
            if w <= 0.0:
                return 0.0
            s = K * w**a
            return weight(w**a) * math.exp(float(self.log_density(s)) + math.log(K * a) + (a - 1.0) * math.log(w))

        return _quad(g, 0.0, 1.0, "CEV lower integral")

    def _upper_integral(self, K: float, weight) -> float:
        # s = K (1 + t); density decays like a Gaussian in sqrt(s) so split generously
        scale = max(self.spot, K)
        def g(t):
            s = K + t
            return weight(s) * float(self.density(s))

        edges = [0.0, 0.5 * scale, 2.0 * scale, 10.0 * scale]
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            total += _quad(g, lo, hi, "CEV upper integral")
        total += _quad(g, edges[-1], np.inf, "CEV upper integral")
        return total

    @_vectorize
    def put(self, K):
        """``p K + integral (K - s)^+ f(s) ds`` by adaptive quadrature."""
        if K < 0.0:
            raise DomainError("strike must be nonnegative")
        if K == 0.0:
            return 0.0
        J = self._lower_integral(K, lambda r: 1.0 - r)
        return self.mass_at_zero * K + K * J

    @_vectorize
    def excess_put(self, K):
        if K < 0.0:
            raise DomainError("strike must be nonnegative")
        if K == 0.0:
            return 0.0
        return K * self._lower_integral(K, lambda r: 1.0 - r)

    @_vectorize
    def call(self, K):
        if K < 0.0:
            raise DomainError("strike must be nonnegative")
        if K <= self.spot:
            return self.put(K) + self.spot - K
        return self._upper_integral(K, lambda s: s - K)

    @_vectorize
    def cdf(self, K):
        if K <= 0.0:
            return self.mass_at_zero if K == 0.0 else 0.0
        if K > self.spot:
            return 1.0 - self._upper_integral(K, lambda s: 1.0)
        return self.mass_at_zero + self._lower_integral(K, lambda r: 1.0)

    @_vectorize
    def sf(self, K):
        if K > self.spot:
            return self._upper_integral(K, lambda s: 1.0)
        return 1.0 - float(self.cdf(K))


def cev_mass(params: CEV) -> float:
    """``P(S_T = 0) = 1 - P(|nu|, X0 / (2T))``."""
    return float(special.gammaincc(params.order, params.X0 / (2.0 * params.maturity)))


def cev_density(s, params: CEV):
    return params.density(s)


def cev_put(K, params: CEV):
    return params.put(K)


# --------------------------------------------------------------------------
# absorbed Ornstein-Uhlenbeck
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AbsorbedOU(AtomDistribution):
    """OU process ``dS = -k S dt + sigma dW`` stopped at its first zero.

    Not a martingale: ``E[S_T] = s0 exp(-kT)``, and that mean plays the role of
    the forward in all normalised quotes.
    """

    k: float
    sigma: float
    spot: float = 1.0
    maturity: float = 1.0
    name: ClassVar[str] = "ou"
    martingale: ClassVar[bool] = False

    def __post_init__(self):
        _check_pos(k=self.k, sigma=self.sigma, spot=self.spot, maturity=self.maturity)

    @property
    def m(self) -> float:
        return self.spot * math.exp(-self.k * self.maturity)

    @property
    def v(self) -> float:
        return self.sigma**2 * -math.expm1(-2.0 * self.k * self.maturity) / (2.0 * self.k)

    @property
    def forward(self) -> float:
        return self.m

    @property
    def mass_at_zero(self) -> float:
        return ou_mass(self)

    def density(self, y):
        """Reflection-principle density on ``(0, inf)``."""
        y = np.asarray(y, dtype=float)
        if np.any(~(y > 0.0)):
            raise DomainError("OU density requires y > 0")
        m, v = self.m, self.v
        g = np.exp(-((y - m) ** 2) / (2.0 * v)) / math.sqrt(2.0 * math.pi * v)
        return _out(g * -np.expm1(-2.0 * y * m / v))

    @staticmethod
    def _gauss_upper(K, mu, sd):
        """``E[(Y - K)^+]`` for ``Y ~ N(mu, sd^2)``."""
        z = (mu - K) / sd
        return (mu - K) * special.ndtr(z) + sd * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    def call(self, K):
        K = _nonneg_strike(K)
        sd = math.sqrt(self.v)
        return _out(self._gauss_upper(K, self.m, sd) - self._gauss_upper(K, -self.m, sd))

    @_vectorize
    def put(self, K):
        if K < 0.0:
            raise DomainError("strike must be nonnegative")
        if K == 0.0:
            return 0.0
        if K > self.m:
            return float(self.call(K)) - self.m + K
        J = _quad(lambda u: (1.0 - u) * float(self.density(K * u)) if u > 0.0 else 0.0, 0.0, 1.0, "OU put")
        return self.mass_at_zero * K + K * K * J

    def sf(self, K):
        K = np.asarray(K, dtype=float)
        sd = math.sqrt(self.v)
        out = special.ndtr((self.m - K) / sd) - special.ndtr((-self.m - K) / sd)
        return _out(np.where(K >= 0.0, out, 1.0))

    def cdf(self, K):
        return _out(1.0 - np.asarray(self.sf(K)))


def ou_mass(params: AbsorbedOU) -> float:
    """``P(tau_0 <= T) = erfc(m / sqrt(2 v))``."""
    return float(special.erfc(params.m / math.sqrt(2.0 * params.v)))


def ou_density(y, params: AbsorbedOU):
    return params.density(y)


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------

MODELS: dict[str, type[AtomDistribution]] = {
    "toy": ToyAffine,
    "merton": Merton,
    "bs": BlackScholes,
    "cev": CEV,
    "ou": AbsorbedOU,
}


def model_from_dict(doc: dict[str, Any]) -> AtomDistribution:
    """Inverse of :meth:`AtomDistribution.to_dict`.

    Merton also accepts ``p`` in place of ``lam``.
    """
    try:
        name = doc["model"]
    except KeyError:
        raise DomainError("model document needs a 'model' key") from None
    if name not in MODELS:
        raise UnsupportedModelError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    params = {k: float(v) for k, v in dict(doc.get("params", {})).items()}
    cls = MODELS[name]
    if cls is Merton and "p" in params:
        if "lam" in params:
            raise DomainError("give either lam or p for the Merton model, not both")
        p = params.pop("p")
        return Merton.from_mass(p, **params)
    try:
        return cls(**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {name}: {exc}") from None
