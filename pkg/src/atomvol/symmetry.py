"""Put-call symmetry diagnostics and replication integrals for volatility swaps.

An atom at zero breaks geometric symmetry of the smile; the conditional law
given survival may still be symmetric, which is what the restricted implied
volatility measures. The log contract cannot be replicated when ``p > 0``,
whereas the arithmetic and gamma variants stay finite.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate

from atomvol import bs
from atomvol.errors import ArbitrageError, DivergenceWarning, DomainError, QuadratureError, UnsupportedModelError
from atomvol.models import AtomDistribution, Merton
from atomvol.specfun import _out

SwapKind = Literal["log_variance", "arithmetic_variance", "gamma"]
SWAP_KINDS = ("log_variance", "arithmetic_variance", "gamma")
TAIL_RTOL = 1e-14


def g_transform(model: AtomDistribution, K):
    """``G(K) = (K / S0) P(S0^2 / K)``; tends to ``p S0`` as ``K -> inf``."""
    K = np.asarray(K, dtype=float)
    if np.any(~(K > 0.0)):
        raise DomainError("g_transform requires K > 0")
    S0 = model.forward
    return _out(K / S0 * np.asarray(model.put(S0 * S0 / K)))


def not_a_call_witness(model: AtomDistribution, decades: Sequence[float] = (6.0, 7.0, 8.0)) -> float:
    """Extrapolated ``lim G(K) / S0``.

    A positive value certifies that ``G`` is not a call price function. The
    three samples at ``K = S0 10^d`` are combined assuming ``G/S0 - lim``
    decays like a power of ``K``.
    """
    S0 = model.forward
    v = np.array([float(g_transform(model, S0 * 10.0**d)) / S0 for d in decades])
    d1, d2 = v[0] - v[1], v[1] - v[2]
    if d1 != 0.0 and 0.0 < d2 / d1 < 1.0:
        r = d2 / d1
        return float(v[2] - d2 * r / (1.0 - r))
    return float(v[2])


def restricted_iv(model: AtomDistribution, x):
    """Implied vol of the law conditional on survival, quoted against ``F / (1 - p)``.

    ``x`` is log-moneyness relative to that rescaled forward. Out-of-the-money
    options are used on both sides so no cancellation against the atom occurs.
    """
    p = model.mass_at_zero
    if not p < 1.0:
        raise DomainError("restricted_iv requires p < 1")
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x)
    F = model.forward
    Ft = F / (1.0 - p)
    K = Ft * np.exp(flat)
    iv = np.empty(flat.shape)
    left = flat <= 0.0
    try:
        if np.any(left):
            # conditional put (P - pK)/(1 - p), normalised by Ft
            put_n = np.atleast_1d(model.excess_put(K[left])) / F
            iv[left] = bs.implied_vol(put_n, flat[left], model.maturity, kind="put")
        if np.any(~left):
            call_n = np.atleast_1d(model.call(K[~left])) / F
            iv[~left] = bs.implied_vol(call_n, flat[~left], model.maturity)
    except ArbitrageError as exc:
        raise ArbitrageError(f"conditional price violates no-arbitrage bounds: {exc}") from exc
    return _out(iv.reshape(x.shape))


def symmetry_deviation(model: AtomDistribution, x_grid) -> float:
    """``max |I^p(x) - I^p(-x)|`` over a grid symmetric about zero."""
    x = np.sort(np.asarray(x_grid, dtype=float))
    if not np.allclose(x, -x[::-1], rtol=0.0, atol=1e-12):
        raise DomainError("symmetry_deviation needs a grid symmetric about 0")
    pos = x[x > 0.0]
    a = np.atleast_1d(restricted_iv(model, pos))
    b = np.atleast_1d(restricted_iv(model, -pos))
    return float(np.max(np.abs(a - b))) if pos.size else 0.0


TestFn = Callable[[np.ndarray], np.ndarray]


def _gauss_expect(fun, mu: float, sd: float, breaks: Sequence[float] = ()) -> float:
    """``E[fun(Y)]`` for ``Y ~ N(mu, sd^2)`` by adaptive quadrature on ``mu +- 14 sd``."""
    lo, hi = mu - 14.0 * sd, mu + 14.0 * sd
    pts = sorted(b for b in breaks if lo < b < hi)
    edges = [lo, *pts, hi]
    total = 0.0
    norm = 1.0 / (sd * math.sqrt(2.0 * math.pi))

    def g(y):
        z = (y - mu) / sd
        return float(fun(y)) * norm * math.exp(-0.5 * z * z)

    for a, b in zip(edges[:-1], edges[1:]):
        val, err = integrate.quad(g, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        if not np.isfinite(val) or err > 1e-9:
            raise QuadratureError("symmetry identity quadrature did not converge")
        total += val
    return total


@dataclass(frozen=True)
class SymmetryResidual:
    lhs: float
    rhs_power: float | None
    rhs_shifted: float

    @property
    def residual(self) -> float:
        r = abs(self.lhs - self.rhs_shifted)
        if self.rhs_power is not None:
            r = max(r, abs(self.lhs - self.rhs_power))
        return r


def merton_symmetry_check(params: Merton, phi: TestFn, breakpoints: Sequence[float] = ()) -> SymmetryResidual:
    """Both sides of the two Merton symmetry identities for a bounded payoff.

    ``breakpoints`` lists discontinuities of ``phi`` (in price units) so the
    quadrature can split there. The power identity is skipped when
    ``L = 1 - 2 lam / sigma^2`` vanishes.
    """
    S0, T, sig, lam = params.spot, params.maturity, params.sigma, params.lam
    p = params.mass_at_zero
    mu = (lam - 0.5 * sig * sig) * T
    sd = sig * math.sqrt(T)
    L = 1.0 - 2.0 * lam / (sig * sig)
    phi0 = float(phi(0.0))
    logb = [math.log(b / S0) for b in breakpoints if b > 0.0]

    # y = log(S_tilde / S0)
    lhs = p * phi0 + (1.0 - p) * _gauss_expect(lambda y: phi(S0 * math.exp(y)), mu, sd, logb)
    rhs_power = None
    if abs(L) > 1e-14:
        rhs_power = p * phi0 + (1.0 - p) * _gauss_expect(
            lambda y: math.exp(L * y) * phi(S0 * math.exp(-y)), mu, sd, [-b for b in logb]
        )
    # S0^2 / (S (1-p)^2) = S0 exp(-y + 2 lam T)
    shift = 2.0 * lam * T
    rhs_shifted = p * phi0 + (1.0 - p) * _gauss_expect(
        lambda y: math.exp(y - lam * T) * phi(S0 * math.exp(shift - y)), mu, sd, [shift - b for b in logb]
    )
    return SymmetryResidual(lhs=lhs, rhs_power=rhs_power, rhs_shifted=rhs_shifted)


@dataclass(frozen=True)
class SwapQuote:
    kind: str
    epsilon: float
    value: float
    diverges: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _integrate_leg(f, a: float, b: float) -> float:
    val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-11, limit=400)
    if not np.isfinite(val) or err > max(1e-9 * abs(val), 1e-15):
        raise QuadratureError(f"swap integral on [{a}, {b}] did not converge")
    return val


def _call_leg(model: AtomDistribution, weight: Callable[[float], float]) -> float:
    """``int_0^inf weight(x) C_n(x) dx`` in log-moneyness, truncated by a relative tail rule."""
    total = 0.0
    a = 0.0
    width = 0.5
    for _ in range(200):
        b = a + width
        piece = _integrate_leg(lambda x: weight(x) * float(model.call_x(x)), a, b)
        total += piece
        a = b
        width = min(2.0 * width, 8.0)
        tail = weight(a) * float(model.call_x(a))
        if tail <= TAIL_RTOL * abs(total) and piece <= TAIL_RTOL * abs(total) * 1e2:
            return total
    raise QuadratureError("call leg did not decay: the upper tail is too heavy")


def _put_leg(model: AtomDistribution, weight: Callable[[float], float], x_lo: float) -> float:
    total = 0.0
    b = 0.0
    width = 0.5
    while b > x_lo:
        a = max(b - width, x_lo)
        total += _integrate_leg(lambda x: weight(x) * float(model.put_x(x)), a, b)
        b = a
        width = min(2.0 * width, 8.0)
    return total


def swap_strike(model: AtomDistribution, kind: SwapKind = "log_variance", epsilon: float | None = None) -> SwapQuote:
    """Continuous-monitoring fair strike from the static replication integral.

    ``epsilon`` (price units) truncates the put leg. It is required for the
    log contract and optional for the other kinds, whose integrals converge. Returns the finite-cutoff value and warns when it
    diverges as ``epsilon -> 0``.
    """
    if kind not in SWAP_KINDS:
        raise DomainError(f"kind must be one of {SWAP_KINDS}")
    T = model.maturity
    F = model.forward
    p = model.mass_at_zero
    diverges = False
    if kind == "log_variance":
        if epsilon is None or not epsilon > 0.0:
            raise DomainError("the log-variance swap needs a positive lower cutoff epsilon")
        x_lo = math.log(epsilon / F)
        if x_lo >= 0.0:
            raise DomainError("epsilon must lie below the forward")
        w = lambda x: math.exp(-x)  # noqa: E731
        val = (2.0 / T) * (_put_leg(model, w, x_lo) + _call_leg(model, w))
        if p > 0.0:
            diverges = True
            warnings.warn(
                f"log-variance replication diverges like (2p/T) log(1/epsilon) with p = {p:.6g}",
                DivergenceWarning,
                stacklevel=2,
            )
        return SwapQuote(kind, float(epsilon), float(val), diverges)
    if epsilon is not None and not epsilon >= 0.0:
        raise DomainError("epsilon must be nonnegative")
    if kind == "gamma":
        if not model.p_star > 0.0:
            raise UnsupportedModelError("gamma swap needs a strictly positive upper critical moment")
        w = lambda x: 1.0  # noqa: E731
        # put_n ~ p e^x as x -> -inf
        x_lo = -60.0
    else:
        w = lambda x: math.exp(x)  # noqa: E731
        x_lo = -40.0
    if epsilon:
        # optional truncation, to show the value does not depend on it
        x_lo = math.log(epsilon / F)
        if x_lo >= 0.0:
            raise DomainError("epsilon must lie below the forward")
    val = (2.0 / T) * (_put_leg(model, w, x_lo) + _call_leg(model, w))
    return SwapQuote(kind, float(epsilon or 0.0), float(val), False)
