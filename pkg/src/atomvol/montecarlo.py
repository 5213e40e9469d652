"""Euler Monte Carlo with absorption at zero for the diffusion models.

Path ``i`` draws its normals from its own Philox stream keyed by
``(seed, i)``, and paths are processed in fixed-size chunks, so the result is
bitwise identical whatever the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from atomvol.errors import DomainError
from atomvol.models import CEV, AbsorbedOU

CHUNK = 2048
SCHEMES = ("bessel", "direct")


@dataclass(frozen=True)
class McConfig:
    seed: int = 0
    n_paths: int = 50_000
    n_steps: int = 100
    n_workers: int = 1
    # CEV only: "bessel" steps X = S^(-2 beta)/(sigma beta)^2, "direct" steps S
    scheme: str = "bessel"

    def __post_init__(self):
        if self.n_paths < 100:
            raise DomainError("n_paths must be at least 100")
        if self.n_steps < 1:
            raise DomainError("n_steps must be positive")
        if self.n_workers < 1:
            raise DomainError("n_workers must be positive")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must fit in 64 unsigned bits")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}")


@dataclass
class McResult:
    strikes: np.ndarray
    put: np.ndarray
    stderr: np.ndarray
    absorbed_fraction: float
    absorbed_stderr: float
    mean: float
    std: float
    n_paths: int
    terminal: np.ndarray = field(repr=False)

    def ci95(self):
        return self.put - 1.96 * self.stderr, self.put + 1.96 * self.stderr


def path_normals(seed: int, start: int, stop: int, n_steps: int) -> np.ndarray:
    """Standard normals for paths ``start..stop-1``, one counter-based stream each."""
    out = np.empty((stop - start, n_steps))
    for row, i in enumerate(range(start, stop)):
        gen = np.random.Generator(np.random.Philox(key=seed + (i << 64)))
        out[row] = gen.standard_normal(n_steps)
    return out


def _simulate_chunk(args) -> np.ndarray:
    model, cfg, start, stop = args
    Z = path_normals(cfg.seed, start, stop, cfg.n_steps)
    dt = model.maturity / cfg.n_steps
    sq = math.sqrt(dt)
    if isinstance(model, CEV):
        b = model.beta
        if cfg.scheme == "bessel":
            delta = 2.0 + 1.0 / b
            X = np.full(stop - start, model.X0)
            for j in range(cfg.n_steps):
                X = X + delta * dt + 2.0 * np.sqrt(np.maximum(X, 0.0)) * sq * Z[:, j]
                X = np.where(X <= 0.0, 0.0, X)
            return (X * model.sigma**2 * b * b) ** (-1.0 / (2.0 * b))
        S = np.full(stop - start, model.spot)
        for j in range(cfg.n_steps):
            S = S + model.sigma * np.maximum(S, 0.0) ** (1.0 + b) * sq * Z[:, j]
            S = np.where(S <= 0.0, 0.0, S)
        return S
    if isinstance(model, AbsorbedOU):
        S = np.full(stop - start, model.spot)
        alive = np.ones(stop - start, dtype=bool)
        for j in range(cfg.n_steps):
            S = np.where(alive, S - model.k * S * dt + model.sigma * sq * Z[:, j], 0.0)
            alive &= S > 0.0
            S = np.where(alive, S, 0.0)
        return S
    raise DomainError(f"no Monte Carlo dynamics for model {model.name!r}")


def simulate_terminal(model, cfg: McConfig) -> np.ndarray:
    """Terminal values ``S_T`` for all paths, in path order."""
    jobs = [(model, cfg, a, min(a + CHUNK, cfg.n_paths)) for a in range(0, cfg.n_paths, CHUNK)]
    if cfg.n_workers == 1 or len(jobs) == 1:
        parts = [_simulate_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.n_workers) as pool:
            parts = list(pool.map(_simulate_chunk, jobs))
    return np.concatenate(parts)


def mc_price(dynamics, K, cfg: McConfig | None = None) -> McResult:
    """Put prices at strikes ``K`` with standard errors and the absorbed fraction."""
    cfg = cfg or McConfig()
    if not isinstance(dynamics, (CEV, AbsorbedOU)):
        raise DomainError("mc_price supports the CEV and absorbed OU dynamics")
    strikes = np.atleast_1d(np.asarray(K, dtype=float))
    if np.any(~(strikes >= 0.0)):
        raise DomainError("strikes must be nonnegative")
    ST = simulate_terminal(dynamics, cfg)
    n = ST.size
    pay = np.maximum(strikes[:, None] - ST[None, :], 0.0)
    absorbed = ST == 0.0
    frac = float(absorbed.mean())
    return McResult(
        strikes=strikes,
        put=pay.mean(axis=1),
        stderr=pay.std(axis=1, ddof=1) / math.sqrt(n),
        absorbed_fraction=frac,
        absorbed_stderr=math.sqrt(frac * (1.0 - frac) / (n - 1)),
        mean=float(ST.mean()),
        std=float(ST.std(ddof=1)),
        n_paths=n,
        terminal=ST,
    )
