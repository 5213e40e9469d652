from __future__ import annotations

import numpy as np
import pytest

from atomvol.errors import DomainError
from atomvol.models import CEV, AbsorbedOU, Merton
from atomvol.montecarlo import CHUNK, McConfig, mc_price, path_normals, simulate_terminal

CEV_A = CEV(sigma=0.2, beta=-0.4, spot=0.1, maturity=5.2)


def test_config_validation():
    for bad in ({"n_paths": 10}, {"n_steps": 0}, {"n_workers": 0}, {"seed": -1}, {"scheme": "milstein"}):
        with pytest.raises(DomainError):
            McConfig(**bad)


def test_path_streams_do_not_depend_on_slicing():
    full = path_normals(7, 0, 10, 5)
    np.testing.assert_array_equal(full[3:8], path_normals(7, 3, 8, 5))
    assert not np.array_equal(path_normals(8, 0, 10, 5), full)


def test_worker_count_is_invisible():
    n = CHUNK * 2 + 17
    a = simulate_terminal(CEV_A, McConfig(seed=3, n_paths=n, n_steps=20, n_workers=1))
    b = simulate_terminal(CEV_A, McConfig(seed=3, n_paths=n, n_steps=20, n_workers=3))
    assert a.tobytes() == b.tobytes()


def test_cev_absorption_and_puts_within_noise():
    res = mc_price(CEV_A, [0.02, 0.05], McConfig(seed=1, n_paths=20_000, n_steps=100))
    z = (res.absorbed_fraction - CEV_A.mass_at_zero) / res.absorbed_stderr
    assert abs(z) < 4
    zp = (res.put - np.asarray(CEV_A.put(res.strikes))) / res.stderr
    assert np.all(np.abs(zp) < 4)
    lo, hi = res.ci95()
    assert np.all(lo < res.put) and np.all(res.put < hi)
    assert res.mean == pytest.approx(CEV_A.spot, abs=4 * res.std / np.sqrt(res.n_paths))


def test_ou_mass_matches_reflection_formula():
    ou = AbsorbedOU(k=0.5, sigma=1.0, spot=1.0, maturity=1.0)
    res = mc_price(ou, [0.5], McConfig(seed=2, n_paths=20_000, n_steps=400))
    # discrete monitoring misses crossings, so allow the usual O(sqrt(dt)) bias
    assert res.absorbed_fraction == pytest.approx(ou.mass_at_zero, abs=0.02)
    assert res.mean == pytest.approx(ou.forward, abs=0.03)


def test_unsupported_dynamics_and_bad_strikes():
    with pytest.raises(DomainError):
        mc_price(Merton(sigma=0.2, lam=0.1), [1.0], McConfig(n_paths=100, n_steps=1))
    with pytest.raises(DomainError):
        mc_price(CEV_A, [-1.0], McConfig(n_paths=100, n_steps=1))
