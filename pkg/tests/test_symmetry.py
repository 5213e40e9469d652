from __future__ import annotations

import math
import warnings

import numpy as np
import pytest

from atomvol.errors import DivergenceWarning, DomainError, UnsupportedModelError
from atomvol.models import CEV, BlackScholes, Merton, ToyAffine
from atomvol.symmetry import (
    g_transform,
    merton_symmetry_check,
    not_a_call_witness,
    restricted_iv,
    swap_strike,
    symmetry_deviation,
)

MERTON = Merton(sigma=0.25, lam=0.2, spot=1.0, maturity=1.0)


def test_restricted_iv_is_flat_for_merton():
    x = np.linspace(-2, 2, 21)
    iv = np.asarray(restricted_iv(MERTON, x))
    np.testing.assert_allclose(iv, MERTON.sigma, atol=1e-12)
    assert symmetry_deviation(MERTON, x) < 1e-12
    with pytest.raises(DomainError):
        symmetry_deviation(MERTON, [0.1, 0.2])


def test_restricted_iv_is_skewed_for_cev():
    cev = CEV(sigma=0.2, beta=-0.4, spot=0.1, maturity=5.2)
    assert symmetry_deviation(cev, np.linspace(-1, 1, 9)) > 1e-3


def test_g_transform():
    bsm = BlackScholes(sigma=0.3, spot=2.0)
    K = np.array([0.5, 2.0, 7.0])
    np.testing.assert_allclose(g_transform(bsm, K), bsm.call(K), rtol=1e-12)
    assert abs(not_a_call_witness(bsm)) < 1e-12
    assert not_a_call_witness(MERTON) == pytest.approx(MERTON.mass_at_zero, abs=1e-10)
    assert not_a_call_witness(ToyAffine(p=0.5)) == pytest.approx(0.5, abs=1e-8)
    with pytest.raises(DomainError):
        g_transform(bsm, 0.0)


PAYOFFS = [
    (lambda s: 1.0 / (1.0 + s), ()),
    (lambda s: math.exp(-s), ()),
    (lambda s: float(s < 0.8), (0.8,)),
    (lambda s: min(s, 1.5), (1.5,)),
    (lambda s: math.sin(s) ** 2 / (1.0 + s * s), ()),
]


@pytest.mark.parametrize("phi,breaks", PAYOFFS)
def test_merton_symmetry_identities(phi, breaks):
    r = merton_symmetry_check(MERTON, phi, breaks)
    assert r.rhs_power is not None
    assert r.residual < 1e-9


def test_symmetry_power_identity_skipped_when_exponent_vanishes():
    m = Merton(sigma=0.2, lam=0.02, spot=1.0, maturity=1.0)
    r = merton_symmetry_check(m, lambda s: 1.0 / (1.0 + s))
    assert r.rhs_power is None and r.residual < 1e-9


def test_swaps():
    bsm = BlackScholes(sigma=0.25, maturity=1.0)
    assert swap_strike(bsm, "log_variance", 1e-12).value == pytest.approx(0.0625, abs=1e-8)
    assert swap_strike(bsm, "gamma").value == pytest.approx(0.0625, abs=1e-8)
    assert swap_strike(bsm, "arithmetic_variance").value == pytest.approx(math.expm1(0.0625), abs=1e-8)
    assert swap_strike(MERTON, "gamma").value == pytest.approx(0.0625 + 0.4, abs=1e-8)
    q = swap_strike(MERTON, "arithmetic_variance")
    assert q.value == pytest.approx(math.expm1(0.0625 + 0.2), rel=1e-8)
    assert '"kind": "arithmetic_variance"' in q.to_json()
    with pytest.warns(DivergenceWarning):
        lv = swap_strike(MERTON, "log_variance", 1e-6)
    assert lv.diverges


def test_log_swap_divergence_rate():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DivergenceWarning)
        a = swap_strike(MERTON, "log_variance", 1e-8).value
        b = swap_strike(MERTON, "log_variance", 1e-10).value
    slope = (b - a) / (2 * math.log(10))
    assert slope == pytest.approx(2 * MERTON.mass_at_zero / MERTON.maturity, rel=1e-3)


def test_swap_errors():
    with pytest.raises(DomainError):
        swap_strike(MERTON, "log_variance")
    with pytest.raises(DomainError):
        swap_strike(MERTON, "gamma", epsilon=-1e-3)
    with pytest.raises(DomainError):
        swap_strike(MERTON, "arithmetic_variance", epsilon=2.0)
    with pytest.raises(DomainError):
        swap_strike(MERTON, "volatility")
    toy = ToyAffine(p=0.3)
    object.__setattr__(toy, "p_star", 0.0)
    with pytest.raises(UnsupportedModelError):
        swap_strike(toy, "gamma")
