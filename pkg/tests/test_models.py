from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from atomvol import bs
from atomvol.errors import DomainError, UnsupportedModelError
from atomvol.models import (
    CEV,
    AbsorbedOU,
    BlackScholes,
    Merton,
    ToyAffine,
    cev_mass,
    merton_cdf,
    model_from_dict,
    ou_mass,
    remainder_R,
    toy_affine_call,
)

CEV_A = CEV(sigma=0.2, beta=-0.4, spot=0.1, maturity=5.2)
CEV_B = CEV(sigma=0.1, beta=-0.4, spot=0.1, maturity=6.13)
MERTON = Merton(sigma=0.3, lam=0.15, spot=100.0, maturity=0.5)
OU = AbsorbedOU(k=0.5, sigma=1.0, spot=1.0, maturity=1.0)

ALL_MODELS = [
    ToyAffine(p=0.3, spot=2.0),
    MERTON,
    Merton.from_mass(0.9, 0.2),
    BlackScholes(sigma=0.25, spot=50.0),
    CEV_A,
    OU,
]


def _full_integral(f, lo_pts):
    """integral over (0, inf) of f, split at the given points."""
    edges = [0.0, *lo_pts]
    total = sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=400)[0] for a, b in zip(edges[:-1], edges[1:]))
    return total + integrate.quad(f, edges[-1], np.inf, epsabs=1e-15, limit=400)[0]


# --- toy -------------------------------------------------------------------


def test_toy_affine_call():
    assert toy_affine_call(0.0, 0.4, 3.0) == 3.0
    assert toy_affine_call(3.0 / 0.6, 0.4, 3.0) == 0.0
    assert toy_affine_call(1.0, 0.4, 3.0) == pytest.approx(3.0 - 0.6)
    with pytest.raises(DomainError):
        toy_affine_call(1.0, 1.0)


def test_toy_smile_shape_and_kink_slope():
    toy = ToyAffine(p=0.4)
    xbar = math.log(toy.kink / toy.spot)
    above = np.linspace(xbar + 1e-6, xbar + 1, 10)
    assert np.all(np.asarray(toy.implied_vol(above)) == 0.0)
    below = np.linspace(-5, xbar - 1e-3, 50)
    assert np.all(np.asarray(toy.implied_vol(below)) > 0.0)
    # the left derivative blows up as x approaches the upper support point
    slopes = []
    for h in (1e-1, 1e-2, 1e-3, 1e-4):
        x = xbar - h
        iv = toy.implied_vol(x)
        slopes.append(bs.smile_slope(x, toy.maturity, iv, toy.tail_prob(toy.strike(x), "left"), side="left"))
    assert all(b < a for a, b in zip(slopes, slopes[1:]))
    assert slopes[-1] < -20


def test_toy_remainder_vanishes_below_kink():
    toy = ToyAffine(p=0.5)
    assert remainder_R(0.7, toy) == pytest.approx(0.0, abs=1e-15)


# --- Merton ----------------------------------------------------------------


def test_merton_mass_and_table_survival():
    assert MERTON.mass_at_zero == pytest.approx(-math.expm1(-0.075), rel=1e-15)
    assert 1.0 - MERTON.mass_at_zero == pytest.approx(0.9277, abs=5e-5)
    for K in (1e-6, 1e-9, 1e-12):
        assert MERTON.put(K) / K == pytest.approx(MERTON.mass_at_zero, rel=1e-12)


def test_merton_without_default_is_black_scholes():
    m = Merton(sigma=0.3, lam=0.0, spot=100.0, maturity=0.5)
    K = np.array([50.0, 100.0, 140.0])
    np.testing.assert_allclose(m.put(K), 100.0 * np.asarray(bs.bs_put(np.log(K / 100), 0.5, 0.3)), rtol=1e-14)


def test_merton_cdf_limits_and_breeden_litzenberger():
    assert merton_cdf(1e-12, MERTON) == pytest.approx(MERTON.mass_at_zero, abs=1e-15)
    assert merton_cdf(1e6, MERTON) == pytest.approx(1.0, abs=1e-15)
    K = np.linspace(20, 300, 50)
    F = np.asarray(merton_cdf(K, MERTON))
    assert np.all(np.diff(F) >= 0) and np.all((F >= MERTON.mass_at_zero) & (F < 1))
    h = 1e-3
    fd = (np.asarray(MERTON.put(K + h)) - np.asarray(MERTON.put(K - h))) / (2 * h)
    np.testing.assert_allclose(fd, F, atol=1e-6)
    with pytest.raises(DomainError):
        merton_cdf(0.0, MERTON)


def test_merton_cdf_decay_faster_than_any_power():
    K = 100.0 * np.exp(-np.array([0.5, 1.0, 1.5]))
    excess = np.asarray(MERTON.cdf(K)) - MERTON.mass_at_zero
    sd2 = MERTON.sigma**2 * MERTON.maturity
    # O(exp(-x^2 / (2 sigma^2 T))) up to a polynomial factor
    bound = np.exp(-(np.log(K / 100.0) ** 2) / (2 * sd2))
    assert np.all(excess <= bound)
    slopes = np.diff(np.log(excess)) / np.diff(np.log(K))
    assert slopes[1] > 1.5 * slopes[0] > 0


def test_merton_remainder_integral_form_and_bounds():
    F0 = MERTON.mass_at_zero
    for K in (5.0, 30.0, 80.0, 120.0):
        integral = integrate.quad(lambda y: float(MERTON.cdf(y)) - F0, 0.0, K, epsabs=1e-13, epsrel=1e-12)[0]
        assert remainder_R(K, MERTON) == pytest.approx(integral / K, abs=1e-9)
    K = np.geomspace(1e-3, 300, 60)
    R = np.asarray(remainder_R(K, MERTON))
    assert np.all(R >= -1e-15) and np.all(R <= np.asarray(MERTON.cdf(K)) - F0 + 1e-15)


def test_merton_density_integrates_to_survival():
    n = _full_integral(MERTON.density, [50.0, 100.0, 200.0])
    assert n == pytest.approx(MERTON.survival, abs=1e-10)
    mean = _full_integral(lambda s: s * MERTON.density(s), [50.0, 100.0, 200.0])
    assert mean == pytest.approx(MERTON.spot, rel=1e-7)


def test_merton_from_mass_round_trip():
    m = Merton.from_mass(0.25, 0.2, maturity=2.0)
    assert m.mass_at_zero == pytest.approx(0.25, rel=1e-14)
    with pytest.raises(DomainError):
        Merton.from_mass(1.0, 0.2)


# --- CEV -------------------------------------------------------------------


def test_cev_masses():
    assert cev_mass(CEV_A) == pytest.approx(0.137, abs=1e-3)
    assert cev_mass(CEV_B) == pytest.approx(0.00059, abs=2e-5)
    short = CEV(sigma=0.2, beta=-0.4, spot=0.1, maturity=1e-4)
    assert cev_mass(short) == pytest.approx(0.0, abs=1e-300)
    with pytest.raises(DomainError):
        CEV(sigma=0.2, beta=-0.6, spot=0.1, maturity=1.0)
    with pytest.raises(DomainError):
        CEV(sigma=0.2, beta=0.1, spot=0.1, maturity=1.0)


@pytest.mark.parametrize("model", [CEV_A, CEV_B, CEV(sigma=0.3, beta=-0.5, spot=1.0, maturity=1.0)])
def test_cev_density_normalisation_and_martingale(model):
    pts = [model.spot * f for f in (0.5, 1.0, 2.0, 5.0)]
    n = _full_integral(model.density, pts)
    assert n == pytest.approx(1.0 - model.mass_at_zero, abs=1e-8)
    mean = _full_integral(lambda s: s * model.density(s), pts)
    assert mean == pytest.approx(model.spot, abs=1e-8)


def test_cev_density_small_s_power_law():
    s = np.geomspace(1e-8, 1e-4, 9)
    g = np.asarray(CEV_A.log_density(s)) - (2 * 0.4 - 1) * np.log(s)
    slope = np.polyfit(np.log(s), g, 1)[0]
    assert abs(slope) < 1e-3
    assert np.ptp(g) < 1e-2
    with pytest.raises(DomainError):
        CEV_A.density(0.0)


@pytest.mark.parametrize("model", [CEV_A, CEV_B])
def test_cev_put_against_noncentral_chi_square(model):
    # X = S^(-2 beta)/(sigma beta)^2 is a squared Bessel process; under the
    # share measure X_T / T is noncentral chi-square with 2 + 1/|beta| degrees
    K = model.spot * np.array([1e-8, 1e-3, 0.1, 0.6, 1.0, 1.7])
    b, T, X0 = model.beta, model.maturity, model.X0
    y = K ** (-2 * b) / (model.sigma**2 * b * b)
    F = 1.0 - stats.ncx2.cdf(X0 / T, df=1 / abs(b), nc=y / T)
    share = stats.ncx2.cdf(y / T, df=2 + 1 / abs(b), nc=X0 / T)
    put_ref = K * F - model.spot * share
    np.testing.assert_allclose(model.cdf(K), F, atol=1e-12)
    np.testing.assert_allclose(model.put(K), put_ref, rtol=1e-9, atol=1e-13)


def test_cev_put_limit_parity_convexity():
    for K in (1e-10, 1e-12):
        assert CEV_A.put(K) / K == pytest.approx(CEV_A.mass_at_zero, rel=1e-6)
    K = np.linspace(0.01, 0.3, 30)
    resid = np.asarray(CEV_A.call(K)) - np.asarray(CEV_A.put(K)) - (CEV_A.spot - K)
    assert np.max(np.abs(resid)) <= 1e-8
    P = np.asarray(CEV_A.put(K))
    assert np.all(P[2:] - 2 * P[1:-1] + P[:-2] >= -1e-10)


def test_cev_cdf_exponent():
    K = np.geomspace(1e-9, 1e-6, 5)
    excess = np.asarray(CEV_A.cdf(K)) - CEV_A.mass_at_zero
    slope = np.polyfit(np.log(K), np.log(excess), 1)[0]
    assert slope == pytest.approx(0.8, abs=1e-3)


# --- absorbed OU -----------------------------------------------------------


def test_ou_mass_closed_form():
    # k = 1/2 makes the reflection result coincide with the classical display
    ref = special.erfc(1.0 / (1.0 * math.sqrt(2.0 * (math.exp(1.0) - 1.0))))
    assert ou_mass(OU) == pytest.approx(ref, rel=1e-14)
    assert ou_mass(AbsorbedOU(k=0.5, sigma=1.0, spot=1.0, maturity=1e-4)) == pytest.approx(0.0, abs=1e-300)
    assert ou_mass(AbsorbedOU(k=0.5, sigma=1.0, spot=1.0, maturity=200.0)) == pytest.approx(1.0, abs=1e-12)
    Ts = np.linspace(0.1, 5, 20)
    masses = [ou_mass(AbsorbedOU(k=0.8, sigma=0.7, spot=1.0, maturity=T)) for T in Ts]
    assert np.all(np.diff(masses) > 0)


@pytest.mark.parametrize("model", [OU, AbsorbedOU(k=2.0, sigma=0.4, spot=0.3, maturity=3.0)])
def test_ou_density_normalisation(model):
    n = _full_integral(model.density, [model.m, 3 * model.m + 5 * math.sqrt(model.v)])
    assert n == pytest.approx(1.0 - model.mass_at_zero, abs=1e-8)


def test_ou_is_not_a_martingale():
    mean = _full_integral(lambda y: y * OU.density(y), [OU.m, 5.0])
    assert mean == pytest.approx(OU.m, rel=1e-9)
    assert abs(mean - OU.spot) > 0.1


def test_ou_density_linear_at_origin():
    y = np.geomspace(1e-8, 1e-5, 7)
    r = np.asarray(OU.density(y)) / y
    assert np.all(r > 0) and np.ptp(r) / r.mean() < 1e-4


def test_ou_small_k_matches_absorbed_brownian_motion():
    s0, sig, T = 1.0, 0.8, 1.5
    ou = AbsorbedOU(k=1e-9, sigma=sig, spot=s0, maturity=T)
    y = np.linspace(0.05, 4, 30)
    sd = sig * math.sqrt(T)
    bm = (stats.norm.pdf(y, s0, sd) - stats.norm.pdf(y, -s0, sd))
    np.testing.assert_allclose(ou.density(y), bm, rtol=1e-7)
    assert ou.mass_at_zero == pytest.approx(2 * special.ndtr(-s0 / sd), rel=1e-7)


def test_ou_put_closed_form_vs_quadrature():
    K = np.array([1e-4, 0.05, 0.3, 0.9, 2.0])
    ref = [OU.mass_at_zero * k + integrate.quad(lambda y: (k - y) * OU.density(y), 0, k, epsabs=0, epsrel=1e-13)[0] for k in K]
    np.testing.assert_allclose(OU.put(K), ref, rtol=1e-10)


def test_ou_cdf_exponent_two():
    K = np.geomspace(1e-3, 1e-2, 5)
    excess = np.asarray(OU.cdf(K)) - OU.mass_at_zero
    ref = [integrate.quad(OU.density, 0, k, epsabs=0, epsrel=1e-13)[0] for k in K]
    np.testing.assert_allclose(excess, ref, rtol=1e-8)
    slope = np.polyfit(np.log(K), np.log(excess), 1)[0]
    assert slope == pytest.approx(2.0, abs=1e-2)


# --- shared invariants -----------------------------------------------------


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
def test_common_invariants(model):
    F = model.forward
    K = np.linspace(0.02 * F, 3 * F, 60)
    P = np.asarray(model.put(K))
    assert np.all(P[2:] - 2 * P[1:-1] + P[:-2] >= -1e-10)
    C = np.asarray(model.cdf(K))
    assert np.all(np.diff(C) >= -1e-15) and C[0] >= model.mass_at_zero - 1e-15
    small = F * np.array([1e-8, 1e-9, 1e-10])
    ratios = np.asarray(model.put(small)) / small
    assert ratios[-1] == pytest.approx(model.mass_at_zero, rel=1e-5, abs=1e-12)
    assert ratios[0] >= ratios[-1] - 1e-15


@pytest.mark.parametrize("model", [MERTON, CEV_A, OU], ids=lambda m: m.name)
def test_breeden_litzenberger(model):
    F = model.forward
    K = np.array([0.3, 0.7, 1.0, 1.5]) * F
    h = 1e-4 * F
    fd = (np.asarray(model.put(K + h)) - np.asarray(model.put(K - h))) / (2 * h)
    np.testing.assert_allclose(fd, model.cdf(K), atol=1e-6)


def test_density_unsupported_for_two_point_law():
    with pytest.raises(UnsupportedModelError):
        ToyAffine(p=0.2).density(1.0)


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
def test_json_round_trip(model):
    doc = model.to_dict()
    assert doc["model"] == model.name
    again = model_from_dict(doc)
    assert again == model


def test_model_from_dict_errors():
    with pytest.raises(UnsupportedModelError):
        model_from_dict({"model": "heston", "params": {}})
    with pytest.raises(DomainError):
        model_from_dict({"model": "merton", "params": {"sigma": 0.2, "p": 0.1, "lam": 0.3}})
    with pytest.raises(DomainError):
        model_from_dict({"model": "cev", "params": {"sigma": 0.2}})
