from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import special

from atomvol import asymptotics as A
from atomvol.errors import DomainError, EstimationError
from atomvol.estimators import (
    TABLE_COLUMNS,
    q_roots,
    survival_from_d2,
    survival_second_order,
    survival_third_order,
    table1,
    table_to_csv,
)
from atomvol.models import Merton

TABLE_MODEL = Merton(sigma=0.3, lam=0.15, spot=100.0, maturity=0.5)


def test_exact_inversions():
    x, T, q = -8.0, 1.0, -1.0
    iv = math.sqrt(16.0) + q + q * q / (2 * math.sqrt(16.0))
    assert q_roots(x, T, iv)[0] == pytest.approx(-1.0, abs=1e-14)
    assert survival_third_order(x, T, iv).survival == pytest.approx(special.ndtr(1.0), abs=1e-15)
    p = 0.23
    o2 = A.expansion(-30.0, 2.0, p, order=2).iv_approx
    assert survival_second_order(-30.0, 2.0, o2).survival == pytest.approx(1 - p, abs=1e-14)


def test_d2_estimator_on_half_atom():
    x = -1e6
    iv = float(A.synthetic_smile(x, 1.0, 0.5, remainder=0.0))
    assert survival_from_d2(x, 1.0, iv).survival == pytest.approx(0.5, abs=1e-3)
    with pytest.raises(DomainError):
        survival_from_d2(x, 1.0, 0.0)


def test_second_order_is_clamped():
    est = survival_second_order(-1.0, 1.0, 1e3)
    assert 0.0 <= est.survival <= 1.0


def test_complex_roots_raise():
    with pytest.raises(EstimationError):
        q_roots(-2.0, 1.0, 0.1)


def test_table_shape_and_degenerate_case():
    rows = table1(TABLE_MODEL)
    assert len(rows) == 6
    assert len(rows[0].as_tuple()) == len(TABLE_COLUMNS)
    assert all(r.exact == pytest.approx(math.exp(-0.075)) for r in rows)
    assert all(0 <= v <= 1 for r in rows for v in r.as_tuple()[2:])
    # estimates climb toward the truth as moneyness shrinks
    for col in (2, 3, 4):
        vals = [r.as_tuple()[col] for r in rows]
        assert np.all(np.diff(vals) > 0)
    bsm = Merton(sigma=0.3, lam=0.0, spot=100.0, maturity=0.5)
    x = math.log(1e-10)
    iv = float(bsm.implied_vol(x))
    assert iv == pytest.approx(0.3, rel=1e-12)
    assert survival_from_d2(x, 0.5, iv).survival > 0.99
    assert survival_second_order(x, 0.5, iv).survival > 0.99
    # a flat smile sits below sqrt(2|x|/T), so the order-3 quadratic has no real root
    with pytest.raises(EstimationError):
        table1(bsm, moneyness=(1e-10,))
    with pytest.raises(DomainError):
        table1(TABLE_MODEL, moneyness=(0.0,))


def test_table_csv():
    text = table_to_csv(table1(TABLE_MODEL))
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(TABLE_COLUMNS)
    assert len(lines) == 7


# first verified run of the lam = 0.85 variant (no published values exist)
LAM85_GOLDEN = [
    (0.42130533502648543, 0.41481357637061322, 0.42134462044391729),
    (0.43759227764933545, 0.43401590297426806, 0.43760303564751296),
    (0.45425808111852328, 0.45257460705578606, 0.45426022750041622),
    (0.47232097632844761, 0.47178644000001296, 0.47232116897398729),
    (0.49440959127815809, 0.49439133949779052, 0.49440959147147234),
    (0.5979641396491, 0.59620954073262911, 0.59796474756772389),
]


def test_high_intensity_table_regression():
    rows = table1(Merton(sigma=0.3, lam=0.85, spot=100.0, maturity=0.5))
    got = np.array([r.as_tuple()[2:5] for r in rows])
    np.testing.assert_allclose(got, LAM85_GOLDEN, rtol=1e-10)
    assert rows[0].exact == pytest.approx(math.exp(-0.425))
