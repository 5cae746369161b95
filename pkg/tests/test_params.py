import numpy as np
import pytest
from hypothesis import given, strategies as st

from parawolff.params import RangeError, lambda_upper_bound, make_params, potential_params


def test_beta_for_n2_p15():
    prm = make_params(2, 1.5, 1e-6)
    assert prm.beta == pytest.approx(1.5 + 2 * (1.5 - 2.0), abs=1e-15)
    assert prm.beta == pytest.approx(0.5, abs=1e-15)


def test_lower_boundary_rejected_n1():
    with pytest.raises(RangeError):
        make_params(1, 1.0, 1e-6)


def test_default_lambda_n2_p18():
    prm = make_params(2, 1.8, 1e-6)
    assert prm.lam == pytest.approx(min(0.8, 0.2 / 0.8, 0.5) / 2)
    assert prm.lam == pytest.approx(0.125)


def test_default_k_and_structure_constants():
    prm = make_params(2, 1.7, 1e-6)
    assert prm.k == pytest.approx(3.7)
    assert prm.k > prm.p + 1
    assert 0 < prm.c1 <= prm.c2


@pytest.mark.parametrize("p", [2.0, 2.5, 1.33])
def test_out_of_range_p(p):
    with pytest.raises(RangeError):
        make_params(2, p, 1e-6)


def test_bad_lambda_k_eps():
    with pytest.raises(RangeError):
        make_params(2, 1.8, 1e-6, lam=0.3)
    with pytest.raises(RangeError):
        make_params(2, 1.8, 1e-6, k=2.5)
    with pytest.raises(RangeError):
        make_params(2, 1.8, 0.0)


@given(n=st.integers(1, 3), frac=st.floats(-0.5, 0.999))
def test_beta_positive_iff_supercritical(n, frac):
    lo = 2 * n / (n + 1)
    p = lo + frac * (2 - lo)
    beta = p + n * (p - 2)
    if p > lo and p < 2:
        prm = make_params(n, p, 1e-6)
        assert prm.beta == pytest.approx(beta)
        assert prm.beta > 0
        assert 0 < prm.lam < lambda_upper_bound(p)
    else:
        assert beta <= 1e-12
        with pytest.raises(RangeError):
            make_params(n, p, 1e-6)


def test_make_params_pure():
    assert make_params(2, 1.6, 1e-6) == make_params(2, 1.6, 1e-6)


def test_potential_params_any_p_above_one():
    prm = potential_params(2, 1.2)
    assert prm.p == 1.2 and prm.n == 2
    with pytest.raises(RangeError):
        potential_params(2, 1.0)
