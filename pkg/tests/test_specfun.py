import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from leakyspec import specfun
from leakyspec.oracles import k0_integral, sph_downward_recurrence


def test_i0_small_argument_limit():
    assert abs(specfun.bessel_ik(0, 1e-10).I - 1.0) < 1e-15


@pytest.mark.parametrize("l", [0, 1, 2, 5, 20, 60])
@pytest.mark.parametrize("x", [0.5, 1.0, 5.0])
def test_wronskian(l, x):
    assert specfun.bessel_ik(l, x).wronskian_residual < 1e-12


def test_k0_against_integral_oracle(reference):
    ref = reference["K0(1)"]["value"]
    assert abs(specfun.bessel_ik(0, 1.0).K - ref) < 1e-11
    assert abs(k0_integral(1.0) - ref) == 0.0


@pytest.mark.parametrize("x", [0.1, 1.0, 3.0])
def test_spherical_closed_forms(x):
    p = specfun.sph_bessel_ik(0, x)
    assert abs(p.i - np.sinh(x) / x) <= 1e-13 * abs(np.sinh(x) / x)
    assert abs(p.k - np.exp(-x) / x) <= 1e-13 * np.exp(-x) / x


def test_spherical_l1_against_recurrence_oracle(reference):
    i1, k1 = reference["sph_ik(1,2)"]["value"]
    p = specfun.sph_bessel_ik(1, 2.0)
    assert abs(p.i - i1) / i1 < 1e-11
    assert abs(p.k - k1) / k1 < 1e-11
    assert sph_downward_recurrence(1, 2.0) == pytest.approx((i1, k1), rel=1e-14)


@pytest.mark.parametrize("x", [0.1, 0.7, 2.0, 9.5, 50.0])
def test_three_term_recurrences(x):
    ls = np.arange(1, 50)
    logi, logk, _, _ = specfun.log_bessel_table(51, x)
    # I_{l-1} - I_{l+1} = (2l/x) I_l and K_{l+1} - K_{l-1} = (2l/x) K_l, divided through by I_l, K_l
    ri = np.exp(logi[ls - 1] - logi[ls]) - np.exp(logi[ls + 1] - logi[ls])
    rk = np.exp(logk[ls + 1] - logk[ls]) - np.exp(logk[ls - 1] - logk[ls])
    assert np.max(np.abs(ri - 2 * ls / x) / (2 * ls / x)) < 1e-11
    assert np.max(np.abs(rk - 2 * ls / x) / (2 * ls / x)) < 1e-11


def test_monotonicity():
    x = np.linspace(0.05, 40, 300)
    for l in (0, 3, 17):
        I, K, _, _ = specfun.bessel_ik_array(l, x)
        assert np.all(np.diff(I) > 0) and np.all(np.diff(K) < 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 120), st.floats(0.01, 300.0))
def test_matches_scipy_in_log_form(l, x):
    iv, kv = special.ive(l, x), special.kve(l, x)
    if not (np.isfinite(iv) and np.isfinite(kv)) or iv == 0 or kv == 0:
        return
    logi, logk, _, _ = (float(v) for v in specfun.log_bessel_ik(l, x))
    assert abs(logi - x - np.log(iv)) < 1e-12 * max(1.0, abs(logi))
    assert abs(logk + x - np.log(kv)) < 1e-12 * max(1.0, abs(logk))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 400), st.floats(1e-3, 5e3))
def test_log_table_consistent_with_single_order(l, x):
    logi, logk, di, dk = specfun.log_bessel_table(l, x)
    a, b, c, d = (float(v) for v in specfun.log_bessel_ik(l, x))
    assert abs(logi[-1] - a) <= 1e-12 * max(1.0, abs(a))
    assert abs(logk[-1] - b) <= 1e-12 * max(1.0, abs(b))
    assert di[-1] == pytest.approx(c, rel=1e-12)
    assert dk[-1] == pytest.approx(d, rel=1e-12)


def test_domain_and_overflow_errors():
    with pytest.raises(specfun.BesselDomainError):
        specfun.bessel_ik(0, 0.0)
    with pytest.raises(specfun.BesselDomainError):
        specfun.bessel_ik(-1, 1.0)
    with pytest.raises(specfun.BesselOverflowError, match="scaled"):
        specfun.bessel_ik(0, 800.0)
    # log form never overflows
    logi, logk, _, _ = specfun.log_bessel_ik(0, 800.0)
    assert np.isfinite(logi) and np.isfinite(logk)


def test_k0_k1_and_i0_helpers():
    x = np.array([1e-8, 0.3, 2.0, 2.0001, 30.0, 600.0])
    k0, k1 = specfun.k0_k1(x)
    assert np.allclose(k0, special.k0(x), rtol=1e-13, atol=0)
    assert np.allclose(k1, special.k1(x), rtol=1e-13, atol=0)
    xi = np.array([0.0, 0.1, 10.0, 24.9, 25.1, 300.0])
    assert np.allclose(specfun.i0(xi), special.i0(xi), rtol=1e-13, atol=0)
