import math

import numpy as np
import pytest
from scipy import special

from leakyspec import oracles
from leakyspec.oracles import OracleInputError, ShootingProblem


def test_k0_integral_against_tabulated_value():
    # K_0(1) to 16 digits from standard tables
    assert abs(oracles.k0_integral(1.0) - 0.42102443824070834) < 1e-15


def test_ellipse_perimeter_degenerates_to_circle():
    assert abs(oracles.ellipse_perimeter(1.5, 1.5) - 3 * np.pi) < 1e-13


@pytest.mark.parametrize("l,x", [(0, 0.5), (1, 2.0), (1, 10.0), (4, 3.0)])
def test_spherical_recurrence_closed_forms(l, x):
    il, kl = oracles.sph_downward_recurrence(l, x)
    if l == 0:
        ie, ke = math.sinh(x) / x, math.exp(-x) / x
    elif l == 1:
        ie, ke = math.cosh(x) / x - math.sinh(x) / x**2, math.exp(-x) / x * (1 + 1 / x)
    else:
        ie = special.spherical_in(l, x)
        ke = special.spherical_kn(l, x) * 2 / np.pi
    assert il == pytest.approx(ie, rel=1e-13)
    assert kl == pytest.approx(ke, rel=1e-13)


@pytest.mark.parametrize("n,l", [(2, 0), (2, 3), (3, 0), (3, 2)])
def test_shooting_log_derivatives_against_bessel(n, l):
    kappa, R = np.array([0.5, 1.0, 3.0]), 1.0
    p, q = oracles.log_derivatives(ShootingProblem(n, l, R), kappa)
    x = kappa * R
    if n == 2:
        p_ref = kappa * special.ivp(l, x) / special.iv(l, x)
        q_ref = kappa * special.kvp(l, x) / special.kv(l, x)
    else:
        p_ref = kappa * special.spherical_in(l, x, True) / special.spherical_in(l, x)
        q_ref = kappa * special.spherical_kn(l, x, True) / special.spherical_kn(l, x)
    assert np.max(np.abs(p / p_ref - 1)) < 1e-8
    assert np.max(np.abs(q / q_ref - 1)) < 1e-8


def test_shooting_refinement_is_stable():
    prob = ShootingProblem(2, 2, 1.0, "delta", 8.0)
    r1 = oracles.shooting_roots(prob)
    r2 = oracles.shooting_roots(prob.refined())
    assert r1.size == r2.size == 1
    # fourth-order integrator: halving the step moves the root far below the 1e-6 target
    assert abs(r1[0] - r2[0]) < 1e-8


@pytest.mark.parametrize("n,alpha", [(2, 2.0), (2, 8.0), (3, 8.0)])
def test_shooting_agrees_with_bessel_root_finding(n, alpha):
    for l in range(4):
        shoot = oracles.shooting_roots(ShootingProblem(n, l, 1.0, "delta", alpha))
        bis = oracles.mode_roots(oracles.delta_mode_condition(n, l, 1.0, alpha), (1e-3, 20.0))
        assert len(shoot) == len(bis)
        assert np.allclose(shoot, bis, rtol=1e-8)


def test_delta_prime_shooting_agrees_with_bessel_root_finding():
    for l in range(4):
        shoot = oracles.shooting_roots(ShootingProblem(2, l, 1.0, "delta_prime", 0.3), kappa_lo=1e-4)
        bis = oracles.mode_roots(oracles.delta_prime_mode_condition(l, 1.0, 0.3), (1e-4, 20.0), n=800)
        assert len(shoot) == len(bis)
        assert np.allclose(shoot, bis, rtol=1e-8)


def test_single_layer_fourier_coefficients_against_bessel_products():
    for l in (0, 1, 5, 10):
        for kappa, R in ((1.0, 1.0), (0.4, 2.0)):
            got = oracles.mode_fourier_single_layer(l, kappa, R)
            ref = R * special.iv(l, kappa * R) * special.kv(l, kappa * R)
            assert abs(got - ref) < 1e-12 * max(1.0, ref)


def test_bisection_reports():
    rep = oracles.bessel_root_bisect(lambda x: x * x - 2, (0, 2))
    assert rep.found and abs(rep.root - math.sqrt(2)) < 1e-11
    rep = oracles.bessel_root_bisect(lambda x: x * x + 1, (0, 2))
    assert not rep.found and "sign" in rep.message
    with pytest.raises(OracleInputError, match="degenerate"):
        oracles.bessel_root_bisect(lambda x: x, (1.0, 1.0))


def test_input_validation():
    with pytest.raises(OracleInputError):
        ShootingProblem(4, 0, 1.0)
    with pytest.raises(OracleInputError):
        ShootingProblem(2, 0, 1.0, r_min_frac=1e-2)
    with pytest.raises(OracleInputError):
        ShootingProblem(2, 0, 1.0, t_max=10.0)
    with pytest.raises(OracleInputError):
        ShootingProblem(2, 0, 1.0, kind="delta_double")
    with pytest.raises(OracleInputError):
        oracles.log_derivatives(ShootingProblem(2, 0, 1.0), -1.0)
    with pytest.raises(OracleInputError):
        oracles.mode_fourier_single_layer(0, 1.0, 1.0, order=128)


def test_stencils_on_polynomials():
    f2 = lambda p: p[0] ** 2 + 3 * p[1] ** 2
    assert oracles.five_point_laplacian(f2, np.array([0.3, -0.2]), 0.1) == pytest.approx(8.0)
    f3 = lambda p: p[0] ** 2 + p[1] ** 2 + p[2] ** 2
    assert oracles.seven_point_laplacian(f3, np.array([0.3, -0.2, 1.0]), 0.1) == pytest.approx(6.0)


def test_reference_file_round_trip(tmp_path):
    ref = oracles.ReferenceFile()
    ref.add("x", "gen", {"a": 1}, [1.0, 2.0])
    ref.dump(tmp_path / "r.json")
    loaded = oracles.load_reference(tmp_path / "r.json")
    assert loaded["x"]["value"] == [1.0, 2.0] and loaded["x"]["inputs"] == {"a": 1}


def test_frozen_reference_has_expected_entries(reference):
    for name in ("delta_n2_alpha2.0", "delta_n3_alpha8.0", "delta_prime_n2_beta0.3",
                 "circle_single_layer_modes", "circle_ntd_l3"):
        assert name in reference
