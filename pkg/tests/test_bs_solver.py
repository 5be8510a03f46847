import numpy as np
import pytest

from leakyspec.boundary_ops import ConfigurationError, UnsupportedConfigurationError
from leakyspec.bs_solver import (
    BracketError,
    InteractionSpec,
    bs_eigenvalues,
    chord_arc_constant,
    count_bound_states,
    find_bound_states,
    high_frequency_fraction,
    smallest_bs_gap,
)
from leakyspec.geometry import ClosedCurve, SphereSurface, build_grid

CIRCLE = ClosedCurve.circle(1.0)


def reference_levels(entry, n):
    """(lam, multiplicity) pairs from per-order kappa roots, sorted by energy."""
    out = []
    for l, ks in entry["value"].items():
        mult = 1 if int(l) == 0 else (2 if n == 2 else 2 * int(l) + 1)
        out += [(-k * k, mult) for k in ks]
    return sorted(out)


@pytest.mark.parametrize("backend", ["modes", None])
def test_circle_delta_matches_shooting(reference, backend):
    states = find_bound_states(InteractionSpec.delta(8.0), CIRCLE, N=128, backend=backend)
    ref = reference_levels(reference["delta_n2_alpha8.0"], 2)
    assert [s.multiplicity for s in states] == [m for _, m in ref]
    assert np.max(np.abs(np.array([s.lam for s in states]) - [l for l, _ in ref])) < 1e-6


def test_sphere_delta_matches_shooting(reference):
    states = find_bound_states(InteractionSpec.delta(2.0), SphereSurface(1.0))
    ref = reference_levels(reference["delta_n3_alpha2.0"], 3)
    assert [(s.multiplicity) for s in states] == [m for _, m in ref]
    assert np.max(np.abs(np.array([s.lam for s in states]) - [l for l, _ in ref])) < 1e-6


def test_delta_prime_matches_shooting(reference):
    states = find_bound_states(InteractionSpec.delta_prime(1.0), CIRCLE, l_max=64)
    ref = reference_levels(reference["delta_prime_n2_beta1.0"], 2)
    assert [s.multiplicity for s in states] == [m for _, m in ref]
    assert np.max(np.abs(np.array([s.lam for s in states]) - [l for l, _ in ref])) < 1e-6


def test_zero_coupling_has_no_bound_states():
    assert find_bound_states(InteractionSpec.delta(0.0), CIRCLE, N=32) == []
    assert count_bound_states(InteractionSpec.delta(0.0), CIRCLE, N=32).count == 0
    assert find_bound_states(InteractionSpec.delta(np.zeros(32)), CIRCLE, N=32) == []


def test_repulsive_coupling_has_no_bound_states():
    assert find_bound_states(InteractionSpec.delta(-3.0), ClosedCurve.ellipse(2.0, 1.0), N=64) == []


def test_sampled_constant_strength_matches_constant():
    a = find_bound_states(InteractionSpec.delta(4.0), ClosedCurve.ellipse(1.5, 1.0), N=64)
    b = find_bound_states(InteractionSpec.delta(np.full(64, 4.0)), ClosedCurve.ellipse(1.5, 1.0), N=64)
    assert len(a) == len(b) > 0
    assert np.allclose([s.lam for s in a], [s.lam for s in b], rtol=1e-12)


def test_ground_state_monotone_in_coupling():
    curve = ClosedCurve.kite()
    lams = [find_bound_states(InteractionSpec.delta(a), curve, N=64)[0].lam for a in (2.0, 3.0, 5.0)]
    assert lams[0] > lams[1] > lams[2]


def test_count_matches_found_states():
    spec = InteractionSpec.delta(6.0)
    curve = ClosedCurve.ellipse(1.5, 1.0)
    states = find_bound_states(spec, curve, N=96)
    assert count_bound_states(spec, curve, N=96).count == sum(s.multiplicity for s in states)


def test_eigendensity_is_kernel_vector():
    spec = InteractionSpec.delta(5.0)
    curve = ClosedCurve.ellipse(1.5, 1.0)
    st = find_bound_states(spec, curve, N=64)[0]
    assert st.residual < 1e-8
    assert high_frequency_fraction(st.eigendensities) < 1e-3


def test_gap_changes_sign_at_each_level():
    spec = InteractionSpec.delta(8.0)
    for st in find_bound_states(spec, CIRCLE, backend="modes"):
        lo = smallest_bs_gap(st.lam * (1 + 1e-4), spec, CIRCLE, backend="modes")
        hi = smallest_bs_gap(st.lam * (1 - 1e-4), spec, CIRCLE, backend="modes")
        assert lo * hi < 0


def test_bs_spectrum_layouts():
    sp = bs_eigenvalues(-1.0, InteractionSpec.delta(2.0), SphereSurface(1.0), l_max=4)
    assert list(sp.multiplicities) == [1, 3, 5, 7, 9] and sp.expanded().size == 25
    dense = bs_eigenvalues(-1.0, InteractionSpec.delta(2.0), CIRCLE, N=64)
    modes = bs_eigenvalues(-1.0, InteractionSpec.delta(2.0), CIRCLE, backend="modes", l_max=31)
    assert np.allclose(dense.expanded()[:20], modes.expanded()[:20], atol=1e-12)


def test_delta_prime_count_stable_under_refinement():
    spec = InteractionSpec.delta_prime(0.3)
    c1 = count_bound_states(spec, CIRCLE, l_max=64)
    c2 = count_bound_states(spec, CIRCLE, l_max=128)
    assert c1.count == c2.count > 0
    n1 = len(find_bound_states(spec, CIRCLE, per_decade=64))
    n2 = len(find_bound_states(spec, CIRCLE, per_decade=128))
    assert n1 == n2


def test_chord_arc_constant():
    assert chord_arc_constant(build_grid(CIRCLE, 64)) == pytest.approx(2 / np.pi, rel=1e-3)


def test_errors():
    with pytest.raises(BracketError):
        find_bound_states(InteractionSpec.delta(2.0), CIRCLE, bracket=(-1.0, 0.0), N=16)
    with pytest.raises(BracketError):
        find_bound_states(InteractionSpec.delta(2.0), CIRCLE, bracket=(-1.0, -2.0), N=16)
    with pytest.raises(BracketError):
        bs_eigenvalues(0.5, InteractionSpec.delta(2.0), CIRCLE, N=16)
    with pytest.raises(ConfigurationError):
        InteractionSpec("delta_double", 1.0)
    with pytest.raises(ConfigurationError):
        InteractionSpec.delta_prime(0.0)
    with pytest.raises(ConfigurationError):
        InteractionSpec.delta(np.inf)
    with pytest.raises(UnsupportedConfigurationError):
        InteractionSpec("delta_prime", [1.0, 2.0])
    with pytest.raises(UnsupportedConfigurationError):
        find_bound_states(InteractionSpec.delta_prime(1.0), ClosedCurve.kite())
