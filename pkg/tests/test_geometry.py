import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leakyspec.geometry import (
    ClosedCurve,
    InvalidGeometryError,
    OrientationError,
    SphereSurface,
    build_grid,
    winding_check,
)

CURVES = [ClosedCurve.circle(1.3), ClosedCurve.ellipse(2.0, 1.0), ClosedCurve.kite()]


def test_circle_quarter_nodes_exact():
    g = build_grid(ClosedCurve.circle(1.0), 4)
    assert np.array_equal(g.points, [[1, 0], [0, 1], [-1, 0], [0, -1]])


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 600), st.floats(0.1, 10.0))
def test_circle_weights_sum_to_perimeter(N, R):
    g = build_grid(ClosedCurve.circle(R), N)
    assert abs(g.weights.sum() - 2 * np.pi * R) < 1e-13 * max(1.0, R)
    assert np.all(g.weights > 0)


def test_ellipse_perimeter_against_quadrature_oracle(reference):
    g = build_grid(ClosedCurve.ellipse(2.0, 1.0), 512)
    assert abs(g.weights.sum() - reference["ellipse_perimeter(2,1)"]["value"]) < 1e-10


@pytest.mark.parametrize("curve", CURVES, ids=lambda c: c.kind)
def test_closed_and_normals(curve):
    x0, _, _ = curve.evaluate(0.0)
    x1, _, _ = curve.evaluate(2 * np.pi)
    assert np.linalg.norm(x0 - x1) < 1e-14
    g = build_grid(curve, 257)
    assert np.max(np.abs(np.linalg.norm(g.normals, axis=1) - 1)) < 1e-13
    assert np.max(np.abs(np.sum(g.normals * g.tangents, axis=1)) / g.speeds) < 1e-13


@pytest.mark.parametrize("curve", CURVES[:2], ids=lambda c: c.kind)
def test_normals_point_outward_on_convex_curves(curve):
    g = build_grid(curve, 64)
    centroid = g.points.mean(axis=0)
    assert np.all(np.sum(g.normals * (g.points - centroid), axis=1) > 0)


@pytest.mark.parametrize("curve", CURVES, ids=lambda c: c.kind)
def test_perimeter_quadrature_converges_superalgebraically(curve):
    exact = build_grid(curve, 4096).weights.sum()
    errs = [abs(build_grid(curve, N).weights.sum() - exact) for N in (32, 64, 128)]
    for e0, e1 in zip(errs[:-1], errs[1:]):
        if e0 > 1e-13:
            assert e1 / e0 < 1e-2


def test_winding():
    assert winding_check(ClosedCurve.circle(1.0)) == "CCW"
    assert winding_check(ClosedCurve.circle(1.0).flipped()) == "CW"
    assert winding_check(ClosedCurve.kite()) == "CCW"
    assert ClosedCurve.kite().signed_area() > 0
    with pytest.raises(OrientationError):
        winding_check(ClosedCurve.circle(1.0).flipped(), strict=True)


def test_clockwise_curve_is_reversed_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        g = build_grid(ClosedCurve.ellipse(2.0, 1.0).flipped(), 32)
    assert "reversed" in caplog.text
    ref = build_grid(ClosedCurve.ellipse(2.0, 1.0), 32)
    assert np.allclose(g.points, ref.points, atol=1e-14)
    assert np.allclose(g.normals, ref.normals, atol=1e-14)
    with pytest.raises(OrientationError):
        build_grid(ClosedCurve.circle(1.0).flipped(), 16, strict=True)


def test_invalid_geometry():
    with pytest.raises(InvalidGeometryError):
        ClosedCurve.circle(0.0)
    with pytest.raises(InvalidGeometryError):
        ClosedCurve.ellipse(1.0, -1.0)
    with pytest.raises(InvalidGeometryError):
        ClosedCurve("square", {})
    with pytest.raises(InvalidGeometryError):
        SphereSurface(-1.0)
    with pytest.raises(InvalidGeometryError):
        build_grid(ClosedCurve.circle(1.0), 2)
    # kite with c = 0 and a = 0 has x' = (0, b cos t): zero speed at t = pi/2
    with pytest.raises(InvalidGeometryError, match="regular"):
        build_grid(ClosedCurve.kite(a=0.0, b=1.0, c=0.0), 4)


def test_curvature_of_circle():
    g = build_grid(ClosedCurve.circle(2.0), 32)
    assert np.allclose(g.curvature(), 0.5, rtol=1e-14)
