"""Closed curves in the plane, spheres in R^3, and periodic quadrature grids.

Curves are described by closed-form 2*pi-periodic parametrizations with
analytic first and second derivatives; the Nystrom assembly needs both.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

CURVE_KINDS = ("circle", "ellipse", "kite")


class InvalidGeometryError(ValueError):
    pass


class OrientationError(InvalidGeometryError):
    pass


@dataclass(frozen=True)
class ClosedCurve:
    """Smooth closed curve ``x(t)``, ``t in [0, 2*pi)``.

    ``kind`` is one of ``circle`` (params: ``R``), ``ellipse`` (``a``, ``b``)
    or ``kite`` (``a``, ``b``, ``c`` with default kite
    ``x(t) = (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)``).  ``reversed``
    traverses the curve clockwise; grids built from it are flipped back to
    counter-clockwise unless ``strict`` orientation is requested.
    """

    kind: str
    params: dict = field(default_factory=dict)
    reversed: bool = False

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise InvalidGeometryError(
                f"unknown curve kind {self.kind!r}; expected one of {CURVE_KINDS}"
            )
        for key, val in self.params.items():
            if not np.isfinite(val):
                raise InvalidGeometryError(f"parameter {key} must be finite")
        if self.kind == "circle" and not self.params.get("R", 0) > 0:
            raise InvalidGeometryError("circle radius R must be positive")
        if self.kind == "ellipse" and not (
            self.params.get("a", 0) > 0 and self.params.get("b", 0) > 0
        ):
            raise InvalidGeometryError("ellipse semi-axes a, b must be positive")

    @classmethod
    def circle(cls, R=1.0):
        return cls("circle", {"R": float(R)})

    @classmethod
    def ellipse(cls, a, b):
        return cls("ellipse", {"a": float(a), "b": float(b)})

    @classmethod
    def kite(cls, a=0.65, b=1.5, c=1.0):
        return cls("kite", {"a": float(a), "b": float(b), "c": float(c)})

    def flipped(self) -> "ClosedCurve":
        return ClosedCurve(self.kind, dict(self.params), not self.reversed)

    def _raw(self, t):
        p = self.params
        if self.kind == "circle":
            R = p["R"]
            x = np.stack([R * np.cos(t), R * np.sin(t)], -1)
            dx = np.stack([-R * np.sin(t), R * np.cos(t)], -1)
            ddx = -x
        elif self.kind == "ellipse":
            a, b = p["a"], p["b"]
            x = np.stack([a * np.cos(t), b * np.sin(t)], -1)
            dx = np.stack([-a * np.sin(t), b * np.cos(t)], -1)
            ddx = -x
        else:
            a, b, c = p.get("a", 0.65), p.get("b", 1.5), p.get("c", 1.0)
            x = np.stack([c * np.cos(t) + a * np.cos(2 * t) - a, b * np.sin(t)], -1)
            dx = np.stack([-c * np.sin(t) - 2 * a * np.sin(2 * t), b * np.cos(t)], -1)
            ddx = np.stack([-c * np.cos(t) - 4 * a * np.cos(2 * t), -b * np.sin(t)], -1)
        return x, dx, ddx

    def evaluate(self, t):
        """Return ``x(t), x'(t), x''(t)`` as arrays of shape ``(..., 2)``."""
        t = np.asarray(t, dtype=float)
        if self.reversed:
            x, dx, ddx = self._raw(-t)
            return x, -dx, ddx
        return self._raw(t)

    def signed_area(self, n=4096) -> float:
        """Shoelace area on a dense sampling; positive for counter-clockwise."""
        t = 2 * np.pi * np.arange(n) / n
        x, _, _ = self.evaluate(t)
        xs, ys = x[:, 0], x[:, 1]
        return 0.5 * float(np.sum(xs * np.roll(ys, -1) - np.roll(xs, -1) * ys))


@dataclass(frozen=True)
class SphereSurface:
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise InvalidGeometryError("sphere radius R must be positive")


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    """Equispaced nodes ``t_j = 2*pi*j/N`` on a closed curve.

    ``weights`` are arc-length trapezoid weights ``2*pi*|x'(t_j)|/N`` and
    ``normals`` point out of the enclosed domain.
    """

    curve: ClosedCurve
    t: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    second: np.ndarray
    speeds: np.ndarray
    normals: np.ndarray
    weights: np.ndarray

    @property
    def N(self) -> int:
        return len(self.t)

    @property
    def perimeter(self) -> float:
        return float(self.weights.sum())

    def curvature(self):
        d, dd = self.tangents, self.second
        return (d[:, 0] * dd[:, 1] - d[:, 1] * dd[:, 0]) / self.speeds**3


def winding_check(curve: ClosedCurve, N: int = 1024, strict: bool = False) -> str:
    """Return ``"CCW"`` or ``"CW"`` from the shoelace signed area.

    With ``strict=True`` a clockwise curve raises :class:`OrientationError`.
    """
    area = curve.signed_area(max(N, 64))
    orient = "CCW" if area > 0 else "CW"
    if orient == "CW" and strict:
        raise OrientationError("curve is traversed clockwise")
    return orient


def build_grid(curve: ClosedCurve, N: int, strict: bool = False) -> BoundaryGrid:
    """Sample ``curve`` at ``N`` equispaced parameter values.

    Clockwise curves are reversed (with a warning) so that every grid is
    counter-clockwise with outward normals; ``strict=True`` makes that an
    error instead.
    """
    if int(N) != N or N < 3:
        raise InvalidGeometryError(f"grid needs an integer N >= 3, got {N!r}")
    N = int(N)
    if winding_check(curve, strict=strict) == "CW":
        logger.warning("clockwise curve %s reversed to counter-clockwise", curve.kind)
        curve = curve.flipped()
    t = 2 * np.pi * np.arange(N) / N
    x, dx, ddx = curve.evaluate(t)
    if curve.kind == "circle":
        # exact nodes for the uniform parametrization
        R = curve.params["R"]
        c, s = _exact_cos_sin(N)
        x = np.stack([R * c, R * s], -1)
        dx = np.stack([-R * s, R * c], -1)
        ddx = -x
    speeds = np.hypot(dx[:, 0], dx[:, 1])
    if np.any(~(speeds > 1e-12 * np.max(speeds, initial=0.0))):
        raise InvalidGeometryError("parametrization is not regular (zero speed sample)")
    normals = np.stack([dx[:, 1], -dx[:, 0]], -1) / speeds[:, None]
    if curve.kind == "circle":
        normals = x / curve.params["R"]
        speeds = np.full(N, curve.params["R"])
    weights = 2 * np.pi * speeds / N
    return BoundaryGrid(curve, t, x, dx, ddx, speeds, normals, weights)


def _exact_cos_sin(N):
    """cos/sin of 2*pi*j/N with the quarter-turn values made exact."""
    j = np.arange(N)
    c = np.cos(2 * np.pi * j / N)
    s = np.sin(2 * np.pi * j / N)
    for frac, cv, sv in ((0, 1.0, 0.0), (1, 0.0, 1.0), (2, -1.0, 0.0), (3, 0.0, -1.0)):
        if (frac * N) % 4 == 0:
            k = frac * N // 4
            c[k], s[k] = cv, sv
    return c, s
