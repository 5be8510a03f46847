"""Free-space Green kernels of ``-Laplace - lambda`` for ``lambda < 0``.

Two dimensions: ``G(x, y) = K_0(kappa |x - y|) / (2 pi)``.
Three dimensions: ``G(x, y) = exp(-kappa |x - y|) / (4 pi |x - y|)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import specfun


class SingularityError(ValueError):
    """Kernel evaluated at coincident points."""


class SpectralDomainError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralPoint:
    """Negative energy ``lam`` together with its decay rate ``kappa = sqrt(-lam)``."""

    lam: float
    kappa: float

    def __post_init__(self):
        if not (self.lam < 0 and self.kappa > 0):
            raise SpectralDomainError("spectral point must satisfy lam < 0, kappa > 0")

    @classmethod
    def from_lambda(cls, lam: float) -> "SpectralPoint":
        lam = float(lam)
        if not lam < 0:
            raise SpectralDomainError(f"lambda must be negative, got {lam}")
        return cls(lam, math.sqrt(-lam))

    @classmethod
    def from_kappa(cls, kappa: float) -> "SpectralPoint":
        kappa = float(kappa)
        if not kappa > 0:
            raise SpectralDomainError(f"kappa must be positive, got {kappa}")
        return cls(-kappa * kappa, kappa)


def _check_kappa(kappa):
    if not kappa > 0:
        raise SpectralDomainError(f"kappa must be positive, got {kappa}")


def _distance(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(r == 0):
        raise SingularityError(
            "Green kernel evaluated at coincident points; use the singular quadrature"
        )
    return d, r


def green_2d_radial(r, kappa):
    """``K_0(kappa r)/(2 pi)`` for an array of positive distances."""
    _check_kappa(kappa)
    return specfun.k0(kappa * np.asarray(r, dtype=float)) / (2 * np.pi)


def green_2d(x, y, kappa):
    """Two-dimensional kernel; ``x``, ``y`` broadcast over leading axes."""
    _check_kappa(kappa)
    _, r = _distance(x, y)
    return specfun.k0(kappa * r) / (2 * np.pi)


def green_3d(x, y, kappa):
    """Yukawa kernel ``exp(-kappa r)/(4 pi r)``."""
    if not kappa >= 0:
        raise SpectralDomainError("kappa must be non-negative")
    _, r = _distance(x, y)
    return np.exp(-kappa * r) / (4 * np.pi * r)


def green_2d_grad_y(x, y, kappa):
    """Gradient of ``green_2d`` with respect to its second argument.

    With ``r = |x - y|`` the kernel depends on ``y`` through ``r`` only, and
    ``grad_y G = -(kappa/2pi) K_0'(kappa r) (y - x)/r = (kappa/2pi) K_1(kappa r) (x - y)/r``.
    """
    _check_kappa(kappa)
    d, r = _distance(x, y)
    _, k1 = specfun.k0_k1(kappa * r)
    scale = kappa * k1 / (2 * np.pi * r)
    return d * np.asarray(scale)[..., None]


def green_2d_normal_y(x, y, nu_y, kappa):
    """Normal derivative ``d G(x, y) / d nu(y)`` (double-layer kernel)."""
    g = green_2d_grad_y(x, y, kappa)
    return np.sum(g * np.asarray(nu_y, dtype=float), axis=-1)


def green_3d_grad_y(x, y, kappa):
    d, r = _distance(x, y)
    # dG/dr = -exp(-kr)(1 + kr)/(4 pi r^2); grad_y r = (y - x)/r = -d/r
    scale = np.exp(-kappa * r) * (1 + kappa * r) / (4 * np.pi * r**3)
    return d * np.asarray(scale)[..., None]
