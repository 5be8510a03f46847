"""Weyl-function operators at a negative spectral point.

* ``assemble_single_layer``: Nystrom discretization of the single-layer
  operator on a closed curve with product quadrature for the logarithmic
  singularity (Kress splitting), spectrally accurate on smooth curves.
* ``mode_weyl_circle`` / ``mode_weyl_sphere``: closed-form Fourier /
  spherical-harmonic multipliers of the interior and exterior
  Neumann-to-Dirichlet maps and their two combinations
  ``m_tilde = (1/m_i + 1/m_e)^-1`` and ``m_hat = m_i + m_e``.
* ``weyl_tilde_matrix``: dispatch returning a dense or mode-diagonal handle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import specfun
from .geometry import BoundaryGrid, ClosedCurve, SphereSurface, build_grid

logger = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


class UnsupportedConfigurationError(ConfigurationError):
    pass


def _check_kappa(kappa):
    if not kappa > 0:
        raise specfun.BesselDomainError(f"kappa must be positive, got {kappa}")


def kress_log_weights(N: int) -> np.ndarray:
    """Circulant product-quadrature weights for ``ln(4 sin^2((t - s)/2))``.

    Row ``i`` integrates ``ln(4 sin^2((t_i - s)/2)) f(s)`` over one period
    exactly for trigonometric polynomials ``f`` of degree below ``N/2``.
    """
    if N % 2:
        raise ConfigurationError("N must be even for the logarithmic product quadrature")
    n = N // 2
    t = 2 * np.pi * np.arange(N) / N
    m = np.arange(1, n)
    row = -(2 * np.pi / n) * (np.cos(np.outer(t, m)) / m).sum(1) - (np.pi / n**2) * np.cos(n * t)
    idx = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
    return row[idx]


@dataclass(frozen=True, eq=False)
class BoundaryOperator:
    """Nystrom matrix of a boundary operator.

    ``matrix`` acts on nodal samples and already contains the quadrature
    weights: ``(matrix @ phi)_j`` approximates ``(M phi)(x_j)``.
    ``kernel`` is the symmetric matrix with ``matrix = kernel @ diag(weights)``.
    """

    matrix: np.ndarray
    kernel: np.ndarray
    grid: BoundaryGrid
    kappa: float
    kind: str = "single_layer"

    @property
    def lam(self) -> float:
        return -self.kappa**2

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def weights(self):
        return self.grid.weights

    def symmetric_form(self) -> np.ndarray:
        """``W^{1/2} A W^{-1/2} = W^{1/2} K W^{1/2}``, exactly symmetric."""
        sw = np.sqrt(self.grid.weights)
        S = sw[:, None] * self.kernel * sw[None, :]
        return 0.5 * (S + S.T)

    def apply(self, phi):
        return self.matrix @ phi

    def sym_eigendecompose(self):
        """Eigenpairs of the symmetric form, eigenvalues descending.

        Eigenvectors are returned as nodal densities (columns normalized in
        the weighted inner product).
        """
        vals, vecs = np.linalg.eigh(self.symmetric_form())
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]
        return vals, vecs / np.sqrt(self.grid.weights)[:, None]


def _split_kernel_rows(grid, kappa, rows):
    """Smooth factors ``M1``, ``M2`` of the log-split kernel for the given rows."""
    x = grid.points
    d = x[rows, None, :] - x[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    diag = rows[:, None] == np.arange(grid.N)[None, :]
    r_off = np.where(diag, 1.0, r)
    dt = grid.t[rows, None] - grid.t[None, :]
    logsin = np.log(np.where(diag, 1.0, 4.0 * np.sin(0.5 * dt) ** 2))
    M1 = -specfun.i0(kappa * r_off) / (4 * np.pi)
    M2 = specfun.k0(kappa * r_off) / (2 * np.pi) - M1 * logsin
    M1[diag] = -1.0 / (4 * np.pi)
    M2[diag] = (-specfun.EULER_GAMMA - np.log(0.5 * kappa * grid.speeds[rows])) / (2 * np.pi)
    return M1, M2


def assemble_single_layer(grid: BoundaryGrid, kappa: float) -> BoundaryOperator:
    """Single-layer operator ``int G(x, y) phi(y) dsigma_y`` with Kress quadrature.

    The kernel in parameter form, ``K_0(kappa|x(t) - x(s)|)/(2 pi)``, is split
    as ``M1(t, s) ln(4 sin^2((t - s)/2)) + M2(t, s)`` with
    ``M1 = -I_0(kappa r)/(4 pi)`` and ``M2`` smooth; the log part uses the
    circulant weights of :func:`kress_log_weights` and ``M2`` the trapezoid
    rule.

    Parameters
    ----------
    grid : BoundaryGrid
        Equispaced grid with an even number of nodes.
    kappa : float
        ``sqrt(-lambda) > 0``.
    """
    _check_kappa(kappa)
    N = grid.N
    if N % 2:
        raise ConfigurationError("N must be even for the logarithmic product quadrature")
    if grid.curve.kind == "circle" and not grid.curve.reversed:
        # circulant: entries depend on (i - j) mod N only, build from row 0
        M1, M2 = _split_kernel_rows(grid, kappa, rows=np.array([0]))
        idx = (np.arange(N)[None, :] - np.arange(N)[:, None]) % N
        M1, M2 = M1[0][idx], M2[0][idx]
    else:
        M1, M2 = _split_kernel_rows(grid, kappa, rows=np.arange(N))
    kern = kress_log_weights(N) * M1 + (2 * np.pi / N) * M2
    kern = 0.5 * (kern + kern.T)
    # matrix = kern * speed_j; kernel is rescaled so that matrix = kernel @ W
    kernel = kern * (N / (2 * np.pi))
    matrix = kern * grid.speeds[None, :]
    return BoundaryOperator(matrix, kernel, grid, float(kappa))


@dataclass(frozen=True)
class ModeWeylValues:
    """Mode multipliers of the Weyl functions (units of length).

    ``m_i``, ``m_e`` are the interior / exterior Neumann-to-Dirichlet
    multipliers built from logarithmic derivatives.  ``m_tilde`` (single
    layer) and ``m_hat`` (``M_i + M_e``) are built independently from
    products of Bessel values: on the circle ``m_tilde = R I K`` and
    ``m_hat = -1/(kappa^2 R I' K')``; on the sphere ``m_tilde = kappa R^2 i k``
    and ``m_hat = -1/(kappa^3 R^2 i' k')``.  Fields are arrays when built
    for many orders.
    """

    order: object
    kappa: float
    R: float
    m_i: object
    m_e: object
    m_tilde: object
    m_hat: object
    dim: int = 2

    def residuals(self):
        """Relative residuals of ``m_tilde = (1/m_i + 1/m_e)^-1`` and ``m_hat = m_i + m_e``."""
        tilde = np.abs(self.m_tilde - 1.0 / (1.0 / self.m_i + 1.0 / self.m_e)) / np.abs(self.m_tilde)
        hat = np.abs(self.m_hat - (self.m_i + self.m_e)) / np.abs(self.m_hat)
        return {"weyl_tilde": float(np.max(tilde)), "weyl_hat": float(np.max(hat))}

    def multiplicity(self):
        ls = np.asarray(self.order)
        if self.dim == 2:
            return np.where(ls == 0, 1, 2)
        return 2 * ls + 1


def _mode_values(l, kappa, R, spherical):
    _check_kappa(kappa)
    if not R > 0:
        raise ValueError("radius must be positive")
    x = kappa * R
    if np.ndim(l) == 0:
        logi, logk, di, dk = specfun._log_core(int(l), np.array([x]), spherical)
        logi, logk, di, dk = logi[0], logk[0], di[0], dk[0]
        order = int(l)
    else:
        ls = np.asarray(l, dtype=int)
        logi, logk, di, dk = specfun.log_bessel_table(int(ls.max()), x, spherical)
        logi, logk, di, dk = logi[ls], logk[ls], di[ls], dk[ls]
        order = ls
    # I'/I and K'/K are logarithmic derivatives in x; d/dr = kappa d/dx
    m_i = 1.0 / (kappa * di)
    m_e = -1.0 / (kappa * dk)
    prod = np.exp(logi + logk)
    if spherical:
        m_tilde = kappa * R * R * prod
        m_hat = -1.0 / (kappa**3 * R * R * prod * di * dk)
    else:
        m_tilde = R * prod
        m_hat = -1.0 / (kappa**2 * R * prod * di * dk)
    return ModeWeylValues(order, float(kappa), float(R), m_i, m_e, m_tilde, m_hat,
                          3 if spherical else 2)


def mode_weyl_circle(l, kappa: float, R: float) -> ModeWeylValues:
    """Fourier multipliers on the circle of radius ``R``.

    ``m_i = I_l(kR)/(k I_l'(kR))``, ``m_e = -K_l(kR)/(k K_l'(kR))``; the
    Wronskian turns ``m_tilde`` into ``R I_l(kR) K_l(kR)``.  ``l`` may be an
    integer or an array of orders.  All values stay finite for any order
    because only logarithmic derivatives enter.
    """
    return _mode_values(l, kappa, R, spherical=False)


def mode_weyl_sphere(l, kappa: float, R: float) -> ModeWeylValues:
    """Spherical-harmonic multipliers on the sphere of radius ``R``
    (``m_tilde = kappa R^2 i_l k_l``)."""
    return _mode_values(l, kappa, R, spherical=True)


@dataclass(frozen=True, eq=False)
class ModeDiagonalOperator:
    """Weyl function in a separable basis: one multiplier per angular order.

    ``apply`` acts on coefficient vectors indexed like ``expanded_orders``
    (each order repeated by its multiplicity).
    """

    values: ModeWeylValues
    which: str = "tilde"

    @property
    def orders(self):
        return np.asarray(self.values.order)

    @property
    def diagonal(self):
        return np.asarray(self.values.m_tilde if self.which == "tilde" else self.values.m_hat)

    @property
    def multiplicities(self):
        return self.values.multiplicity()

    @property
    def expanded_orders(self):
        return np.repeat(self.orders, self.multiplicities)

    def apply(self, coeffs):
        diag = np.repeat(self.diagonal, self.multiplicities)
        coeffs = np.asarray(coeffs)
        return diag.reshape((-1,) + (1,) * (coeffs.ndim - 1)) * coeffs

    def sym_eigendecompose(self):
        """Mode values with their orders, descending; eigenvectors are unit modes."""
        diag = np.repeat(self.diagonal, self.multiplicities)
        order = np.argsort(diag, kind="stable")[::-1]
        return diag[order], self.expanded_orders[order]


def weyl_tilde_matrix(geometry, lam: float, kind: str = "delta", N: int = 256,
                      l_max: int = 64, backend: str | None = None):
    """Operator handle for the Weyl function relevant to ``kind`` at ``lam``.

    Curves default to the Nystrom backend (``backend="modes"`` is allowed on
    circles); spheres always use modes.  ``kind="delta_prime"`` needs a
    separable geometry and returns the ``m_hat`` multipliers.
    """
    if not lam < 0:
        raise specfun.BesselDomainError("spectral parameter must be negative")
    kappa = float(np.sqrt(-lam))
    if kind not in ("delta", "delta_prime"):
        raise ConfigurationError(f"unknown interaction kind {kind!r}")
    ls = np.arange(int(l_max) + 1)
    if isinstance(geometry, SphereSurface):
        return ModeDiagonalOperator(mode_weyl_sphere(ls, kappa, geometry.R),
                                    "tilde" if kind == "delta" else "hat")
    if isinstance(geometry, BoundaryGrid):
        curve, grid = geometry.curve, geometry
    elif isinstance(geometry, ClosedCurve):
        curve, grid = geometry, None
    else:
        raise ConfigurationError(f"unsupported geometry {type(geometry).__name__}")
    if kind == "delta_prime" or backend == "modes":
        if curve.kind != "circle":
            raise UnsupportedConfigurationError(
                f"{kind} on a {curve.kind} curve needs a separable (circle/sphere) backend"
            )
        return ModeDiagonalOperator(mode_weyl_circle(ls, kappa, curve.params["R"]),
                                    "tilde" if kind == "delta" else "hat")
    if grid is None:
        grid = build_grid(curve, N)
    return assemble_single_layer(grid, kappa)


def fourier_mode_eigenvalues(op: BoundaryOperator, l_max: int) -> np.ndarray:
    """Rayleigh quotients of ``op`` on ``exp(i l t)`` for ``l = 0..l_max``.

    On the circle these are exactly the discrete eigenvalues per order.
    """
    t = op.grid.t
    out = np.empty(l_max + 1)
    for l in range(l_max + 1):
        e = np.exp(1j * l * t)
        out[l] = (np.conj(e) @ op.matrix @ e).real / op.N
    return out
