"""Krein resolvent differences on finite volume sections and their singular values.

Volume discretization: uniform midpoint cells on a box ``[-L, L]^2``.  The
free resolvent kernel is ``K_0(kappa r)/(2 pi)`` off the diagonal.  The
diagonal weight makes the punctured lattice sum consistent with the log
singularity (error ``O(h^4 log h)``); the equal-area-disc cell integral is
available as the lower-order alternative.
Perturbed resolvents are never formed beyond what the factorized Krein form
needs: every difference is ``B C B^T v`` with ``B`` tall and thin.

Mode-basis routines compute the same differences on the circle exactly,
one angular order at a time, with closed-form radial norms.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gamma

from . import specfun
from .boundary_ops import (
    UnsupportedConfigurationError,
    assemble_single_layer,
    mode_weyl_circle,
)
from .bs_solver import InteractionSpec
from .geometry import BoundaryGrid, ClosedCurve, build_grid

logger = logging.getLogger(__name__)

NOISE_FACTOR = 1e3
COND_LIMIT = 1e12
DENSE_LIMIT = 4096


class AssemblyError(ValueError):
    pass


class NearEigenvalueError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# volume grid


@dataclass(frozen=True, eq=False)
class VolumeGrid:
    """Cell centers of a uniform ``m x m`` grid on ``[-L, L]^2``.

    With ``tube`` set, cells closer than ``tube`` to the boundary nodes are
    dropped (the grid then loses its FFT structure).
    """

    L: float
    m: int
    points: np.ndarray
    mask: np.ndarray | None = None
    tube: float | None = None

    @property
    def h(self) -> float:
        return 2 * self.L / self.m

    @property
    def v(self) -> float:
        return self.h**2

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, self.v)

    @property
    def is_full(self) -> bool:
        return self.mask is None

    @classmethod
    def box(cls, L, m, tube=None, boundary: BoundaryGrid | None = None):
        if not (L > 0 and int(m) == m and m >= 2):
            raise ValueError("box needs L > 0 and an integer m >= 2")
        m = int(m)
        h = 2 * L / m
        c = -L + h * (np.arange(m) + 0.5)
        X, Y = np.meshgrid(c, c, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        if tube is None:
            return cls(float(L), m, pts)
        if boundary is None:
            raise ValueError("an exclusion tube needs the boundary grid")
        keep = _min_distance(pts, boundary.points) >= tube
        return cls(float(L), m, pts[keep], keep, float(tube))

    @classmethod
    def for_decay(cls, kappa, curve: ClosedCurve, m, tol=1e-8, tube=None, boundary=None):
        """Box whose edge lies where ``exp(-kappa dist(x, curve)) < tol``."""
        t = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
        x, _, _ = curve.evaluate(t)
        extent = float(np.max(np.abs(x)))
        return cls.box(extent + np.log(1.0 / tol) / kappa, m, tube, boundary)


def _min_distance(pts, nodes, chunk=4096):
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        d = pts[s:s + chunk, None, :] - nodes[None, :, :]
        out[s:s + chunk] = np.sqrt((d * d).sum(-1)).min(axis=1)
    return out


@dataclass
class SingularValueProfile:
    """Singular values with a log-log least-squares fit over ``[k_lo, k_hi]``."""

    values: np.ndarray
    k_lo: int
    k_hi: int
    slope: float | None
    intercept: float | None
    tag: str = ""
    expected: float | None = None
    flagged: bool = False
    fit_indices: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "fit_range": [self.k_lo, self.k_hi],
                "expected": self.expected, "flagged": self.flagged,
                "fit_points": int(len(self.fit_indices))}


def fit_profile(s, fit_range, tag="", expected=None) -> SingularValueProfile:
    """Fit ``log s_k = slope log k + b`` over the range, ignoring noise-level values."""
    s = np.sort(np.abs(np.asarray(s, dtype=float)))[::-1]
    k_lo, k_hi = (int(v) for v in fit_range)
    k = np.arange(1, len(s) + 1)
    floor = NOISE_FACTOR * np.finfo(float).eps * (s[0] if len(s) else 0.0)
    sel = (k >= k_lo) & (k <= k_hi) & (s > floor)
    if sel.sum() < 3:
        logger.warning("profile %s: fewer than 3 points above the noise floor in [%d, %d]",
                       tag, k_lo, k_hi)
        return SingularValueProfile(s, k_lo, k_hi, None, None, tag, expected, True, k[sel])
    slope, icpt = np.polyfit(np.log(k[sel]), np.log(s[sel]), 1)
    return SingularValueProfile(s, k_lo, k_hi, float(slope), float(icpt), tag, expected,
                                bool(sel.sum() < k_hi - k_lo + 1), k[sel])


def expected_slope(kind, l, n=2, versus="free"):
    """Decay exponent of the l-th power resolvent difference: ``-1/p`` for ``S_{p,inf}``."""
    if kind == "delta" or versus == "neumann":
        return -(2 * l + 1) / (n - 1)
    return -(2 * l) / (n - 1)


# ---------------------------------------------------------------------------
# kernels on the volume grid


def _kappa_of(lam):
    if not lam < 0:
        raise ValueError("spectral parameter must be negative")
    return float(np.sqrt(-lam))


def _boundary_grid(geometry, N):
    if isinstance(geometry, BoundaryGrid):
        return geometry
    if isinstance(geometry, ClosedCurve):
        return build_grid(geometry, N)
    raise UnsupportedConfigurationError("volume Krein assembly needs a planar curve")


def gamma_matrix(lam, volume: VolumeGrid, boundary: BoundaryGrid) -> np.ndarray:
    """``Gamma[q, j] = G(x_q, y_j) w_j``: the single-layer potential sampled on the volume."""
    kappa = _kappa_of(lam)
    d = volume.points[:, None, :] - boundary.points[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    if r.min() < 1e-8:
        q = int(np.argmin(r.min(axis=1)))
        raise AssemblyError(
            f"volume point {volume.points[q]} lies within 1e-8 of a boundary node; "
            "shift the grid or enlarge the exclusion tube"
        )
    return specfun.k0(kappa * r) / (2 * np.pi) * boundary.weights[None, :]


# zeta-regularized sum over the punctured square lattice of log|j|:
# 0.5 ln(2 pi) + beta'(0) = ln(Gamma(1/4)^2 / (2 sqrt(pi)))
LATTICE_LOG_CONSTANT = float(np.log(gamma(0.25) ** 2 / (2 * np.sqrt(np.pi))))


def _disc_self_integral(kappa, h):
    """Integral of ``K_0(kappa r)/(2 pi)`` over the disc with the cell's area."""
    rho = h / np.sqrt(np.pi)
    _, k1 = specfun.k0_k1(np.array([kappa * rho]))
    return float((1.0 - kappa * rho * k1[0]) / kappa**2)


def _lattice_self_weight(kappa, h):
    """Self weight for which the punctured midpoint sum integrates ``K_0`` times
    smooth data to ``O(h^4 log h)``.

    ``K_0(kappa r) = -log r + log(2/kappa) - gamma + O(r^2 log r)``; the constant
    part needs the cell area, the log part the lattice correction
    ``-h^2 (log h - LATTICE_LOG_CONSTANT)``.
    """
    return float(h * h / (2 * np.pi)
                 * (np.log(2.0 / (kappa * h)) - np.euler_gamma + LATTICE_LOG_CONSTANT))


def _cell_self_integral(kappa, h, self_term="lattice"):
    if self_term == "lattice":
        return _lattice_self_weight(kappa, h)
    if self_term == "disc":
        return _disc_self_integral(kappa, h)
    raise ValueError("self_term must be 'lattice' or 'disc'")


def _offset_kernel(kappa, volume: VolumeGrid, self_term="lattice"):
    """Kernel times cell area on all lattice offsets ``(-(m-1)..m-1)^2``."""
    m, h = volume.m, volume.h
    off = h * np.arange(-(m - 1), m)
    DX, DY = np.meshgrid(off, off, indexing="ij")
    r = np.hypot(DX, DY)
    r[m - 1, m - 1] = 1.0
    ker = specfun.k0(kappa * r) / (2 * np.pi) * volume.v
    ker[m - 1, m - 1] = _cell_self_integral(kappa, h, self_term)
    return ker


def _lattice_index(volume: VolumeGrid):
    idx = np.rint((volume.points + volume.L) / volume.h - 0.5).astype(np.int64)
    return idx[:, 0], idx[:, 1]


def free_resolvent_matrix(lam, volume: VolumeGrid, self_term="lattice") -> np.ndarray:
    """Dense ``(A_free - lam)^{-1}`` on samples: ``G(x_q, x_r) v`` off the diagonal.

    Distances on the lattice depend only on index offsets, so the kernel is
    tabulated once on ``(2m - 1)^2`` offsets and gathered.
    """
    kappa = _kappa_of(lam)
    ker = _offset_kernel(kappa, volume, self_term)
    ix, iy = _lattice_index(volume)
    m = volume.m
    out = np.empty((volume.n, volume.n))
    for s in range(0, volume.n, 512):
        out[s:s + 512] = ker[ix[s:s + 512, None] - ix[None, :] + m - 1,
                             iy[s:s + 512, None] - iy[None, :] + m - 1]
    return out


class FreeResolvent:
    """Matrix-free free resolvent on a full box grid (FFT convolution)."""

    def __init__(self, lam, volume: VolumeGrid, self_term="lattice"):
        if not volume.is_full:
            raise ValueError("FFT application needs the full box grid")
        self.kappa = _kappa_of(lam)
        self.volume = volume
        self.kernel = _offset_kernel(self.kappa, volume, self_term)

    def __matmul__(self, F):
        F = np.asarray(F, dtype=float)
        m = self.volume.m
        cols = F.reshape(m, m, -1)
        out = fftconvolve(cols, self.kernel[:, :, None], mode="same", axes=(0, 1))
        return out.reshape(F.shape)


def _free_operator(lam, volume, dense=None):
    if dense is None:
        dense = not volume.is_full or volume.n <= DENSE_LIMIT // 2
    return free_resolvent_matrix(lam, volume) if dense else FreeResolvent(lam, volume)


# ---------------------------------------------------------------------------
# Krein differences


@dataclass(frozen=True, eq=False)
class FactoredOperator:
    """``X = B C B^T v`` acting on volume samples (``v`` the uniform cell area)."""

    B: np.ndarray
    C: np.ndarray
    v: float
    tag: str = ""

    def dense(self):
        return self.B @ self.C @ self.B.T * self.v

    def singular_values(self):
        """Singular values of the operator on L^2: via QR of ``sqrt(v) B``."""
        _, Rr = np.linalg.qr(np.sqrt(self.v) * self.B)
        return np.linalg.svd(Rr @ self.C @ Rr.T, compute_uv=False)

    @property
    def rank_bound(self):
        return self.C.shape[0]


def middle_factor(lam, spec: InteractionSpec, boundary: BoundaryGrid):
    """``(I - alpha A)^{-1} alpha W^{-1}`` for the delta interaction (symmetric)."""
    kappa = _kappa_of(lam)
    op = assemble_single_layer(boundary, kappa)
    alpha = np.broadcast_to(np.asarray(spec.strength, dtype=float), (boundary.N,))
    M = np.eye(boundary.N) - alpha[:, None] * op.matrix
    cond = np.linalg.cond(M)
    logger.debug("condition number of I - alpha M at lambda=%g: %.3g", lam, cond)
    if cond > COND_LIMIT:
        raise NearEigenvalueError(
            f"I - alpha M(lambda) is nearly singular at lambda={lam:.10g} (cond {cond:.3g}); "
            "lambda is within solver resolution of a bound state"
        )
    mid = np.linalg.solve(M, np.diag(alpha / boundary.weights))
    return 0.5 * (mid + mid.T)


def krein_factors(lam, spec: InteractionSpec, geometry, volume: VolumeGrid, N=256):
    """``(Gamma, Mid)`` with ``D = Gamma Mid Gamma^T v``."""
    if spec.kind != "delta":
        raise UnsupportedConfigurationError("volume Krein assembly is implemented for delta only")
    grid = _boundary_grid(geometry, N)
    G = gamma_matrix(lam, volume, grid)
    if spec.is_zero:
        return G, np.zeros((grid.N, grid.N))
    return G, middle_factor(lam, spec, grid)


def krein_difference(lam, spec: InteractionSpec, geometry, volume: VolumeGrid, N=256,
                     l_max=64):
    """Dense ``(A_pert - lam)^{-1} - (A_free - lam)^{-1}`` on volume samples.

    delta: ``Gamma (I - alpha M)^{-1} alpha Gamma^*`` with the Nystrom single
    layer.  delta-prime (circle only): the mode-basis sum
    ``sum_l c_l g_l(r) g_l(r') cos(l(theta - theta'))/(2 pi)`` with
    ``c_l = 1/(beta - m_hat_l) + 1/m_hat_l``.
    """
    if spec.kind == "delta_prime":
        curve = geometry.curve if isinstance(geometry, BoundaryGrid) else geometry
        if not (isinstance(curve, ClosedCurve) and curve.kind == "circle"):
            raise UnsupportedConfigurationError("delta-prime differences need the circle mode basis")
        return _delta_prime_volume(lam, float(spec.strength), curve.params["R"], volume, l_max)
    G, mid = krein_factors(lam, spec, geometry, volume, N)
    D = G @ mid @ G.T * volume.v
    return 0.5 * (D + D.T)


def _delta_prime_coefficient(beta, m_hat, versus):
    # 1/(beta - m) + 1/m = beta/(m (beta - m)), written without cancellation
    if versus == "free":
        return beta / (m_hat * (beta - m_hat))
    if versus == "neumann":
        return 1.0 / (beta - m_hat)
    raise ValueError("versus must be 'free' or 'neumann'")


def _delta_prime_volume(lam, beta, R, volume, l_max, versus="free"):
    kappa = _kappa_of(lam)
    x, y = volume.points[:, 0], volume.points[:, 1]
    r = np.hypot(x, y)
    th = np.arctan2(y, x)
    if np.any(np.abs(r - R) < 1e-8):
        raise AssemblyError("volume point on the interface circle")
    D = np.zeros((volume.n, volume.n))
    mv = mode_weyl_circle(np.arange(l_max + 1), kappa, R)
    for l in range(l_max + 1):
        c = _delta_prime_coefficient(beta, mv.m_hat[l], versus)
        g = gamma_hat_radial(l, kappa, R, r)
        w = 1.0 if l == 0 else 2.0
        D += (w * c / (2 * np.pi)) * np.outer(g, g) * np.cos(l * (th[:, None] - th[None, :]))
    return D * volume.v


def power_difference(l, lam, spec: InteractionSpec, geometry, volume: VolumeGrid, N=256,
                     factored=False, free=None):
    """``(A_pert - lam)^{-l} - (A_free - lam)^{-l}`` in the factorized Krein form.

    With ``P_i = R^i Gamma`` (``R`` the free resolvent) the difference lies in
    the span of ``P_0..P_{l-1}``; multiplying ``R_pert = R + P_0 Mid P_0^T v``
    in one factor at a time only updates the coefficient blocks, using
    ``P_j^T v R = P_{j+1}^T v`` and the Gram blocks ``P_j^T v P_0``.
    """
    if not 1 <= int(l) <= 6:
        raise ValueError("power l must be between 1 and 6")
    l = int(l)
    G, mid = krein_factors(lam, spec, geometry, volume, N)
    n_b = G.shape[1]
    v = volume.v
    if free is None:
        free = _free_operator(lam, volume) if l > 1 else None
    P = [G]
    for _ in range(1, l):
        P.append(free @ P[-1])
    gram0 = [Pj.T @ P[0] * v for Pj in P]

    C = np.zeros((l * n_b, l * n_b))
    C[:n_b, :n_b] = mid

    def blk(i, j):
        return slice(i * n_b, (i + 1) * n_b), slice(j * n_b, (j + 1) * n_b)

    for a in range(1, l):
        new = np.zeros_like(C)
        new[blk(a, 0)] += mid
        for i in range(a):
            for j in range(a):
                Cij = C[blk(i, j)]
                if not Cij.any():
                    continue
                new[blk(i, j + 1)] += Cij
                new[blk(i, 0)] += Cij @ gram0[j] @ mid
        C = new
    B = np.hstack(P)
    op = FactoredOperator(B, 0.5 * (C + C.T) if l == 1 else C, v, f"delta_l{l}")
    return op if factored else op.dense()


def singular_profile(matrix, weights, fit_range, tag="", expected=None) -> SingularValueProfile:
    """Singular values of an operator given by its matrix on samples.

    For ``matrix = K V`` (kernel ``K``, weights ``V``) these are the singular
    values of ``V^{1/2} K V^{1/2}``.
    """
    if isinstance(matrix, FactoredOperator):
        s = matrix.singular_values()
    else:
        sw = np.sqrt(np.asarray(weights, dtype=float))
        A = np.asarray(matrix)
        if A.shape[0] != A.shape[1]:
            raise ValueError("singular_profile needs a square matrix")
        s = np.linalg.svd(sw[:, None] * A / sw[None, :], compute_uv=False)
    return fit_profile(s, fit_range, tag, expected)


def pseudo_resolvent_check(lam, mu, spec: InteractionSpec, geometry, volume: VolumeGrid, N=256):
    """``||R(lam) - R(mu) - (lam - mu) R(lam) R(mu)||_F / ||R(lam)||_F`` for ``R = R_free + D``."""
    if lam == mu:
        return 0.0
    Rl = free_resolvent_matrix(lam, volume)
    Rm = free_resolvent_matrix(mu, volume)
    if not spec.is_zero:
        Rl += krein_difference(lam, spec, geometry, volume, N)
        Rm += krein_difference(mu, spec, geometry, volume, N)
    E = Rl - Rm - (lam - mu) * (Rl @ Rm)
    return float(np.linalg.norm(E) / np.linalg.norm(Rl))


# ---------------------------------------------------------------------------
# circle mode basis


def _ratio_tables(l_max, x):
    """``I_l, K_l`` logs and the ratios needed for closed-form radial norms."""
    logi, logk, di, dk = specfun.log_bessel_table(l_max + 1, x)
    r = np.exp(logi[1:] - logi[:-1])  # I_{l+1}/I_l
    q = np.exp(logk[1:] - logk[:-1])  # K_{l+1}/K_l
    return logi[:-1], logk[:-1], di[:-1], dk[:-1], r, q


def radial_norms(l_max, kappa, R):
    """``int_0^R I_l(kr)^2 r dr / I_l(kR)^2`` and ``int_R^inf K_l(kr)^2 r dr / K_l(kR)^2``.

    Closed forms ``(R^2/2)(1 - I_{l-1}I_{l+1}/I_l^2)`` and
    ``(R^2/2)(K_{l-1}K_{l+1}/K_l^2 - 1)`` written with neighbouring ratios,
    with ``I_{-1} = I_1`` and ``K_{-1} = K_1``.
    """
    x = kappa * R
    _, _, _, _, r, q = _ratio_tables(l_max, x)
    r_prev = np.concatenate([[1.0 / r[0]], r[:-1]])  # I_l / I_{l-1}
    q_prev = np.concatenate([[1.0 / q[0]], q[:-1]])  # K_l / K_{l-1}
    n_in = 0.5 * R * R * (1.0 - r / r_prev)
    n_out = 0.5 * R * R * (q / q_prev - 1.0)
    return n_in, n_out


def gamma_hat_radial(l, kappa, R, r):
    """Radial profile of the delta-prime layer potential of the unit mode ``l``.

    Inside ``-I_l(kr)/(k I_l'(kR))``, outside ``-K_l(kr)/(k K_l'(kR))``, both
    divided by ``sqrt(R)`` so that the boundary mode is L^2-normalized.
    """
    r = np.asarray(r, dtype=float)
    x = kappa * R
    li_R, lk_R, di_R, dk_R = (float(v[0]) for v in specfun._log_core(l, np.array([x]), False))
    out = np.empty_like(r)
    inside = r < R
    if inside.any():
        li, _, _, _ = specfun._log_core(l, np.maximum(kappa * r[inside], 1e-12), False)
        out[inside] = -np.exp(li - li_R) / (kappa * di_R)
    if (~inside).any():
        _, lk, _, _ = specfun._log_core(l, kappa * r[~inside], False)
        out[~inside] = -np.exp(lk - lk_R) / (kappa * dk_R)
    return out / np.sqrt(R)


def mode_singular_values(spec: InteractionSpec, lam, R=1.0, l_max=128, versus="free"):
    """Singular values of the l=1 difference on the circle, one rank-one block per mode.

    delta: ``|alpha/(1 - alpha m_tilde)| * ||g_l||^2`` with
    ``g_l = sqrt(R) I_l(k r_<) K_l(k r_>)``.  delta-prime:
    ``|c_l| * ||ghat_l||^2`` with ``c_l = 1/(beta - m_hat)`` (versus Neumann)
    plus ``1/m_hat`` (versus free).  Orders ``l >= 1`` appear twice.
    """
    kappa = _kappa_of(lam)
    x = kappa * R
    ls = np.arange(l_max + 1)
    logi, logk, di, dk, _, _ = _ratio_tables(l_max, x)
    n_in, n_out = radial_norms(l_max, kappa, R)
    mv = mode_weyl_circle(ls, kappa, R)
    if spec.kind == "delta":
        alpha = float(spec.strength)
        c = alpha / (1.0 - alpha * mv.m_tilde)
        # ||g||^2 = R (K^2 int I^2 + I^2 int K^2) = R I^2 K^2 (n_in + n_out)
        norm2 = R * np.exp(2 * (logi + logk)) * (n_in + n_out)
    else:
        beta = float(spec.strength)
        c = _delta_prime_coefficient(beta, mv.m_hat, versus)
        norm2 = (n_in / (kappa * di) ** 2 + n_out / (kappa * dk) ** 2) / R
    s = np.abs(c) * norm2
    return np.sort(np.repeat(s, np.where(ls == 0, 1, 2)))[::-1]


# ---------------------------------------------------------------------------
# outputs


def write_singular_values_csv(profiles, path):
    lines = ["tag,k,s_k"]
    for p in profiles:
        for k, s in enumerate(p.values, start=1):
            lines.append(f"{p.tag},{k},{s:.16e}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_slopes_json(profiles, path):
    doc = {p.tag: p.to_dict() for p in profiles}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
