"""Negative eigenvalues from the Birman-Schwinger condition.

``lam < 0`` is an eigenvalue of the delta operator iff 1 is an eigenvalue of
``alpha M_tilde(lam)`` (delta-prime: ``M_hat(lam)/beta``), with equal
multiplicities.  The solver scans a logarithmic lattice in
``kappa = sqrt(-lam)``, detects level crossings of every sorted BS
eigenvalue, and refines each crossing with a bracketed root finder.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .boundary_ops import (
    BoundaryOperator,
    ConfigurationError,
    UnsupportedConfigurationError,
    assemble_single_layer,
    mode_weyl_circle,
    mode_weyl_sphere,
)
from .geometry import BoundaryGrid, ClosedCurve, SphereSurface, build_grid

logger = logging.getLogger(__name__)

BETA_MIN = 1e-8
LATTICE_PER_DECADE = 64
MAX_REFINEMENTS = 6
UNRESOLVED_FRACTION = 0.5


class BracketError(ValueError):
    pass


class BranchTrackingError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class InteractionSpec:
    """Interaction type and strength.

    ``kind="delta"`` takes ``alpha`` (a constant or one sample per boundary
    node); ``kind="delta_prime"`` takes a constant ``beta`` with
    ``|beta| >= BETA_MIN``.
    """

    kind: str
    strength: object

    def __post_init__(self):
        if self.kind not in ("delta", "delta_prime"):
            raise ConfigurationError(f"unknown interaction kind {self.kind!r}")
        s = np.asarray(self.strength, dtype=float)
        if not np.all(np.isfinite(s)):
            raise ConfigurationError("interaction strength must be finite")
        if self.kind == "delta_prime":
            if s.ndim != 0:
                raise UnsupportedConfigurationError(
                    "delta-prime strength must be a constant on separable backends"
                )
            if abs(float(s)) < BETA_MIN:
                raise ConfigurationError(f"|beta| must be at least {BETA_MIN}")

    @classmethod
    def delta(cls, alpha):
        return cls("delta", alpha)

    @classmethod
    def delta_prime(cls, beta):
        return cls("delta_prime", float(beta))

    @property
    def is_constant(self) -> bool:
        return np.ndim(self.strength) == 0

    @property
    def is_zero(self) -> bool:
        return self.kind == "delta" and not np.any(np.asarray(self.strength, dtype=float))

    def scale(self) -> float:
        """Largest strength magnitude in the units of ``1/length``."""
        s = np.abs(np.asarray(self.strength, dtype=float))
        return float(s.max()) if self.kind == "delta" else 1.0 / float(s)


@dataclass
class BoundState:
    lam: float
    multiplicity: int
    residual: float
    eigendensities: np.ndarray | None = None
    mode: int | None = None
    backend: str = "nystrom"

    @property
    def kappa(self):
        return float(np.sqrt(-self.lam))


@dataclass
class BSSpectrum:
    """BS eigenvalues at one spectral point.

    Dense backends list every eigenvalue; mode backends list one value per
    order with a multiplicity tag.
    """

    lam: float
    values: np.ndarray
    multiplicities: np.ndarray
    orders: np.ndarray | None = None

    def expanded(self) -> np.ndarray:
        """All eigenvalues repeated by multiplicity, descending."""
        return np.sort(np.repeat(self.values, self.multiplicities))[::-1]


@dataclass
class BoundStateCount:
    count: int
    l_cutoff: int | None = None
    per_mode: dict = field(default_factory=dict)

    def __int__(self):
        return self.count


# ---------------------------------------------------------------------------
# backends


class _DenseBackend:
    name = "nystrom"

    def __init__(self, grid: BoundaryGrid, spec: InteractionSpec):
        self.grid = grid
        self.spec = spec
        alpha = np.asarray(spec.strength, dtype=float)
        if alpha.ndim and alpha.shape != (grid.N,):
            raise ConfigurationError(
                f"sampled alpha has {alpha.size} values, grid has {grid.N} nodes"
            )
        self.alpha = alpha

    def operator(self, kappa) -> BoundaryOperator:
        return assemble_single_layer(self.grid, kappa)

    def eig(self, kappa, vectors=False):
        S = self.operator(kappa).symmetric_form()
        if self.alpha.ndim == 0:
            if not vectors:
                return self.alpha * np.linalg.eigvalsh(S)[::-1], None
            mu, V = np.linalg.eigh(S)
            mu, V = self.alpha * mu, V
            order = np.argsort(mu)[::-1]
            return mu[order], V[:, order]
        mu, V = np.linalg.eigh(S)
        root = (V * np.sqrt(np.clip(mu, 0.0, None))) @ V.T
        B = root @ (self.alpha[:, None] * root)
        vals, U = np.linalg.eigh(0.5 * (B + B.T))
        order = np.argsort(vals)[::-1]
        if not vectors:
            return vals[order], None
        return vals[order], root @ U[:, order]

    def spectrum(self, kappa):
        vals, _ = self.eig(kappa)
        return BSSpectrum(-kappa**2, vals, np.ones(vals.size, dtype=int))

    def densities(self, kappa, idx):
        """Kernel vectors of ``I - alpha A`` as nodal densities ``alpha W^{-1/2} u``."""
        _, U = self.eig(kappa, vectors=True)
        u = U[:, idx]
        if self.alpha.ndim == 0:
            return u / np.sqrt(self.grid.weights)[:, None]
        return self.alpha[:, None] * u / np.sqrt(self.grid.weights)[:, None]

    def norm_bound(self, kappa):
        """Row-sum bound on the spectral radius of ``alpha A``."""
        A = self.operator(kappa).matrix
        a = np.abs(np.broadcast_to(self.alpha, (self.grid.N,)))
        return float((a[:, None] * np.abs(A)).sum(axis=1).max())


class _ModeBackend:
    name = "modes"

    def __init__(self, geometry, spec: InteractionSpec, l_max: int):
        if not spec.is_constant:
            raise UnsupportedConfigurationError("mode backends need a constant strength")
        self.spec = spec
        self.l_max = int(l_max)
        self.orders = np.arange(self.l_max + 1)
        if isinstance(geometry, SphereSurface):
            self.R, self.dim, self.fn = geometry.R, 3, mode_weyl_sphere
        else:
            self.R, self.dim, self.fn = geometry.params["R"], 2, mode_weyl_circle
        self.mult = np.where(self.orders == 0, 1, 2) if self.dim == 2 else 2 * self.orders + 1
        self.strength = float(spec.strength)

    def mode_values(self, kappa):
        mv = self.fn(self.orders, kappa, self.R)
        if self.spec.kind == "delta":
            return self.strength * mv.m_tilde
        return mv.m_hat / self.strength

    def single(self, l, kappa):
        mv = self.fn(int(l), kappa, self.R)
        if self.spec.kind == "delta":
            return self.strength * float(mv.m_tilde)
        return float(mv.m_hat) / self.strength

    def spectrum(self, kappa):
        return BSSpectrum(-kappa**2, self.mode_values(kappa), self.mult, self.orders)

    def zero_energy_cutoff(self):
        """Smallest order beyond which no mode can reach 1 at any kappa > 0.

        Uses the kappa -> 0 limits ``R/(2l)`` (circle) or ``R/(2l+1)``
        (sphere) of the single-layer multipliers and ``2R/l`` or
        ``R/l + R/(l+1)`` of ``m_hat``, which bound the multipliers from
        above because both decrease in kappa.
        """
        s, R = self.strength, self.R
        if s <= 0:
            return 0
        ls = np.arange(1, 100000)
        if self.spec.kind == "delta":
            lim = R / (2 * ls) if self.dim == 2 else R / (2 * ls + 1)
            reach = s * lim
        else:
            lim = 2 * R / ls if self.dim == 2 else R / ls + R / (ls + 1)
            reach = lim / s
        above = np.nonzero(reach >= 1)[0]
        return int(ls[above[-1]]) + 1 if above.size else 1


def _resolve_backend(spec, geometry, N=256, l_max=64, backend=None):
    if isinstance(geometry, SphereSurface):
        return _ModeBackend(geometry, spec, l_max)
    if isinstance(geometry, BoundaryGrid):
        curve, grid = geometry.curve, geometry
    elif isinstance(geometry, ClosedCurve):
        curve, grid = geometry, None
    else:
        raise ConfigurationError(f"unsupported geometry {type(geometry).__name__}")
    if spec.kind == "delta_prime" or backend == "modes":
        if curve.kind != "circle":
            raise UnsupportedConfigurationError(
                f"{spec.kind} on a {curve.kind} curve is not supported (separable backends only)"
            )
        return _ModeBackend(curve, spec, l_max)
    if grid is None:
        grid = build_grid(curve, N)
    return _DenseBackend(grid, spec)


def bs_eigenvalues(lam, spec: InteractionSpec, geometry, N=256, l_max=64, backend=None) -> BSSpectrum:
    """Birman-Schwinger eigenvalues at ``lam < 0``.

    delta: spectrum of the symmetric ``S^{1/2} alpha S^{1/2}`` where ``S`` is
    the weight-symmetrized single-layer matrix (same nonzero spectrum as
    ``alpha M_tilde``).  delta-prime: the mode values ``m_hat_l / beta``.
    """
    if not lam < 0:
        raise BracketError("spectral parameter must be negative")
    be = _resolve_backend(spec, geometry, N, l_max, backend)
    return be.spectrum(float(np.sqrt(-lam)))


def default_epsilon(kappa_scale=1.0):
    return 1e-6 * max(1.0, kappa_scale**2)


def _kappa_upper(be, spec):
    if isinstance(be, _ModeBackend):
        if be.strength <= 0:
            return 1.0
        # m_tilde ~ 1/(2 kappa) and m_hat ~ 2/kappa for large kappa
        return 4.0 * max(1.0, spec.scale() * (1.0 if spec.kind == "delta" else 2.0))
    # Schur test: |x - y| >= c * arclength gives sup_x int G dsigma <= 1/(2 kappa c),
    # so no BS eigenvalue reaches 1 once kappa > max|alpha| / (2c)
    c = chord_arc_constant(be.grid)
    return 1.1 * max(spec.scale(), 1e-3) / (2.0 * c)


def chord_arc_constant(grid: BoundaryGrid) -> float:
    """``min |x_i - x_j| / arc(i, j)`` over node pairs (arc = shorter way round)."""
    cum = np.concatenate([[0.0], np.cumsum(grid.weights)])
    L = cum[-1]
    arc = np.abs(cum[:-1, None] - cum[None, :-1])
    arc = np.minimum(arc, L - arc)
    d = grid.points[:, None, :] - grid.points[None, :, :]
    chord = np.hypot(d[..., 0], d[..., 1])
    off = arc > 0
    return float(np.min(chord[off] / arc[off]))


def _lattice(k_lo, k_hi, per_decade):
    n = max(2, int(np.ceil(np.log10(k_hi / k_lo) * per_decade)) + 1)
    return np.geomspace(k_lo, k_hi, n)


def _scan(be, kappas, cache):
    """Sorted BS values on the lattice; rows follow ``kappas``."""
    rows = []
    for k in kappas:
        if k not in cache:
            cache[k] = be.mode_values(k) if isinstance(be, _ModeBackend) else be.eig(k)[0]
        rows.append(cache[k])
    return np.array(rows)


def _crossings(kappas, vals):
    """(column, lattice index) pairs where a value column crosses 1."""
    g = vals - 1.0
    sc = np.sign(g[:-1]) * np.sign(g[1:]) <= 0
    sc &= ~((g[:-1] == 0) & (g[1:] == 0))
    i, j = np.nonzero(sc)
    return list(zip(j.tolist(), i.tolist()))


def find_bound_states(spec: InteractionSpec, geometry, bracket=None, tol=1e-8, N=256,
                      l_max=64, backend=None, per_decade=LATTICE_PER_DECADE,
                      with_densities=True):
    """Locate all BS level crossings in ``bracket = (lam_min, -eps)``.

    Returns a list of :class:`BoundState` sorted by energy.  Coincident
    crossings (rotationally degenerate pairs on dense backends) are merged
    and their multiplicity is the kernel dimension counted at the root.
    """
    be = _resolve_backend(spec, geometry, N, l_max, backend)
    if spec.is_zero:
        return []
    if bracket is None:
        k_hi = _kappa_upper(be, spec)
        k_lo = np.sqrt(default_epsilon())
    else:
        lam_min, lam_max = (float(v) for v in bracket)
        if not (lam_min < lam_max < 0):
            raise BracketError("bracket must satisfy lam_min < -eps < 0 (lambda = 0 excluded)")
        k_lo, k_hi = np.sqrt(-lam_max), np.sqrt(-lam_min)

    cache = {}
    history = []
    stable = 0
    pd = per_decade
    crossings = None
    for _ in range(MAX_REFINEMENTS):
        ks = _lattice(k_lo, k_hi, pd)
        vals = _scan(be, ks, cache)
        found = _crossings(ks, vals)
        history.append((pd, len(found)))
        if crossings is not None and len(found) == len(crossings[2]):
            stable += 1
            crossings = (ks, vals, found)
            break
        crossings = (ks, vals, found)
        pd *= 2
    else:
        raise BranchTrackingError(
            f"crossing count did not stabilize under refinement {history} on "
            f"lambda in [{-k_hi**2:.6g}, {-k_lo**2:.6g}]"
        )
    ks, vals, found = crossings
    logger.debug("lattice refinement history %s", history)

    roots = []
    for col, i in found:
        a, b = ks[i], ks[i + 1]
        if isinstance(be, _ModeBackend):
            def g(k, col=col):
                return be.single(be.orders[col], k) - 1.0
        else:
            def g(k, col=col):
                return be.eig(k)[0][col] - 1.0
        ga, gb = vals[i, col] - 1.0, vals[i + 1, col] - 1.0
        if ga == 0:
            kstar = a
        elif gb == 0:
            kstar = b
        else:
            kstar = brentq(g, a, b, xtol=1e-15, rtol=1e-15, maxiter=200)
        roots.append((kstar, col, abs(g(kstar))))

    states = []
    if isinstance(be, _ModeBackend):
        for kstar, col, res in roots:
            states.append(BoundState(-kstar**2, int(be.mult[col]), res, None,
                                     int(be.orders[col]), be.name))
    else:
        roots.sort()
        groups = []
        for r in roots:
            if groups and abs(r[0] - groups[-1][-1][0]) <= 1e-9 * r[0]:
                groups[-1].append(r)
            else:
                groups.append([r])
        for grp in groups:
            kstar = float(np.mean([r[0] for r in grp]))
            mu, _ = be.eig(kstar)
            near = np.abs(mu - 1.0)
            mult = int(np.sum(near < max(tol, 1e3 * max(r[2] for r in grp))))
            mult = max(mult, len(grp))
            idx = np.argsort(near)[:mult]
            dens = be.densities(kstar, idx)
            hf = high_frequency_fraction(dens)
            if hf > UNRESOLVED_FRACTION:
                logger.warning("dropping crossing at lambda=%.6g: eigendensity is not resolved "
                               "by N=%d (%.0f%% of its energy above N/4)", -kstar**2,
                               be.grid.N, 100 * hf)
                continue
            states.append(BoundState(-kstar**2, mult, float(near[idx].max()),
                                     dens if with_densities else None, None, be.name))
    for st in states:
        if st.residual >= tol:
            logger.warning("bound state at %.12g has residual %.3g above tol", st.lam, st.residual)
    states.sort(key=lambda s: s.lam)
    return states


def high_frequency_fraction(densities) -> float:
    """Largest share of energy in parameter frequencies ``|l| >= N/4`` over the columns.

    Aliasing at coarse grids produces spurious BS eigenvalues whose vectors
    oscillate at the grid scale; resolved eigendensities put almost no energy
    there.
    """
    d = np.atleast_2d(np.asarray(densities).T).T
    N = d.shape[0]
    c = np.abs(np.fft.fft(d, axis=0)) ** 2
    freq = np.abs(np.fft.fftfreq(N, 1.0 / N))
    hi = c[freq >= N / 4].sum(axis=0) / c.sum(axis=0)
    return float(hi.max())


def count_bound_states(spec: InteractionSpec, geometry, eps=None, N=256, l_max=64,
                       backend=None) -> BoundStateCount:
    """Number of BS eigenvalues above 1 at ``lam = -eps``, with multiplicity."""
    be = _resolve_backend(spec, geometry, N, l_max, backend)
    if spec.is_zero:
        return BoundStateCount(0, 0 if isinstance(be, _ModeBackend) else None)
    eps = default_epsilon() if eps is None else float(eps)
    if not eps > 0:
        raise BracketError("eps must be positive")
    sp = be.spectrum(np.sqrt(eps))
    above = sp.values > 1.0
    count = int(np.sum(sp.multiplicities[above]))
    if isinstance(be, _ModeBackend):
        per_mode = {int(l): int(m) for l, m, a in zip(sp.orders, sp.multiplicities, above) if a}
        return BoundStateCount(count, be.zero_energy_cutoff(), per_mode)
    return BoundStateCount(count)


def smallest_bs_gap(lam, spec, geometry, N=256, l_max=64, backend=None):
    """Signed eigenvalue of ``I - BS(lam)`` closest to zero (sign flips at each bound state)."""
    sp = bs_eigenvalues(lam, spec, geometry, N, l_max, backend)
    gaps = 1.0 - sp.values
    return float(gaps[np.argmin(np.abs(gaps))])
