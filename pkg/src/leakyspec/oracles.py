"""Independent ground-truth generators.

Nothing here imports the production Bessel or boundary code.  Radial
shooting uses no special functions at all; the Fourier and root oracles use
scipy's Bessel routines as a second, unrelated evaluation path.
"""
from __future__ import annotations

import json
import math
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, special


class OracleInputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# radial shooting


@dataclass(frozen=True)
class ShootingProblem:
    """Radial interface problem for one angular order.

    The radial equation is ``u'' + (n-1)/r u' - ell/r^2 u - kappa^2 u = 0``
    with ``ell = l^2`` (n=2) or ``l(l+1)`` (n=3).  ``kind`` is ``"delta"``
    (strength ``alpha``) or ``"delta_prime"`` (strength ``beta``).
    ``r_min`` is given as a fraction of ``R`` and the outer region is
    ``[R, R + t_max/kappa]``.
    """

    n: int
    l: int
    R: float
    kind: str = "delta"
    strength: float = 0.0
    r_min_frac: float = 1e-4
    t_max: float = 30.0
    steps_in: int = 2000
    steps_out: int = 2000

    def __post_init__(self):
        if self.n not in (2, 3):
            raise OracleInputError("dimension must be 2 or 3")
        if self.kind not in ("delta", "delta_prime"):
            raise OracleInputError(f"unknown interaction kind {self.kind!r}")
        if self.r_min_frac > 1e-4 or self.t_max < 30.0:
            raise OracleInputError("need r_min <= 1e-4 R and r_max >= R + 30/kappa")

    @property
    def ell(self):
        return self.l * self.l if self.n == 2 else self.l * (self.l + 1)

    def refined(self, factor=2):
        return ShootingProblem(self.n, self.l, self.R, self.kind, self.strength,
                               self.r_min_frac, self.t_max,
                               self.steps_in * factor, self.steps_out * factor)


def _rk4(f, y, x0, x1, steps):
    h = (x1 - x0) / steps
    x = x0 * np.ones_like(h)
    for _ in range(steps):
        k1 = f(x, y)
        k2 = f(x + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(x + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(x + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        y = y / np.max(np.abs(y), axis=0)  # solutions only matter up to scale
        x += h
    return y


def log_derivatives(problem: ShootingProblem, kappa):
    """``u'/u`` at ``R`` for the regular interior and decaying exterior solutions.

    ``kappa`` may be an array; all values are integrated together.
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    if np.any(~(kappa > 0)):
        raise OracleInputError("kappa must be positive")
    n, l, R, ell = problem.n, problem.l, problem.R, problem.ell

    # interior in s = ln r with y = (u, r u')
    r0 = problem.r_min_frac * R
    u0 = np.ones_like(kappa)
    w0 = np.full_like(kappa, float(l))
    c = np.ones_like(kappa)
    for k in range(1, 6):
        c = c * kappa**2 * r0**2 / (2 * k * (2 * k + 2 * l + n - 2))
        u0 = u0 + c
        w0 = w0 + (l + 2 * k) * c

    def f_in(s, y):
        rr = np.exp(2 * s)
        return np.array([y[1], (2 - n) * y[1] + (ell + kappa**2 * rr) * y[0]])

    y = _rk4(f_in, np.array([u0, w0]), math.log(r0), math.log(R), problem.steps_in)
    p = y[1] / (R * y[0])

    # exterior in sigma = ln(r/R) with the same (u, r u') form, inward from
    # r_max = R + t_max/kappa where the decaying solution has
    # r u'/u = -kappa r - (n - 1)/2 up to O(1/r)
    r_far = R + problem.t_max / kappa
    w_far = -kappa * r_far - 0.5 * (n - 1)
    y = _rk4(f_in, np.array([np.ones_like(kappa), w_far]),
             np.log(r_far), np.full_like(kappa, math.log(R)), problem.steps_out)
    q = y[1] / (R * y[0])
    return p, q


def shoot_matching(problem: ShootingProblem, kappa):
    """Scale-invariant interface determinant; its zeros in ``kappa`` are bound states.

    delta:  ``u`` continuous and ``u'(R+) - u'(R-) = -alpha u(R)`` give
    ``alpha - (p - q)`` with ``p, q`` the interior / exterior ``u'/u``.
    delta-prime: ``u'`` continuous and ``-beta u'(R) = u(R+) - u(R-)`` give
    ``beta - (1/p - 1/q)``.
    """
    p, q = log_derivatives(problem, kappa)
    if problem.kind == "delta":
        out = problem.strength - (p - q)
    else:
        out = problem.strength - (1.0 / p - 1.0 / q)
    return out if out.size > 1 else float(out[0])


def shooting_roots(problem: ShootingProblem, kappa_lo=1e-3, kappa_hi=20.0,
                   n_scan=200, xtol=1e-13):
    """All sign changes of the determinant on a log-spaced scan, refined by Illinois
    regula falsi (all brackets advanced in one vectorized integration)."""
    ks = np.geomspace(kappa_lo, kappa_hi, n_scan)
    fs = np.asarray(shoot_matching(problem, ks))
    idx = np.nonzero(np.sign(fs[:-1]) * np.sign(fs[1:]) < 0)[0]
    if idx.size == 0:
        return np.array([])
    a, b = ks[idx].copy(), ks[idx + 1].copy()
    fa, fb = fs[idx].copy(), fs[idx + 1].copy()
    side = np.zeros(a.size, dtype=int)
    c_old = a
    for _ in range(200):
        c = b - fb * (b - a) / (fb - fa)
        fc = np.atleast_1d(shoot_matching(problem, c))
        left = np.sign(fc) == np.sign(fa)
        # replace the endpoint with the same sign; halve the stale one (Illinois)
        fb_new = np.where(left & (side == -1), 0.5 * fb, fb)
        fa_new = np.where(~left & (side == 1), 0.5 * fa, fa)
        a = np.where(left, c, a)
        fa = np.where(left, fc, fa_new)
        b = np.where(left, b, c)
        fb = np.where(left, fb_new, fc)
        side = np.where(left, -1, 1)
        if np.all((np.abs(c - c_old) < xtol * c) | (fc == 0)):
            return c
        c_old = c
    return c


# ---------------------------------------------------------------------------
# Fourier coefficients of the circle single layer


def _sigmoid_map(n, p=8):
    """Kress sigmoidal substitution on [0, 2 pi]: nodes cluster at both ends."""
    s = 2 * np.pi * np.arange(1, n) / n

    def v(x):
        return (1.0 / p - 0.5) * ((np.pi - x) / np.pi) ** 3 + (1.0 / p) * (x - np.pi) / np.pi + 0.5

    def dv(x):
        return -3 * (1.0 / p - 0.5) * (np.pi - x) ** 2 / np.pi**3 + 1.0 / (p * np.pi)

    a, b = v(s) ** p, v(2 * np.pi - s) ** p
    w = 2 * np.pi * a / (a + b)
    da = p * v(s) ** (p - 1) * dv(s)
    db = -p * v(2 * np.pi - s) ** (p - 1) * dv(2 * np.pi - s)
    dw = 2 * np.pi * (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return w, dw * (2 * np.pi / n)


def mode_fourier_single_layer(l, kappa, R, order=1024):
    """``int_0^{2pi} R K_0(2 kappa R sin(th/2))/(2pi) cos(l th) dth`` by a
    trapezoid rule after a sigmoidal change of variable that flattens the
    logarithmic endpoint singularity."""
    if order < 512:
        raise OracleInputError("quadrature order must be at least 512")
    th, wt = _sigmoid_map(int(order))
    keep = np.sin(0.5 * th) > 0  # nodes that round onto the endpoint carry zero weight
    th, wt = th[keep], wt[keep]
    f = R * special.k0(2 * kappa * R * np.sin(0.5 * th)) / (2 * np.pi)
    return float(np.sum(f * np.cos(l * th) * wt))


# ---------------------------------------------------------------------------
# transcendental mode conditions and bisection


def delta_mode_condition(n, l, R, alpha):
    """``kappa -> alpha m_tilde_l(kappa) - 1`` using scipy's scaled Bessel functions."""
    def f(kappa):
        x = kappa * R
        if n == 2:
            mt = R * special.ive(l, x) * special.kve(l, x)
        else:
            mt = kappa * R * R * special.spherical_in(l, x) * special.spherical_kn(l, x) * 2 / np.pi
        return alpha * mt - 1.0
    return f


def delta_prime_mode_condition(l, R, beta):
    """``kappa -> m_hat_l(kappa) - beta`` on the circle."""
    def f(kappa):
        x = kappa * R
        mi = special.ive(l, x) / (kappa * special.ivp(l, x) * np.exp(-x))
        me = -special.kve(l, x) / (kappa * special.kvp(l, x) * np.exp(x))
        return mi + me - beta
    return f


@dataclass
class RootReport:
    found: bool
    root: float | None
    bracket: tuple
    iterations: int
    message: str = ""


def bessel_root_bisect(func, bracket, tol=1e-12, max_iter=200) -> RootReport:
    """Plain bisection; reports (does not raise) when there is no sign change."""
    a, b = (float(v) for v in bracket)
    if a == b:
        raise OracleInputError("degenerate bracket: endpoints are equal")
    if a > b:
        a, b = b, a
    fa, fb = func(a), func(b)
    if fa == 0:
        return RootReport(True, a, (a, b), 0)
    if fb == 0:
        return RootReport(True, b, (a, b), 0)
    if np.sign(fa) == np.sign(fb):
        return RootReport(False, None, (a, b), 0, "no sign change on bracket")
    it = 0
    while b - a > tol * max(1.0, abs(a)) and it < max_iter:
        m = 0.5 * (a + b)
        fm = func(m)
        if fm == 0:
            a = b = m
            break
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
        it += 1
    return RootReport(True, 0.5 * (a + b), tuple(bracket), it)


def sign_scan(func, bracket, n=400):
    """Log-spaced sign scan; returns the sub-brackets that contain a sign change."""
    ks = np.geomspace(bracket[0], bracket[1], n)
    vals = np.array([func(k) for k in ks])
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    return [(ks[i], ks[i + 1]) for i in idx]


def mode_roots(func, bracket, n=400, tol=1e-12):
    return [bessel_root_bisect(func, br, tol).root for br in sign_scan(func, bracket, n)]


# ---------------------------------------------------------------------------
# integral representations and small analytic oracles


def k0_integral(x):
    """``K_0(x) = int_0^inf exp(-x cosh t) dt`` by adaptive quadrature."""
    with np.errstate(over="ignore"):
        val, _ = integrate.quad(lambda t: np.exp(-x * np.cosh(t)), 0, np.inf,
                                epsabs=0, epsrel=2e-14, limit=200)
    return val


def ellipse_perimeter(a, b):
    val, _ = integrate.quad(lambda t: np.hypot(a * np.sin(t), b * np.cos(t)), 0, 2 * np.pi,
                            epsabs=0, epsrel=2e-14, limit=200)
    return val


def sph_downward_recurrence(l, x, start=None):
    """Miller-style downward recurrence for ``i_l(x)`` normalized by ``i_0 = sinh(x)/x``;
    ``k_l`` by its (stable) upward recurrence from ``k_0 = exp(-x)/x``."""
    start = start or (l + int(2 * x) + 40)
    a, b = 0.0, 1e-300
    vals = {}
    for j in range(start, 0, -1):
        a, b = b, a + (2 * j + 1) / x * b  # i_{j-1} = i_{j+1} + (2j+1)/x i_j
        vals[j - 1] = b
        if abs(b) > 1e250:
            a, b = a * 1e-250, b * 1e-250
            vals = {k: v * 1e-250 for k, v in vals.items()}
    scale = (math.sinh(x) / x) / vals[0]
    il = vals[l] * scale
    km, kc = math.exp(-x) / x, math.exp(-x) / x * (1 + 1 / x)
    if l == 0:
        kl = km
    else:
        for j in range(1, l):
            km, kc = kc, km + (2 * j + 1) / x * kc  # k_{j+1} = k_{j-1} + (2j+1)/x k_j
        kl = kc
    return il, kl


def five_point_laplacian(G, x, h):
    """Five-point discrete Laplacian of ``G`` at ``x``."""
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    lap = (G(x + ex) + G(x - ex) + G(x + ey) + G(x - ey) - 4 * G(x)) / h**2
    return lap


def seven_point_laplacian(G, x, h):
    lap = -6 * G(x)
    for e in np.eye(3):
        lap = lap + G(x + h * e) + G(x - h * e)
    return lap / h**2


# ---------------------------------------------------------------------------
# reference file


@dataclass
class ReferenceEntry:
    name: str
    generator: str
    inputs: dict
    value: object


@dataclass
class ReferenceFile:
    entries: list = field(default_factory=list)

    def add(self, name, generator, inputs, value):
        self.entries.append(ReferenceEntry(name, generator, inputs, value))

    def dump(self, path):
        doc = {
            "schema": 1,
            "metadata": {"numpy": np.__version__, "scipy": _scipy_version(),
                         "python": platform.python_version()},
            "entries": [asdict(e) for e in self.entries],
        }
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _scipy_version():
    import scipy
    return scipy.__version__


def load_reference(path):
    doc = json.loads(Path(path).read_text())
    return {e["name"]: e for e in doc["entries"]}


def generate_reference(path):
    """Run the oracle suite and freeze its outputs."""
    ref = ReferenceFile()
    ref.add("K0(1)", "k0_integral", {"x": 1.0}, k0_integral(1.0))
    ref.add("ellipse_perimeter(2,1)", "ellipse_perimeter", {"a": 2.0, "b": 1.0},
            ellipse_perimeter(2.0, 1.0))
    il, kl = sph_downward_recurrence(1, 2.0)
    ref.add("sph_ik(1,2)", "sph_downward_recurrence", {"l": 1, "x": 2.0}, [il, kl])
    ref.add("circle_single_layer_modes", "mode_fourier_single_layer",
            {"kappa": 1.0, "R": 1.0, "l": list(range(11)), "order": 1024},
            [mode_fourier_single_layer(l, 1.0, 1.0, 1024) for l in range(11)])

    # Neumann-to-Dirichlet multipliers of one mode, from shooting with unit derivative
    prob = ShootingProblem(2, 3, 1.0)
    p, q = log_derivatives(prob, 1.0)
    ref.add("circle_ntd_l3", "log_derivatives", {"n": 2, "l": 3, "R": 1.0, "kappa": 1.0},
            {"m_i": float(1 / p[0]), "m_e": float(-1 / q[0])})

    # bound states (kappa roots) per mode from shooting
    cases = [(2, 0.5), (2, 2.0), (2, 8.0), (3, 2.0), (3, 8.0)]
    for n, alpha in cases:
        roots = {}
        for l in range(12):
            r = shooting_roots(ShootingProblem(n, l, 1.0, "delta", alpha))
            if r.size:
                roots[str(l)] = [float(v) for v in r]
        ref.add(f"delta_n{n}_alpha{alpha}", "shooting_roots",
                {"n": n, "R": 1.0, "alpha": alpha, "l_range": [0, 11]}, roots)
    for beta in (0.3, 1.0):
        roots = {}
        for l in range(12):
            r = shooting_roots(ShootingProblem(2, l, 1.0, "delta_prime", beta), kappa_lo=1e-4)
            if r.size:
                roots[str(l)] = [float(v) for v in r]
        ref.add(f"delta_prime_n2_beta{beta}", "shooting_roots",
                {"n": 2, "R": 1.0, "beta": beta, "l_range": [0, 11]}, roots)
    ref.dump(path)
    return ref
