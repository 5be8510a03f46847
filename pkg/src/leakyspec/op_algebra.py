"""Finite-matrix checks of the resolvent algebra behind the Schatten estimates.

* conjugation identity ``E_lam D_1(lam_0) F_lam = D_1(lam)`` with
  ``E_lam = I + (lam - lam_0)(H - lam)^{-1}``, ``F_lam = I + (lam - lam_0)(K - lam)^{-1}``
  and ``D_1(mu) = (H - mu)^{-1} - (K - mu)^{-1}``;
* telescoping ``(H - lam)^{-m} - (K - lam)^{-m} = sum_k T_{m,k}(lam)`` with
  ``T_{m,k} = (H - lam)^{-(m-k-1)} D_1(lam) (K - lam)^{-k}``;
* factorized decay: if ``D_1(lam_0) = B C`` with ``(K - lam_0)^{-k} B`` and
  ``C (K - lam_0)^{-k}`` decaying like ``k^{-(a k + b_1)}``, ``k^{-(a k + b_2)}``,
  the l-th power difference decays like ``k^{-(a l + b)}``, ``b = b_1 + b_2 - a``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .krein_schatten import SingularValueProfile, fit_profile

COND_MAX = 1e8
DEFAULT_SEED = 20240607


class ResolventError(np.linalg.LinAlgError):
    """Spectral parameter in (or numerically at) the spectrum."""


@dataclass(frozen=True, eq=False)
class MatrixPair:
    """Two square matrices with a common regular point ``lam0``."""

    H: np.ndarray
    K: np.ndarray
    lam0: complex

    def __post_init__(self):
        if self.H.shape != self.K.shape or self.H.shape[0] != self.H.shape[1]:
            raise ValueError("H and K must be square matrices of equal size")
        for name, M in (("H", self.H), ("K", self.K)):
            c = np.linalg.cond(M - self.lam0 * np.eye(len(M)))
            if not c < COND_MAX:
                raise ResolventError(f"{name} - lam0 has condition number {c:.3g}")

    @property
    def k(self) -> int:
        return self.H.shape[0]

    def resolvent(self, which, lam):
        M = self.H if which == "H" else self.K
        A = M - lam * np.eye(self.k)
        c = np.linalg.cond(A)
        if not c < COND_MAX:
            raise ResolventError(f"lam={lam} is (numerically) in the spectrum of {which}; cond {c:.3g}")
        return np.linalg.inv(A)


def _rel(lhs, rhs):
    err = np.linalg.norm(lhs - rhs)
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs))
    return 0.0 if scale == 0 else float(err / scale)


def conjugation_identity_residual(pair: MatrixPair, lam) -> float:
    """Relative Frobenius residual of ``E_lam D_1(lam0) F_lam - D_1(lam)``."""
    I = np.eye(pair.k)
    RH, RK = pair.resolvent("H", lam), pair.resolvent("K", lam)
    RH0, RK0 = pair.resolvent("H", pair.lam0), pair.resolvent("K", pair.lam0)
    E = I + (lam - pair.lam0) * RH
    F = I + (lam - pair.lam0) * RK
    return _rel(E @ (RH0 - RK0) @ F, RH - RK)


def telescoping_terms(pair: MatrixPair, lam, m):
    """``[T_{m,0}, ..., T_{m,m-1}]`` at ``lam``."""
    RH, RK = pair.resolvent("H", lam), pair.resolvent("K", lam)
    D1 = RH - RK
    mp = np.linalg.matrix_power
    return [mp(RH, m - k - 1) @ D1 @ mp(RK, k) for k in range(m)]


def telescoping_residual(pair: MatrixPair, lam, m) -> float:
    """Relative residual between the direct power difference and the ``T_{m,k}`` sum."""
    if not 1 <= int(m) <= 6:
        raise ValueError("m must be between 1 and 6")
    m = int(m)
    RH, RK = pair.resolvent("H", lam), pair.resolvent("K", lam)
    mp = np.linalg.matrix_power
    direct = mp(RH, m) - mp(RK, m)
    return _rel(direct, sum(telescoping_terms(pair, lam, m)))


def random_pair(rng, k=20, hermitian=True, lam0=1.5j, max_tries=50) -> MatrixPair:
    """Random pair with spectra clamped to ``[-2, 2]`` (real part).

    Hermitian pairs are ``Q diag(e) Q^*``; the non-Hermitian variant adds a
    Gaussian perturbation of norm 0.1, keeping the spectrum near the real axis
    so that ``lam0`` stays well inside the resolvent set.
    """
    for _ in range(max_tries):
        mats = []
        for _ in range(2):
            Z = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
            Q, _ = np.linalg.qr(Z)
            M = (Q * rng.uniform(-2, 2, k)) @ Q.conj().T
            M = 0.5 * (M + M.conj().T)
            if not hermitian:
                G = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
                M = M + 0.1 * G / np.linalg.norm(G, 2)
            mats.append(M)
        try:
            return MatrixPair(mats[0], mats[1], lam0)
        except ResolventError:
            continue
    raise ResolventError("could not draw a well-conditioned pair")


def random_trials(n_trials=100, k=20, seed=DEFAULT_SEED, m=3):
    """Seeded batch of conjugation and telescoping residuals (Hermitian and not)."""
    rng = np.random.default_rng(seed)
    conj, tele = [], []
    for t in range(n_trials):
        pair = random_pair(rng, k, hermitian=(t % 2 == 0))
        lam = pair.lam0 + 1j
        conj.append(conjugation_identity_residual(pair, lam))
        tele.append(telescoping_residual(pair, lam, m))
    return np.array(conj), np.array(tele)


# ---------------------------------------------------------------------------
# factorized decay


def _givens_chain(k, rng, angle=0.3):
    """Orthogonal matrix mixing adjacent index pairs; keeps power-law singular values."""
    U = np.eye(k)
    for i in range(0, k - 1, 2):
        th = angle * rng.uniform(0.5, 1.5)
        c, s = np.cos(th), np.sin(th)
        U[i:i + 2, i:i + 2] = [[c, -s], [s, c]]
    return U


@dataclass(frozen=True, eq=False)
class FactorizedInstance:
    """``K = diag(i^a)`` and ``(H - lam0)^{-1} = (K - lam0)^{-1} + B C``."""

    K: np.ndarray
    B: np.ndarray
    C: np.ndarray
    lam0: float
    a: float
    b1: float
    b2: float

    @property
    def b(self):
        return self.b1 + self.b2 - self.a

    def resolvent_H(self, lam):
        RH0 = np.linalg.inv(self.K - self.lam0 * np.eye(len(self.K))) + self.B @ self.C
        # (H - lam)^{-1} = (H - lam0)^{-1} (I - (lam - lam0)(H - lam0)^{-1})^{-1}
        return RH0 @ np.linalg.inv(np.eye(len(RH0)) - (lam - self.lam0) * RH0)

    def resolvent_K(self, lam):
        return np.diag(1.0 / (np.diag(self.K) - lam))

    def power_difference(self, lam, l):
        mp = np.linalg.matrix_power
        return mp(self.resolvent_H(lam), l) - mp(self.resolvent_K(lam), l)


def synthesize_factorized(k=200, a=2.0, b1=1.5, b2=1.5, lam0=-1.0, d=None, seed=DEFAULT_SEED,
                          scale=1.0, max_tries=8) -> FactorizedInstance:
    """Build an instance with exact power-law singular values of ``B`` and ``C``.

    ``d`` < ``k`` truncates the factorization to rank ``d``.  If
    ``(K - lam0)^{-1} + B C`` is singular the factors are rescaled by 1/2 and
    the draw is repeated.
    """
    if not (a > 0 and b1 >= 0 and b2 >= 0 and a <= b1 + b2):
        raise ValueError("need a > 0, b1, b2 >= 0 and a <= b1 + b2")
    rng = np.random.default_rng(seed)
    i = np.arange(1, k + 1, dtype=float)
    K = np.diag(i**a)
    d = k if d is None else int(d)
    for _ in range(max_tries):
        U, V = _givens_chain(k, rng), _givens_chain(k, rng)
        B = scale * (i[:, None] ** -b1 * U)[:, :d]
        C = (V * i[None, :] ** -b2)[:d, :]
        RH0 = np.diag(1.0 / (i**a - lam0)) + B @ C
        if np.linalg.cond(RH0) < 1e12 and np.all(np.isfinite(RH0)):
            return FactorizedInstance(K, B, C, lam0, a, b1, b2)
        scale *= 0.5
    raise ResolventError("synthesized (K - lam0)^{-1} + BC stays singular after rescaling")


def factorized_decay_demo(instance: FactorizedInstance, lam=-3.0, powers=(1, 2),
                          fit_ranges=None) -> list[SingularValueProfile]:
    """Singular-value profiles of ``(H - lam)^{-l} - (K - lam)^{-l}``.

    The expected slope for power ``l`` is ``-(a l + b)``.  The default fit
    range ``[8, 64]`` skips the first indices, where ``1/(i^a - lam)`` has not
    yet reached its power law; the synthetic spectra have no noise floor there.
    """
    out = []
    zero = not (np.any(instance.B) and np.any(instance.C))
    for l in powers:
        fr = (fit_ranges or {}).get(l, (8, 64))
        s = np.zeros(len(instance.K)) if zero else np.linalg.svd(
            instance.power_difference(lam, l), compute_uv=False)
        if zero:
            out.append(SingularValueProfile(s, fr[0], fr[1], None, None, f"factorized_l{l}",
                                            -(instance.a * l + instance.b), True))
            continue
        out.append(fit_profile(s, fr, f"factorized_l{l}", -(instance.a * l + instance.b)))
    return out


def numerical_rank(M, rtol=1e-10):
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
