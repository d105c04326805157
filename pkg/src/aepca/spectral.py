"""Symmetric eigendecomposition, thin SVD and pseudoinverse via Jacobi rotations.

Both decompositions use round-robin (tournament) ordering: each round applies
n/2 rotations on disjoint index pairs at once, which keeps the work inside
vectorized numpy calls while remaining a cyclic-by-pairs Jacobi method. One
sweep visits every pair exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matrix import DimensionError

RANK_TOL = 1e-12
DEGENERATE_GAP = 1e-6
MAX_SWEEPS = 50


@dataclass(frozen=True)
class SymEigen:
    vectors: np.ndarray
    values: np.ndarray
    sweeps: int
    offdiag_history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class ThinSVD:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    rank: int
    rank_deficient: bool
    degenerate: bool

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def _tournament(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Round-robin schedule covering every unordered pair of range(n) once."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        p, q = [], []
        for i in range(size // 2):
            a, b = players[i], players[size - 1 - i]
            if a >= 0 and b >= 0:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _rotation(app, aqq, apq):
    """Cosine/sine pairs that zero the (p, q) entry of each 2x2 block."""
    c = np.ones_like(apq)
    s = np.zeros_like(apq)
    live = apq != 0.0
    if np.any(live):
        tau = (aqq[live] - app[live]) / (2.0 * apq[live])
        sign = np.where(tau >= 0.0, 1.0, -1.0)
        t = sign / (np.abs(tau) + np.hypot(1.0, tau))
        c[live] = 1.0 / np.sqrt(1.0 + t * t)
        s[live] = t * c[live]
    return c, s


def _offdiag_fro(a: np.ndarray) -> float:
    return float(np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0)))


def sym_eigen(a: np.ndarray) -> SymEigen:
    """Full eigendecomposition of a symmetric matrix, values sorted descending."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"sym_eigen needs a square matrix, got {a.shape}")
    d = a.shape[0]
    if d == 0:
        raise DimensionError("sym_eigen of an empty matrix")
    norm = float(np.linalg.norm(a))
    if np.linalg.norm(a - a.T) > 1e-8 * norm:
        raise ValueError("sym_eigen input is not symmetric")
    work = 0.5 * (a + a.T)
    # eigenvectors are accumulated as rows so every update is a contiguous row operation
    vecs_t = np.eye(d)
    history = [_offdiag_fro(work)]
    tol = 1e-12 * norm
    sweeps = 0
    rounds = _tournament(d) if d > 1 else []
    while sweeps < MAX_SWEEPS:
        off = work - np.diag(np.diag(work))
        if d == 1 or np.max(np.abs(off)) < tol:
            break
        for p, q in rounds:
            c, s = _rotation(work[p, p], work[q, q], work[p, q])
            c2, s2 = c[:, None], s[:, None]
            _rotate_rows(work, p, q, c2, s2)
            # J^T (J^T A)^T = J^T A J because A is symmetric
            work = np.ascontiguousarray(work.T)
            _rotate_rows(work, p, q, c2, s2)
            work[p, q] = 0.0
            work[q, p] = 0.0
            _rotate_rows(vecs_t, p, q, c2, s2)
        sweeps += 1
        history.append(_offdiag_fro(work))
    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    return SymEigen(vectors=vecs_t[order].T.copy(), values=values[order], sweeps=sweeps, offdiag_history=history)


def _rotate_rows(m: np.ndarray, p, q, c, s) -> None:
    rp, rq = m[p], m[q]
    m[p] = c * rp - s * rq
    m[q] = s * rp + c * rq


def _orthonormal_completion(basis: np.ndarray, count: int) -> np.ndarray:
    """``count`` unit vectors orthogonal to the columns of ``basis`` and each other."""
    n, r = basis.shape
    q, _ = np.linalg.qr(basis, mode="complete") if r else (np.eye(n), None)
    return q[:, r : r + count]


def _one_sided_jacobi(a: np.ndarray) -> ThinSVD:
    n, k = a.shape
    work = a.copy()
    v = np.eye(k)
    tol = np.finfo(np.float64).eps * max(k, 1)
    rounds = _tournament(k) if k > 1 else []
    for _ in range(MAX_SWEEPS * 2):
        rotated = False
        for p, q in rounds:
            wp, wq = work[:, p], work[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            live = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not np.any(live):
                continue
            rotated = True
            # one-sided update is the two-sided rotation applied to the Gram matrix
            c, s = _rotation(alpha, beta, np.where(live, gamma, 0.0))
            work[:, p] = wp * c - wq * s
            work[:, q] = wp * s + wq * c
            vp, vq = v[:, p], v[:, q]
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
        if not rotated:
            break
    sigma = np.linalg.norm(work, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, work, v = sigma[order], work[:, order], v[:, order]
    cutoff = RANK_TOL * sigma[0] if k else 0.0
    rank = int(np.sum(sigma > cutoff)) if sigma[0] > 0 else 0
    u = np.empty((n, k))
    u[:, :rank] = work[:, :rank] / sigma[:rank]
    if rank < k:
        u[:, rank:] = _orthonormal_completion(u[:, :rank], k - rank)
    gaps = -np.diff(sigma)
    degenerate = bool(np.any(gaps < DEGENERATE_GAP * sigma[0])) if k > 1 else False
    return ThinSVD(u=u, sigma=sigma, v=v, rank=rank, rank_deficient=rank < k, degenerate=degenerate)


def thin_svd(a: np.ndarray) -> ThinSVD:
    """Thin SVD by one-sided (Hestenes) Jacobi on the columns of ``a``.

    Wide inputs are handled by decomposing the transpose and swapping the
    factors. Singular vectors for singular values at or below ``1e-12 * sigma_1``
    are an arbitrary orthonormal completion and the result is flagged
    ``rank_deficient``.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise DimensionError(f"thin_svd needs a non-empty 2-D matrix, got shape {a.shape}")
    if a.shape[0] >= a.shape[1]:
        return _one_sided_jacobi(a)
    t = _one_sided_jacobi(a.T)
    return ThinSVD(u=t.v, sigma=t.sigma, v=t.u, rank=t.rank, rank_deficient=t.rank_deficient, degenerate=t.degenerate)


def pseudoinverse(a: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse ``V diag(1/sigma) U^T``; tiny singular values map to 0."""
    svd = thin_svd(a)
    inv = np.zeros_like(svd.sigma)
    inv[: svd.rank] = 1.0 / svd.sigma[: svd.rank]
    return (svd.v * inv) @ svd.u.T
