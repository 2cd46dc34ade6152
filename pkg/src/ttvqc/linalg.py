"""Symmetric eigendecomposition by parallel-ordered Jacobi rotations."""

from __future__ import annotations

import numpy as np


def _round_robin(m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # m even; every unordered pair appears exactly once over m - 1 rounds
    others = list(range(1, m))
    rounds = []
    for _ in range(m - 1):
        players = [0] + others
        p = np.array(players[: m // 2])
        q = np.array(players[m // 2 :][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        others = others[-1:] + others[:-1]
    return rounds


def jacobi_eigh(
    a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors (columns) of a symmetric matrix.

    Each sweep visits every off-diagonal pair once; disjoint pairs are rotated
    together so one round costs O(n^2) vectorized work. Iteration stops when the
    off-diagonal Frobenius norm falls below ``tol`` times the full norm.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    a = 0.5 * (a + a.T)
    m = n + (n % 2)
    if m != n:
        # decoupled dummy index; its pair rotations are all identities
        padded = np.zeros((m, m))
        padded[:n, :n] = a
        a = padded
    v = np.eye(m)
    scale = np.linalg.norm(a)
    rounds = _round_robin(m) if m > 1 else []

    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if scale == 0.0 or off <= tol * scale:
            break
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            app = a[p, p]
            aqq = a[q, q]
            safe = np.where(active, apq, 1.0)
            tau = (aqq - app) / (2.0 * safe)
            t = np.sign(tau) / (np.abs(tau) + np.hypot(1.0, tau))
            t = np.where(tau == 0.0, 1.0, t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ap = a[:, p].copy()
            aq = a[:, q]
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap = a[p, :].copy()
            aq = a[q, :]
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            vp = v[:, p].copy()
            vq = v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq

    vals = np.diag(a)[:n].copy()
    vecs = v[:n, :n].copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


def top_eigh(
    a: np.ndarray,
    k: int,
    tol: float = 1e-12,
    max_iter: int = 5000,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Leading ``k`` eigenpairs of a symmetric positive semidefinite matrix.

    Small matrices go straight to :func:`jacobi_eigh`. Larger ones use orthogonal
    subspace iteration with an oversampled block, Rayleigh-Ritz on the block
    solved by Jacobi, stopping once the residual of the leading ``k`` Ritz
    pairs is below ``tol`` relative to the spectral scale.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if not 0 <= k <= n:
        raise ValueError(f"cannot extract {k} eigenpairs from a {n}x{n} matrix")
    if n <= 128 or 4 * k >= n:
        vals, vecs = jacobi_eigh(a, tol=tol)
        return vals[:k], vecs[:, :k]
    a = 0.5 * (a + a.T)
    block = min(n, max(2 * k, k + 8))
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, block)))
    vals = np.zeros(block)
    vecs = q
    for _ in range(max_iter):
        z = a @ q
        small = q.T @ z
        vals, w = jacobi_eigh(small, tol=tol)
        vecs = q @ w
        resid = a @ vecs[:, :k] - vecs[:, :k] * vals[:k]
        scale = max(abs(vals[0]), 1e-300)
        if np.linalg.norm(resid) <= tol * scale * np.sqrt(n):
            break
        q, _ = np.linalg.qr(z @ w)
    # re-orthonormalise against QR round-off
    vecs, r = np.linalg.qr(vecs[:, :k])
    vecs = vecs * np.sign(np.diag(r))
    return vals[:k], vecs
