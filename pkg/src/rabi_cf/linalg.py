"""Small self-contained symmetric eigensolvers used by the oracle.

Kept free of LAPACK so the ground-truth path is auditable end to end:

* ``tql_eigenvalues``: implicit-shift QL on a symmetric tridiagonal matrix,
  optionally accumulating eigenvectors.
* ``sturm_lowest``: Sturm-sequence bisection for the lowest eigenvalues only.
* ``jacobi_eigenvalues``: cyclic Jacobi rotations on a dense symmetric
  matrix, applied in round-robin order so each round is one vectorized step.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NoConvergence

_EPS = np.finfo(float).eps


def tql_eigenvalues(diag, offdiag, vectors: bool = False, max_iter: int = 60):
    """All eigenvalues (ascending) of the tridiagonal matrix, plus vectors if asked.

    Implicit Wilkinson-shifted QL sweeps with deflation on negligible
    off-diagonals.
    """
    d = [float(x) for x in diag]
    n = len(d)
    e = [float(x) for x in offdiag] + [0.0]
    if len(e) != n:
        raise ValueError("offdiag must have length len(diag) - 1")
    z = np.eye(n) if vectors else None
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise NoConvergence(f"QL did not converge for eigenvalue {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    zi = z[:, i].copy()
                    z[:, i] = c * zi - s * z[:, i + 1]
                    z[:, i + 1] = s * zi + c * z[:, i + 1]
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    d = np.array(d)
    order = np.argsort(d, kind="stable")
    if z is None:
        return d[order]
    return d[order], z[:, order]


def sturm_count(diag: np.ndarray, offdiag: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Number of eigenvalues strictly below each shift in ``x``."""
    diag = np.asarray(diag, float)
    off2 = np.asarray(offdiag, float) ** 2
    x = np.asarray(x, float)
    scale = max(float(np.max(np.abs(diag), initial=0.0)), float(np.max(np.sqrt(off2), initial=0.0)), 1.0)
    floor = _EPS * scale
    count = np.zeros(x.shape, dtype=int)
    q = diag[0] - x
    q = np.where(q == 0.0, -floor, q)
    count += q < 0
    for i in range(1, len(diag)):
        q = diag[i] - x - off2[i - 1] / q
        q = np.where(np.abs(q) < floor, -floor, q)
        count += q < 0
    return count


def sturm_lowest(diag, offdiag, count: int) -> np.ndarray:
    """Lowest ``count`` eigenvalues by simultaneous bisection."""
    diag = np.asarray(diag, float)
    offdiag = np.asarray(offdiag, float)
    n = len(diag)
    if not 0 < count <= n:
        raise ValueError("count must be in 1..N")
    radius = np.zeros(n)
    radius[:-1] += np.abs(offdiag)
    radius[1:] += np.abs(offdiag)
    lo_bound = float(np.min(diag - radius))
    hi_bound = float(np.max(diag + radius))
    lo = np.full(count, lo_bound)
    hi = np.full(count, hi_bound)
    target = np.arange(1, count + 1)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = sturm_count(diag, offdiag, mid) >= target
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
        width = hi - lo
        if np.all(width <= 2.0 * _EPS * np.maximum(np.abs(lo), np.abs(hi)) + 1e-300):
            break
    return 0.5 * (lo + hi)


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint index pairs covering every (p, q) once per sweep."""
    players = list(range(n + (n % 2)))
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        rounds.append((np.array([a for a, _ in pairs]), np.array([b for _, b in pairs])))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigenvalues(matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 50):
    """Eigenvalues (ascending) of a dense symmetric matrix by cyclic Jacobi.

    Stops once the off-diagonal Frobenius norm is below ``tol * ||A||_F``.
    Returns ``(eigenvalues, sweeps)``.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 1:
        return a.diagonal().copy(), 0
    norm = float(np.linalg.norm(a))
    rounds = _round_robin(n)
    sweeps = 0
    while True:
        off = float(np.linalg.norm(a - np.diag(a.diagonal())))
        if off <= tol * norm or norm == 0.0:
            break
        if sweeps >= max_sweeps:
            raise NoConvergence(f"Jacobi: off-diagonal norm {off:.3e} after {sweeps} sweeps")
        sweeps += 1
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > _EPS * _EPS * norm
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            app, aqq = a[p, p], a[q, q]
            theta = (aqq - app) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rp, rq = a[p, :], a[q, :]
            a[p, :] = c[:, None] * rp - s[:, None] * rq
            a[q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = a[:, p], a[:, q]
            a[:, p] = cp * c - cq * s
            a[:, q] = cp * s + cq * c
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            a[q, p] = 0.0
    return np.sort(a.diagonal()), sweeps
