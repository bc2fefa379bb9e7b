"""Brute-force ground truth from truncated sector Hamiltonians.

Matrix elements come straight from the boson algebra, not from the
recurrence coefficients:

* two-mode block ``kappa``: ``K_+|n> = sqrt((n+1)(n+2kappa)) |n+1>``,
  ``K_0|n> = (n+kappa)|n>``;
* k-photon block ``q``: basis ``|kn + r>`` in Fock space, with
  ``<kn+r+k| (a+)^k |kn+r> = sqrt(prod_{i=1..k} (kn+r+i))``.

In each parity sector the spin flip is absorbed into the basis, giving a
real symmetric tridiagonal matrix with diagonal ``level_n +- Delta (-1)^n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import jacobi_eigenvalues, sturm_lowest, tql_eigenvalues
from .model import Family, ModelParams, Parity, SectorLabel, check_block, check_sector, fock_offset

DEFAULT_TRUNCATION = 400


@dataclass(frozen=True)
class TridiagonalMatrix:
    diag: np.ndarray
    offdiag: np.ndarray
    sector: SectorLabel | None = None
    truncation: int = 0

    def __post_init__(self):
        if len(self.offdiag) != max(len(self.diag) - 1, 0):
            raise ValueError("offdiag must have length N - 1")
        if not (np.all(np.isfinite(self.diag)) and np.all(np.isfinite(self.offdiag))):
            raise ValueError("matrix entries must be finite")

    @property
    def order(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def reversed(self) -> "TridiagonalMatrix":
        return TridiagonalMatrix(self.diag[::-1].copy(), self.offdiag[::-1].copy(), self.sector, self.truncation)

    def norm(self) -> float:
        return float(np.max(np.abs(self.diag), initial=0.0) + 2.0 * np.max(np.abs(self.offdiag), initial=0.0))


@dataclass(frozen=True)
class DenseSymmetricMatrix:
    """Full block in the (boson ``n``) x (spin up/down) basis, index ``2n + s``."""

    entries: np.ndarray
    block: object = None
    truncation: int = 0

    @property
    def order(self) -> int:
        return self.entries.shape[0]


def _levels(params: ModelParams, block, n: np.ndarray) -> np.ndarray:
    """Boson part of the diagonal: ``2w(n + kappa - 1/2)`` or ``w (kn + r)``."""
    if params.family is Family.TWO_MODE:
        return 2.0 * params.omega * (n + float(block) - 0.5)
    return params.omega * (params.k * n + fock_offset(params, block))


def _hops(params: ModelParams, block, n: np.ndarray) -> np.ndarray:
    """``<n+1| raising |n>`` for ``n`` in the given array, times ``g``."""
    if params.family is Family.TWO_MODE:
        return params.g * np.sqrt((n + 1.0) * (n + 2.0 * float(block)))
    m = params.k * n + fock_offset(params, block)
    log_prod = sum(np.log(m + i) for i in range(1, params.k + 1))
    return params.g * np.exp(0.5 * log_prod)


def build_sector_tridiagonal(params: ModelParams, sector: SectorLabel, truncation: int) -> TridiagonalMatrix:
    if truncation < 2:
        raise ValueError("truncation must be at least 2")
    check_sector(params, sector)
    n = np.arange(truncation, dtype=float)
    alternating = np.where(np.arange(truncation) % 2 == 0, 1.0, -1.0)
    diag = _levels(params, sector.block, n) + sector.parity.sign * params.delta * alternating
    offdiag = _hops(params, sector.block, n[:-1])
    return TridiagonalMatrix(diag, offdiag, sector, truncation)


def build_full_block(params: ModelParams, block, truncation: int) -> DenseSymmetricMatrix:
    """``H = level(K_0) + Delta s_z + g s_x (raise + lower)`` on one block, spin explicit."""
    if truncation < 2:
        raise ValueError("truncation must be at least 2")
    block = check_block(params, block)
    n = np.arange(truncation, dtype=float)
    levels = _levels(params, block, n)
    hops = _hops(params, block, n[:-1])
    size = 2 * truncation
    a = np.zeros((size, size))
    up = 2 * np.arange(truncation)
    a[up, up] = levels + params.delta
    a[up + 1, up + 1] = levels - params.delta
    # s_x flips the spin while the boson operator moves n -> n +- 1
    lo = 2 * np.arange(truncation - 1)
    hi = lo + 2
    for i, j in ((lo, hi + 1), (lo + 1, hi)):
        a[i, j] = hops
        a[j, i] = hops
    return DenseSymmetricMatrix(a, block, truncation)


def eigs_tridiagonal(m: TridiagonalMatrix, count: int | None = None, vectors: bool = False):
    """Lowest ``count`` eigenvalues (all by default), ascending.

    Full spectra and eigenvector requests use implicit QL; partial spectra
    use Sturm bisection.
    """
    n = m.order
    if count is None:
        count = n
    if not 0 < count <= n:
        raise ValueError("count must be in 1..N")
    if vectors:
        vals, vecs = tql_eigenvalues(m.diag, m.offdiag, vectors=True)
        return vals[:count], vecs[:, :count]
    if count == n or count > n // 2:
        return tql_eigenvalues(m.diag, m.offdiag)[:count]
    return sturm_lowest(m.diag, m.offdiag, count)


def eigs_dense_symmetric(m: DenseSymmetricMatrix) -> np.ndarray:
    if m.order > 4000:
        raise ValueError("dense oracle is limited to order 4000")
    vals, _ = jacobi_eigenvalues(m.entries)
    return vals


def parity_union(params: ModelParams, block, truncation: int) -> np.ndarray:
    parts = [
        eigs_tridiagonal(build_sector_tridiagonal(params, SectorLabel(block, p), truncation)) for p in Parity
    ]
    return np.sort(np.concatenate(parts))


def trusted_ceiling(params: ModelParams, sector: SectorLabel, truncation: int) -> float:
    """Energies above the diagonal at ``N/2`` are polluted by the truncation edge."""
    m = build_sector_tridiagonal(params, sector, truncation)
    return float(m.diag[truncation // 2])


def oracle_levels(
    params: ModelParams,
    sector: SectorLabel,
    e_min: float,
    e_max: float,
    truncation: int = DEFAULT_TRUNCATION,
) -> np.ndarray:
    """Oracle eigenvalues inside ``[e_min, e_max]`` that lie below the trusted ceiling."""
    m = build_sector_tridiagonal(params, sector, truncation)
    ceiling = min(e_max, float(m.diag[truncation // 2]))
    count = 8
    while True:
        count = min(count, m.order)
        vals = eigs_tridiagonal(m, count)
        if vals[-1] > ceiling or count == m.order:
            break
        count *= 2
    return vals[(vals >= e_min) & (vals <= ceiling)]


@dataclass(frozen=True)
class ConvergenceTable:
    truncations: list[int]
    energies: np.ndarray  # (len(truncations), levels)
    increments: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "increments", np.abs(np.diff(self.energies, axis=0)))

    def rows(self):
        for i, n in enumerate(self.truncations):
            inc = self.increments[i - 1] if i else np.full(self.energies.shape[1], np.nan)
            for level in range(self.energies.shape[1]):
                yield n, level, float(self.energies[i, level]), float(inc[level])


def convergence_study(params: ModelParams, sector: SectorLabel, truncations, levels: int = 1) -> ConvergenceTable:
    truncations = [int(t) for t in truncations]
    if truncations != sorted(truncations):
        raise ValueError("truncations must be ascending")
    energies = np.array(
        [eigs_tridiagonal(build_sector_tridiagonal(params, sector, n), levels) for n in truncations]
    )
    return ConvergenceTable(truncations, energies)
