"""Three-term recurrences for the Bargmann-space series coefficients.

A wavefunction ``phi(z) = sum_n S_n z^n`` of one parity sector satisfies

    S_1 + C_0 S_0 = 0
    S_{n+1} + C_n S_n + D_n S_{n-1} = 0,   n >= 1

with ``C_n`` affine in the trial energy ``E`` and ``D_n > 0`` independent of it.
Sequences are carried in log space (``log|S_n|`` plus a sign) so that the
super-exponential decay of the coefficients never underflows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import MinimalSolutionUnavailable
from .model import (
    Family,
    ModelParams,
    SectorLabel,
    check_sector,
    classify_regime,
    characteristic_roots,
    fock_offset,
)

_BIG = 1e150
_SMALL = 1e-150
_RESCALE_EVERY = 50
_SEED = 1e-300


class SequenceKind(str, enum.Enum):
    FORWARD_DOMINANT = "forward-dominant"
    BACKWARD_MINIMAL = "backward-minimal"


@dataclass(frozen=True)
class CoefficientPair:
    c: float
    d: float
    n: int


@dataclass(frozen=True)
class LogSequence:
    """Real sequence stored as ``sign * exp(log_abs)``."""

    log_abs: np.ndarray
    sign: np.ndarray

    def __len__(self):
        return len(self.log_abs)

    @property
    def values(self) -> np.ndarray:
        """Plain floats; entries below the double range underflow to zero."""
        with np.errstate(under="ignore", over="ignore"):
            return self.sign * np.exp(self.log_abs)

    def ratio(self, n: int) -> float:
        """``x_{n+1} / x_n`` computed without leaving log space."""
        if self.sign[n] == 0:
            return math.copysign(math.inf, self.sign[n + 1]) if self.sign[n + 1] else math.nan
        return float(self.sign[n + 1] * self.sign[n] * math.exp(self.log_abs[n + 1] - self.log_abs[n]))


@dataclass(frozen=True)
class SolutionSequence(LogSequence):
    energy: float = 0.0
    sector: SectorLabel | None = None
    kind: SequenceKind = SequenceKind.FORWARD_DOMINANT
    params: ModelParams | None = None


@dataclass(frozen=True)
class OrthoPolySequence(LogSequence):
    energy: float = 0.0
    sector: SectorLabel | None = None


def _level_shift(params: ModelParams, sector: SectorLabel, n: np.ndarray) -> np.ndarray:
    """``2w(n + kappa - 1/2)`` or ``k w (n + q - 1/k^2)``."""
    b = float(sector.block)
    if params.family is Family.TWO_MODE:
        return 2.0 * params.omega * (n + b - 0.5)
    k = params.k
    return k * params.omega * (n + b - 1.0 / (k * k))


def _alternating(n: np.ndarray) -> np.ndarray:
    return np.where(n % 2 == 0, 1.0, -1.0)


def _shifts(params: ModelParams, sector: SectorLabel) -> list[float]:
    """The ``k`` offsets ``q - ((j-1)k + 1)/k^2`` of the k-photon products."""
    k = params.k
    return [float(sector.block - Fraction((j - 1) * k + 1, k * k)) for j in range(1, k + 1)]


def _denominators(params: ModelParams, sector: SectorLabel, n: np.ndarray) -> np.ndarray:
    """``(n+1)(n+2kappa)`` or ``k^k prod_j (n + 1 + q - ((j-1)k+1)/k^2)``."""
    if params.family is Family.TWO_MODE:
        return (n + 1.0) * (n + 2.0 * float(sector.block))
    out = np.full(n.shape, float(params.k**params.k))
    for s in _shifts(params, sector):
        out = out * (n + 1.0 + s)
    return out


def coefficient_arrays(params: ModelParams, sector: SectorLabel, energy: float, n_terms: int):
    """Arrays ``(c, d)`` for ``n = 0 .. n_terms-1``."""
    params.require_coupling()
    check_sector(params, sector)
    n = np.arange(n_terms, dtype=float)
    denom = _denominators(params, sector, n)
    spin = sector.parity.sign * params.delta * _alternating(np.arange(n_terms))
    c = (spin - energy + _level_shift(params, sector, n)) / (params.g * denom)
    return c, 1.0 / denom


def coeff_at(params: ModelParams, sector: SectorLabel, n: int, energy: float) -> CoefficientPair:
    if n < 0:
        raise ValueError("n must be non-negative")
    params.require_coupling()
    check_sector(params, sector)
    nf = float(n)
    denom = float(_denominators(params, sector, np.array([nf]))[0])
    spin = sector.parity.sign * params.delta * (1.0 if n % 2 == 0 else -1.0)
    shift = float(_level_shift(params, sector, np.array([nf]))[0])
    return CoefficientPair((spin - energy + shift) / (params.g * denom), 1.0 / denom, n)


def _to_log(mant: np.ndarray, scale: np.ndarray):
    sign = np.sign(mant)
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(mant)) + scale
    return log_abs, sign


def _forward(a: np.ndarray, b: np.ndarray, first: float, n_terms: int):
    """Iterate ``x_{n+1} = a_n x_n - b_n x_{n-1}`` from ``x_0 = 1``, ``x_1 = first``."""
    mant = np.zeros(n_terms)
    scale = np.zeros(n_terms)
    mant[0] = 1.0
    if n_terms == 1:
        return _to_log(mant, scale)
    prev, cur, log_scale = 1.0, first, 0.0
    mant[1] = cur
    for n in range(1, n_terms - 1):
        nxt = a[n] * cur - b[n] * prev
        size = max(abs(nxt), abs(cur))
        if size > _BIG or (0.0 < size < _SMALL):
            nxt /= size
            cur /= size
            log_scale += math.log(size)
        mant[n + 1] = nxt
        scale[n + 1] = log_scale
        prev, cur = cur, nxt
    return _to_log(mant, scale)


def _backward(c: np.ndarray, d: np.ndarray, top: int):
    """Run the ``n >= 1`` relations downward from ``x_{top+1} = 0``, ``x_top`` tiny.

    Returns the unnormalized ``(log|x_n|, sign)`` for ``n = 0 .. top``; the
    running rescale is folded into each entry's log.
    """
    mant = np.zeros(top + 1)
    scale = np.zeros(top + 1)
    nxt, cur, log_scale = 0.0, _SEED, 0.0
    mant[top] = cur
    for step, n in enumerate(range(top, 0, -1), start=1):
        prev = -(nxt + c[n] * cur) / d[n]
        size = max(abs(prev), abs(cur))
        if size > 0.0 and (step % _RESCALE_EVERY == 0 or size > _BIG or size < _SMALL):
            prev /= size
            cur /= size
            log_scale += math.log(size)
        mant[n - 1] = prev
        scale[n - 1] = log_scale
        nxt, cur = cur, prev
    return _to_log(mant, scale)


def forward_sequence(params: ModelParams, sector: SectorLabel, energy: float, n_terms: int) -> SolutionSequence:
    """Forward recursion from ``S_0 = 1``; returns ``S_0 .. S_{n_terms-1}``.

    For generic ``E`` this is contaminated by the dominant solution. It is
    meant for the polynomial identities and divergence diagnostics, not norms.
    """
    if n_terms < 2:
        raise ValueError("need at least two terms")
    c, d = coefficient_arrays(params, sector, energy, n_terms)
    log_abs, sign = _forward(-c, d, -c[0], n_terms)
    return SolutionSequence(log_abs, sign, energy, sector, SequenceKind.FORWARD_DOMINANT, params)


def _require_minimal(params: ModelParams) -> None:
    regime = classify_regime(params)
    if not regime.normalizable:
        raise MinimalSolutionUnavailable(
            f"{regime.verdict.value} regime: no minimal solution exists (ratio={regime.ratio})"
        )


def backward_minimal(
    params: ModelParams,
    sector: SectorLabel,
    energy: float,
    n_terms: int,
    buffer: int | None = None,
) -> SolutionSequence:
    """Miller's backward recursion for the minimal solution.

    Starts at ``M = n_terms - 1 + buffer`` with ``S_{M+1} = 0`` and a tiny
    ``S_M``, runs the ``n >= 1`` relations downward and normalizes
    ``S_0 = 1``. The ``n = 0`` relation is not imposed; it holds only at
    eigenvalues.
    """
    params.require_coupling()
    _require_minimal(params)
    if n_terms < 2:
        raise ValueError("need at least two terms")
    if buffer is None:
        buffer = max(50, n_terms)
    top = n_terms - 1 + buffer
    c, d = coefficient_arrays(params, sector, energy, top + 1)
    log_abs, sign = _backward(c, d, top)
    log_abs = log_abs[:n_terms] - log_abs[0]
    sign = sign[:n_terms] * sign[0]
    return SolutionSequence(log_abs, sign, energy, sector, SequenceKind.BACKWARD_MINIMAL, params)


def auto_depth(params: ModelParams, sector: SectorLabel, energy: float) -> int:
    """Backward-recursion depth adequate for double precision at ``energy``.

    Past the index where ``C_n`` changes sign the minimal/dominant ratio
    shrinks by ``|t1/t2|`` per step; 40 nats of separation is plenty.
    """
    if params.family is Family.TWO_MODE:
        spacing = 2.0 * params.omega
    else:
        spacing = params.k * params.omega
    onset = (abs(energy) + abs(params.delta)) / spacing + float(sector.block) + 1.0
    if params.family is Family.K_PHOTON and params.k == 1:
        steps = 60
    else:
        roots = characteristic_roots(params)
        steps = 40.0 / -math.log(abs(roots.t1 / roots.t2))
    return int(math.ceil(onset + steps)) + 20


def pincherle_residual(params: ModelParams, sector: SectorLabel, energy: float) -> float:
    """``S_1/S_0 + C_0(E)`` of the minimal solution; zero exactly at eigenvalues."""
    params.require_coupling()
    _require_minimal(params)
    depth = auto_depth(params, sector, energy)
    seq = backward_minimal(params, sector, energy, depth)
    c0 = coeff_at(params, sector, 0, energy).c
    return float(seq.ratio(0) + c0)


def _poly_factors(params: ModelParams, sector: SectorLabel, n: np.ndarray) -> np.ndarray:
    """``n(n + 2kappa - 1)`` or ``prod_j k (n + q - ((j-1)k+1)/k^2)``."""
    if params.family is Family.TWO_MODE:
        return n * (n + 2.0 * float(sector.block) - 1.0)
    out = np.ones(n.shape)
    for s in _shifts(params, sector):
        out = out * params.k * (n + s)
    return out


def ortho_poly_sequence(params: ModelParams, sector: SectorLabel, energy: float, n_terms: int) -> OrthoPolySequence:
    """Polynomials ``P_n(E)`` with ``P_0 = 1``, ``P_{-1} = 0`` and

        P_{n+1} = (E - d_n)/g * P_n - m_n P_{n-1}

    where ``d_n`` is the diagonal level of the sector and ``m_n`` the
    ``n``-th lowering factor of the block.
    """
    params.require_coupling()
    check_sector(params, sector)
    if n_terms < 1:
        raise ValueError("need at least one term")
    n = np.arange(n_terms, dtype=float)
    spin = sector.parity.sign * params.delta * _alternating(np.arange(n_terms))
    a = (energy - spin - _level_shift(params, sector, n)) / params.g
    b = _poly_factors(params, sector, n)
    log_abs, sign = _forward(a, b, a[0], n_terms)
    return OrthoPolySequence(log_abs, sign, energy, sector)


def log_poly_normalizer(params: ModelParams, sector: SectorLabel, n: np.ndarray) -> np.ndarray:
    """Log of the factor linking ``P_n`` to ``S_n``, relative to ``n = 0``.

    Two-mode: ``n! (n + 2kappa - 1)!``; k-photon:
    ``prod_j k^n Gamma(n + 1 + q - ((j-1)k+1)/k^2)``. Dividing by the ``n = 0``
    value matches the convention ``S_0 = P_0 = 1``.
    """
    n = np.asarray(n, dtype=float)
    lgam = np.vectorize(math.lgamma, otypes=[float])
    if params.family is Family.TWO_MODE:
        b2 = 2.0 * float(sector.block)
        out = lgam(n + 1.0) + lgam(n + b2)
        return out - math.lgamma(b2)
    out = np.zeros(n.shape)
    base = 0.0
    for s in _shifts(params, sector):
        out = out + n * math.log(params.k) + lgam(n + 1.0 + s)
        base += math.lgamma(1.0 + s)
    return out - base


def three_point_residuals(params: ModelParams, seq: SolutionSequence) -> np.ndarray:
    """Scaled residuals of the ``n >= 1`` relations, one per interior index."""
    c, d = coefficient_arrays(params, seq.sector, seq.energy, len(seq))
    out = []
    for n in range(1, len(seq) - 1):
        top = np.max(seq.log_abs[n - 1 : n + 2])
        if not np.isfinite(top):
            out.append(0.0)
            continue
        x = seq.sign[n - 1 : n + 2] * np.exp(seq.log_abs[n - 1 : n + 2] - top)
        out.append(abs(x[2] + c[n] * x[1] + d[n] * x[0]) / np.max(np.abs(x)))
    return np.array(out)


def log_bargmann_weight(params: ModelParams, sector: SectorLabel, n) -> np.ndarray:
    """``log ||z^n||^2``: ``n! (n + 2kappa - 1)!`` or ``[k(n + q - 1/k^2)]!``."""
    n = np.asarray(n, dtype=float)
    lgam = np.vectorize(math.lgamma, otypes=[float])
    if params.family is Family.TWO_MODE:
        return lgam(n + 1.0) + lgam(n + 2.0 * float(sector.block))
    r = fock_offset(params, sector.block)
    return lgam(params.k * n + r + 1.0)


def boundary_residual(params: ModelParams, sector: SectorLabel, energy: float, depth: int) -> float:
    """Row-0 residual ``<0|(H - E)|c>`` of the normalized backward-recursion state.

    ``c`` satisfies every row ``n >= 1`` of the sector eigenproblem, so this
    vanishes exactly at eigenvalues. It equals ``F(E)`` times the ``n = 0``
    amplitude of ``c`` and therefore has no poles; it is continuous in ``E``
    for a fixed ``depth``.
    """
    params.require_coupling()
    _require_minimal(params)
    c, d = coefficient_arrays(params, sector, energy, depth + 1)
    log_abs, sign = _backward(c, d, depth)
    log_w = log_bargmann_weight(params, sector, np.arange(depth + 1))
    terms = 2.0 * log_abs + log_w
    top = np.max(terms)
    log_norm = 0.5 * (top + math.log(np.sum(np.exp(terms - top))))
    ref = max(log_abs[0], log_abs[1])
    s0 = sign[0] * math.exp(log_abs[0] - ref)
    s1 = sign[1] * math.exp(log_abs[1] - ref)
    row = params.g * (s1 + c[0] * s0) / d[0]
    return float(row * math.exp(ref + 0.5 * log_w[0] - log_norm))
