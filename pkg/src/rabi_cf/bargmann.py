"""Normalizability diagnostics in the Bargmann-Hilbert spaces.

For ``f(z) = sum_n c_n z^n`` the squared norm is ``sum_n |c_n|^2 w_n`` with
``w_n = n! (n + 2kappa - 1)!`` (two-mode) or ``w_n = [k(n + q - 1/k^2)]!``
(k-photon). All terms are handled as logs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RegimeMismatch, TooFewTerms
from .model import Family, ModelParams, SectorLabel, characteristic_roots, classify_regime
from .recurrence import SequenceKind, SolutionSequence, forward_sequence, log_bargmann_weight

MIN_VERDICT_TERMS = 64
# Frozen after the calibration run recorded in docs/calibration.md.
DIVERGENCE_N_MAX = 500
DIVERGENCE_STALL_TOL = 1e-6
DIVERGENCE_GROWTH_FACTOR = 1e6


class NormVerdict(str, enum.Enum):
    CONVERGING = "converging"
    DIVERGING = "diverging"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class NormEstimate:
    log_terms: np.ndarray
    ratio_sequence: np.ndarray
    predicted_limit: float | None
    verdict: NormVerdict

    @property
    def log_norm(self) -> float:
        finite = self.log_terms[np.isfinite(self.log_terms)]
        if finite.size == 0:
            return -math.inf
        top = float(np.max(finite))
        return top + math.log(float(np.sum(np.exp(finite - top))))


@dataclass(frozen=True)
class VerdictSummary:
    verdict: NormVerdict
    tail_mean: float
    tail_std: float
    tail_terms: int


def predicted_ratio_limit(params: ModelParams, kind: SequenceKind) -> float | None:
    """``|t|^2`` (two-mode) or ``4|t|^2`` (k = 2) for the root matching ``kind``."""
    if params.g == 0.0 or not classify_regime(params).normalizable:
        return None
    if params.family is Family.K_PHOTON and params.k != 2:
        return None
    roots = characteristic_roots(params)
    t = roots.t1 if kind is SequenceKind.BACKWARD_MINIMAL else roots.t2
    factor = 1.0 if params.family is Family.TWO_MODE else 4.0
    return factor * abs(t) ** 2


def _tail_summary(ratios: np.ndarray) -> VerdictSummary:
    quarter = max(len(ratios) // 4, 1)
    tail = ratios[-quarter:]
    tail = tail[np.isfinite(tail)]
    if tail.size < 2:
        return VerdictSummary(NormVerdict.INCONCLUSIVE, math.nan, math.nan, int(tail.size))
    mean, std = float(np.mean(tail)), float(np.std(tail))
    if 1.0 - mean >= 3.0 * std:
        verdict = NormVerdict.CONVERGING
    elif mean - 1.0 >= 3.0 * std:
        verdict = NormVerdict.DIVERGING
    else:
        verdict = NormVerdict.INCONCLUSIVE
    return VerdictSummary(verdict, mean, std, int(tail.size))


def norm_log_terms(coeffs: SolutionSequence, params: ModelParams | None = None) -> NormEstimate:
    """Log norm terms ``log(|c_n|^2 w_n)`` and their consecutive ratios."""
    params = params or coeffs.params
    if params is None:
        raise ValueError("model parameters are required for the Bargmann weights")
    n = np.arange(len(coeffs))
    log_terms = 2.0 * coeffs.log_abs + log_bargmann_weight(params, coeffs.sector, n)
    with np.errstate(invalid="ignore", over="ignore"):
        ratios = np.exp(np.diff(log_terms))
    predicted = predicted_ratio_limit(params, coeffs.kind)
    if not np.any(np.isfinite(log_terms[1:])):
        verdict = NormVerdict.CONVERGING
    elif len(ratios) >= MIN_VERDICT_TERMS:
        verdict = _tail_summary(ratios).verdict
    else:
        verdict = NormVerdict.INCONCLUSIVE
    return NormEstimate(log_terms, ratios, predicted, verdict)


def ratio_verdict(est: NormEstimate) -> VerdictSummary:
    """Ratio-test verdict from the last quartile of term ratios.

    Converging (diverging) when the tail mean sits below (above) 1 by at least
    three tail standard deviations; otherwise inconclusive.
    """
    if len(est.ratio_sequence) < MIN_VERDICT_TERMS:
        raise TooFewTerms(f"need at least {MIN_VERDICT_TERMS} ratios, got {len(est.ratio_sequence)}")
    return _tail_summary(est.ratio_sequence)


@dataclass(frozen=True)
class WavefunctionSeries:
    coefficients: np.ndarray
    z: complex
    truncation: int

    @classmethod
    def from_sequence(cls, seq: SolutionSequence, z: complex, truncation: int | None = None):
        return cls(seq.values, z, len(seq) if truncation is None else truncation)


def eval_wavefunction(w: WavefunctionSeries) -> tuple[complex, float]:
    """Horner sum of the first ``truncation`` terms and a geometric tail bound."""
    coeffs = np.asarray(w.coefficients)
    if w.truncation > len(coeffs) or w.truncation < 1:
        raise ValueError("truncation must be in 1..len(coefficients)")
    z = complex(w.z)
    acc = 0j
    for c in coeffs[w.truncation - 1 :: -1]:
        acc = acc * z + c
    if w.truncation < 2:
        return acc, math.inf if z != 0 else 0.0
    last = abs(coeffs[w.truncation - 1]) * abs(z) ** (w.truncation - 1)
    before = abs(coeffs[w.truncation - 2]) * abs(z) ** (w.truncation - 2)
    if last == 0.0:
        return acc, 0.0
    ratio = last / before if before else math.inf
    bound = last * ratio / (1.0 - ratio) if ratio < 1.0 else math.inf
    return acc, bound


@dataclass(frozen=True)
class PartialNormGrowth:
    """Growth of the partial norm sums of one coefficient sequence."""

    energy: float
    log10_growth_over_first: float
    late_relative_growth: float
    tail_exponent: float
    flagged: bool


def partial_norm_growth(coeffs: SolutionSequence, params: ModelParams | None = None,
                        stall_tol: float = DIVERGENCE_STALL_TOL) -> PartialNormGrowth:
    """Flag sequences whose partial norm sums are still growing over their last half.

    ``late_relative_growth`` is ``S(N)/S(N/2) - 1``. Geometric (normalizable)
    tails make it vanish to machine precision; algebraic tails keep it well
    above ``stall_tol``. ``tail_exponent`` fits ``term ~ n^p`` on the upper
    envelope of the last half; ``p <= -1`` is summable, ``p > -1`` is not.
    """
    est = norm_log_terms(coeffs, params)
    lt = est.log_terms
    partial = np.logaddexp.accumulate(lt)
    n = len(lt)
    half = n // 2
    late = math.expm1(float(partial[-1] - partial[half - 1]))
    growth = float(partial[-1] - lt[0]) / math.log(10.0)
    window = max(n // 20, 2)
    lo = np.arange(half, half + window)
    hi = np.arange(n - window, n)
    env_lo, env_hi = float(np.max(lt[lo])), float(np.max(lt[hi]))
    centre_lo, centre_hi = half + window / 2.0, n - window / 2.0
    exponent = (env_hi - env_lo) / math.log(centre_hi / centre_lo) if np.isfinite(env_lo + env_hi) else -math.inf
    return PartialNormGrowth(coeffs.energy, growth, late, exponent, late > stall_tol)


@dataclass(frozen=True)
class DivergenceReport:
    params: ModelParams
    sector: SectorLabel
    n_max: int
    samples: list[PartialNormGrowth] = field(default_factory=list)

    @property
    def all_flagged(self) -> bool:
        return all(s.flagged for s in self.samples)


def divergence_report(params: ModelParams, sector: SectorLabel, energies, n_max: int = DIVERGENCE_N_MAX,
                      stall_tol: float = DIVERGENCE_STALL_TOL) -> DivergenceReport:
    """Forward-recursion partial norms for parameters outside the normalizable regime."""
    regime = classify_regime(params)
    if regime.normalizable:
        raise RegimeMismatch("divergence_report needs non-normalizable or k >= 3 parameters")
    samples = [
        partial_norm_growth(forward_sequence(params, sector, float(e), n_max), params, stall_tol)
        for e in energies
    ]
    return DivergenceReport(params, sector, n_max, samples)
