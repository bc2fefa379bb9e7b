"""Continued fractions and the spectral function.

The regular energies of a sector are the zeros of

    F(E) = C_0 - D_1/(C_1 - D_2/(C_2 - ...))

i.e. the mismatch between the ``n = 0`` boundary ratio ``S_1/S_0 = -C_0`` and
the ratio of the minimal solution given by the tail fraction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import RegimeUnsupported
from .model import ModelParams, SectorLabel, classify_regime
from .recurrence import coefficient_arrays

TINY = 1e-30
DEFAULT_TOL = 1e-14
DEFAULT_MAX_TERMS = 100_000
_POLE_WINDOW = 5
_CHUNK = 64


@dataclass(frozen=True)
class CFResult:
    value: float
    converged: bool
    iterations: int
    suspected_pole: bool


def evaluate_cf(
    numerators: Iterable[float],
    denominators: Iterable[float],
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> CFResult:
    """Evaluate ``a1/(b1 + a2/(b2 + ...))`` by the modified Lentz method.

    The outer quotient is split off, ``value = a1 / G`` with
    ``G = b1 + a2/(b2 + ...)`` evaluated by Lentz, so a vanishing ``a1``
    gives exactly zero. Partial denominators that vanish are floored at
    ``TINY``; a floor within the last few terms marks a suspected pole.

    Examples
    --------
    >>> evaluate_cf(itertools.repeat(1.0), itertools.repeat(2.0)).value  # doctest: +ELLIPSIS
    0.41421356237309...
    """
    if tol <= 0 or max_terms < 1:
        raise ValueError("tol must be positive and max_terms at least 1")
    a_iter = iter(numerators)
    b_iter = iter(denominators)
    a1, b1 = next(a_iter), next(b_iter)
    if a1 == 0.0:
        return CFResult(0.0, True, 1, False)

    last_guard = None
    f = b1
    if f == 0.0:
        f, last_guard = TINY, 1
    c_val, d_val = f, 0.0
    converged = False
    terms = 1
    for j, a, b in zip(range(2, max_terms + 1), a_iter, b_iter):
        terms = j
        d_val = b + a * d_val
        if abs(d_val) < TINY:
            d_val, last_guard = TINY, j
        c_val = b + a / c_val
        if abs(c_val) < TINY:
            c_val, last_guard = TINY, j
        d_val = 1.0 / d_val
        step = c_val * d_val
        f *= step
        if abs(step - 1.0) < tol:
            converged = True
            break
    if max_terms == 1:
        converged = True
    outer_floor = abs(f) < TINY
    if outer_floor:
        f = TINY
    pole = outer_floor or (last_guard is not None and terms - last_guard < _POLE_WINDOW)
    return CFResult(a1 / f, converged, terms, pole)


def _coefficient_stream(params: ModelParams, sector: SectorLabel, energy: float):
    """Yield ``(c_n, d_n)`` for ``n = 0, 1, ...`` in numpy-computed chunks."""
    size = _CHUNK
    start = 0
    while True:
        c, d = coefficient_arrays(params, sector, energy, start + size)
        for n in range(start, start + size):
            yield float(c[n]), float(d[n])
        start += size
        size = min(size * 2, 4096)


def require_normalizable(params: ModelParams) -> None:
    regime = classify_regime(params)
    if not regime.normalizable:
        if params.k >= 3:
            reason = f"k = {params.k}: the model has no normalizable eigenstates and cannot be diagonalized"
        else:
            reason = f"coupling ratio {regime.ratio} >= 1: no normalizable entire wavefunctions"
        raise RegimeUnsupported(f"{regime.verdict.value}: {reason}")


def spectral_function(
    params: ModelParams,
    sector: SectorLabel,
    energy: float,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> CFResult:
    """``F(E) = C_0 + K_{n>=1}(-D_n / C_n)``; zeros are the sector's regular energies."""
    params.require_coupling()
    require_normalizable(params)
    stream = _coefficient_stream(params, sector, energy)
    c0, _ = next(stream)
    a_seq, b_seq = itertools.tee(stream)
    tail = evaluate_cf((-d for _, d in a_seq), (c for c, _ in b_seq), tol, max_terms)
    return CFResult(c0 + tail.value, tail.converged, tail.iterations, tail.suspected_pole)


def spectral_trace(params: ModelParams, sector: SectorLabel, energies, **kw) -> list[tuple[float, CFResult]]:
    return [(float(e), spectral_function(params, sector, float(e), **kw)) for e in np.asarray(energies, float)]
