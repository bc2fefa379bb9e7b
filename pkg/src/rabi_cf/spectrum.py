"""Root scanning, refinement and confirmation of sector spectra.

The energy grid is scanned with the pole-free boundary residual ``R(E)``
(see :func:`rabi_cf.recurrence.boundary_residual`), which changes sign at
exactly the same energies as the spectral function ``F(E)`` but has none of
its poles. ``F`` is sampled on the same grid: sign changes of ``F`` that are
not matched by ``R`` are pole crossings and are recorded as rejected.

Every refined root must then satisfy both zero conditions, ``|F(E)|`` and
``|S_1/S_0 + C_0|`` below the confirmation tolerance.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .contfrac import require_normalizable, spectral_function
from .errors import IllConditionedRoot, NoConvergence, NumericalFailure, PoleArtifact
from .model import ModelParams, SectorLabel, check_sector
from .recurrence import auto_depth, boundary_residual, pincherle_residual

REFINE_TOL = 1e-10
CONFIRM_TOL = 1e-8
CROSSCHECK_TOL = 1e-8
MAX_ITER = 200
MIN_GRID = 16
GRID_STEP = 1.0 / 20.0  # in units of omega
_POLISH_XTOL = 1e-300  # stop on brentq's relative tolerance instead


def worker_count() -> int:
    """Worker cap from ``RABI_CF_THREADS``; defaults to the machine's CPU count."""
    raw = os.environ.get("RABI_CF_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"RABI_CF_THREADS must be a positive integer, got {raw!r}") from None
        if value < 1:
            raise ValueError(f"RABI_CF_THREADS must be a positive integer, got {raw!r}")
        return value
    return os.cpu_count() or 1


def ordered_map(fn, items) -> list:
    """``[fn(x) for x in items]``, possibly concurrent; output order is input order."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class EnergyBracket:
    """``[lo, hi]`` with a sign change of the scanned function (``f_lo``, ``f_hi``)."""

    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if np.sign(self.f_lo) == np.sign(self.f_hi):
            raise ValueError("bracket endpoints must have opposite signs")


@dataclass
class Eigenvalue:
    energy: float
    sector: SectorLabel
    f_residual: float
    pincherle_residual: float
    oracle_gap: float | None = None


@dataclass(frozen=True)
class GridSample:
    energy: float
    f_value: float
    suspected_pole: bool
    r_value: float


@dataclass
class ScanDiagnostics:
    grid_points: int
    depth: int
    samples: list[GridSample] = field(default_factory=list)
    rejected_poles: list[tuple[float, float]] = field(default_factory=list)
    pole_artifacts: list[tuple[float, float]] = field(default_factory=list)
    ill_conditioned: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "grid_points": self.grid_points,
            "depth": self.depth,
            "rejected_poles": [list(p) for p in self.rejected_poles],
            "pole_artifacts": [list(p) for p in self.pole_artifacts],
            "ill_conditioned": list(self.ill_conditioned),
        }


@dataclass
class SpectrumResult:
    params: ModelParams
    sector: SectorLabel
    window: tuple[float, float]
    eigenvalues: list[Eigenvalue]
    diagnostics: ScanDiagnostics

    @property
    def energies(self) -> np.ndarray:
        return np.array([e.energy for e in self.eigenvalues])

    def root_energies(self) -> np.ndarray:
        """Confirmed eigenvalues plus genuine roots rejected as ill-conditioned."""
        extra = [d["energy"] for d in self.diagnostics.ill_conditioned]
        return np.sort(np.concatenate([self.energies, np.asarray(extra, float)]))


def default_window(params: ModelParams, sector: SectorLabel, levels: int) -> tuple[float, float]:
    """``[-2w, 2w(L + 2 block)]`` for ``L`` requested levels."""
    w = params.omega
    return -2.0 * w, 2.0 * w * (levels + 2.0 * float(sector.block))


def default_grid_points(params: ModelParams, e_min: float, e_max: float) -> int:
    return max(MIN_GRID, int(math.ceil((e_max - e_min) / (GRID_STEP * params.omega))) + 1)


def scan_depth(params: ModelParams, sector: SectorLabel, e_min: float, e_max: float) -> int:
    """One backward-recursion depth for the whole window, so ``R`` is continuous."""
    return auto_depth(params, sector, max(abs(e_min), abs(e_max)))


def _check_window(params, sector, e_min, e_max, grid_points):
    params.require_coupling()
    require_normalizable(params)
    check_sector(params, sector)
    if not e_min < e_max:
        raise ValueError(f"empty window [{e_min}, {e_max}]")
    if grid_points < MIN_GRID:
        raise ValueError(f"grid_points must be at least {MIN_GRID}")


def _sample(params, sector, depth, energy) -> GridSample:
    cf = spectral_function(params, sector, energy)
    r = boundary_residual(params, sector, energy, depth)
    return GridSample(energy, cf.value, cf.suspected_pole, r)


def _scan(params, sector, e_min, e_max, grid_points, depth=None):
    _check_window(params, sector, e_min, e_max, grid_points)
    if depth is None:
        depth = scan_depth(params, sector, e_min, e_max)
    grid = np.linspace(e_min, e_max, grid_points)
    samples = ordered_map(lambda e: _sample(params, sector, depth, float(e)), grid)
    diag = ScanDiagnostics(grid_points, depth, samples)
    brackets = []
    for a, b in zip(samples, samples[1:]):
        r_change = np.sign(a.r_value) != np.sign(b.r_value)
        if a.r_value == 0.0 and a is samples[0]:
            r_change = True
        f_change = np.sign(a.f_value) != np.sign(b.f_value)
        if r_change:
            lo_val = a.r_value if a.r_value != 0.0 else -np.copysign(1e-300, b.r_value)
            brackets.append(EnergyBracket(a.energy, b.energy, lo_val, b.r_value))
        elif f_change or a.suspected_pole or b.suspected_pole:
            diag.rejected_poles.append((a.energy, b.energy))
    return brackets, diag


def scan_brackets(params: ModelParams, sector: SectorLabel, e_min: float, e_max: float,
                  grid_points: int, depth: int | None = None) -> list[EnergyBracket]:
    """Uniform-grid scan; returns the brackets of genuine sign changes.

    Pole crossings of ``F`` are excluded (see :func:`compute_spectrum` for the
    diagnostics that record them).
    """
    return _scan(params, sector, e_min, e_max, grid_points, depth)[0]


def _brent(fn, lo, hi, xtol):
    """Brent's method to width ``xtol``, then polished to machine precision.

    The polish matters: near a pinched pole ``F`` is so steep that a root
    known only to ``1e-10`` leaves ``|F|`` far above the confirmation level.
    """
    root = _brent_once(fn, lo, hi, xtol)
    step = max(xtol, 4.0 * np.finfo(float).eps * abs(root))
    a, b = max(lo, root - step), min(hi, root + step)
    fa, fb = fn(a), fn(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) != np.sign(fb):
        return _brent_once(fn, a, b, _POLISH_XTOL)
    return root


def _brent_once(fn, lo, hi, xtol):
    try:
        root, info = brentq(fn, lo, hi, xtol=xtol, maxiter=MAX_ITER, full_output=True, disp=False)
    except RuntimeError as exc:  # pragma: no cover - disp=False reports through info
        raise NoConvergence(str(exc)) from exc
    if not info.converged:
        raise NoConvergence(f"root refinement hit the {MAX_ITER}-iteration cap in [{lo}, {hi}]")
    return float(root)


def refine_root(params: ModelParams, sector: SectorLabel, bracket: EnergyBracket,
                tol: float = REFINE_TOL, depth: int | None = None,
                confirm_tol: float = CONFIRM_TOL) -> Eigenvalue:
    """Brent refinement to width ``tol * omega`` followed by dual confirmation.

    The pole-free residual is refined when it changes sign over the bracket;
    otherwise ``F`` itself is, which is how pole-induced brackets get caught.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if depth is None:
        depth = scan_depth(params, sector, bracket.lo, bracket.hi)
    xtol = tol * params.omega

    def r_fn(e):
        return boundary_residual(params, sector, e, depth)

    def f_fn(e):
        return spectral_function(params, sector, e).value

    r_lo, r_hi = r_fn(bracket.lo), r_fn(bracket.hi)
    genuine = r_lo == 0.0 or r_hi == 0.0 or np.sign(r_lo) != np.sign(r_hi)
    if genuine:
        root = _brent(r_fn, bracket.lo, bracket.hi, xtol)
    else:
        f_lo, f_hi = f_fn(bracket.lo), f_fn(bracket.hi)
        if np.sign(f_lo) == np.sign(f_hi):
            raise PoleArtifact(f"no sign change of F or R in [{bracket.lo}, {bracket.hi}]")
        root = _brent(f_fn, bracket.lo, bracket.hi, xtol)
    f_res = f_fn(root)
    p_res = pincherle_residual(params, sector, root)
    if abs(f_res) <= confirm_tol and abs(p_res) <= confirm_tol:
        return Eigenvalue(root, sector, f_res, p_res)
    if genuine:
        h = 1e-9 * max(params.omega, abs(root))
        slope = (f_fn(root + h) - f_fn(root - h)) / (2.0 * h)
        floor = abs(slope) * float(np.spacing(root)) / 2.0
        raise IllConditionedRoot(
            f"root {root!r} is genuine but |F| = {abs(f_res):.3g}, |Pincherle| = {abs(p_res):.3g} "
            f"exceed {confirm_tol:g}; double-precision floor {floor:.3g}",
            root, f_res, p_res, floor,
        )
    raise PoleArtifact(f"sign change at {root!r} is a pole of F (|F| = {abs(f_res):.3g})")


def compute_spectrum(params: ModelParams, sector: SectorLabel, e_min: float, e_max: float,
                     grid_points: int | None = None, tol: float = REFINE_TOL,
                     confirm_tol: float = CONFIRM_TOL) -> SpectrumResult:
    """Scan, refine, confirm and deduplicate the regular spectrum in a window."""
    if grid_points is None:
        grid_points = default_grid_points(params, e_min, e_max)
    brackets, diag = _scan(params, sector, e_min, e_max, grid_points)

    def attempt(bracket):
        try:
            return refine_root(params, sector, bracket, tol, diag.depth, confirm_tol)
        except NumericalFailure as exc:
            return exc, bracket

    found = []
    for bracket, outcome in zip(brackets, ordered_map(attempt, brackets)):
        if isinstance(outcome, Eigenvalue):
            found.append(outcome)
        elif isinstance(outcome[0], IllConditionedRoot):
            diag.ill_conditioned.append(outcome[0].as_dict())
        elif isinstance(outcome[0], PoleArtifact):
            diag.pole_artifacts.append((bracket.lo, bracket.hi))
        else:
            raise outcome[0]
    found.sort(key=lambda ev: ev.energy)
    merged: list[Eigenvalue] = []
    for ev in found:
        if merged and ev.energy - merged[-1].energy < 10.0 * tol * params.omega:
            continue
        merged.append(ev)
    merged = [ev for ev in merged if e_min <= ev.energy <= e_max]
    return SpectrumResult(params, sector, (float(e_min), float(e_max)), merged, diag)


@dataclass
class CrosscheckReport:
    matched: list[tuple[float, float, float]]
    unmatched_cf: list[float]
    unmatched_oracle: list[float]
    match_tol: float

    @property
    def max_gap(self) -> float:
        return max((abs(g) for _, _, g in self.matched), default=0.0)

    @property
    def ok(self) -> bool:
        return not self.unmatched_cf and not self.unmatched_oracle and self.max_gap <= self.match_tol


def crosscheck_oracle(spec: SpectrumResult, oracle_eigs, match_tol: float = CROSSCHECK_TOL) -> CrosscheckReport:
    """Greedy nearest matching of CF roots to oracle levels.

    Pairs are taken in order of increasing distance; each level is used at most
    once. Matches farther apart than ``match_tol * omega`` still fill
    ``oracle_gap`` but are also listed as unmatched on both sides.
    """
    oracle = [float(x) for x in np.sort(np.asarray(oracle_eigs, float))]
    cf = spec.eigenvalues
    pairs = sorted(
        ((abs(ev.energy - o), i, j) for i, ev in enumerate(cf) for j, o in enumerate(oracle)),
    )
    used_cf, used_or = set(), set()
    matched = []
    tol = match_tol * spec.params.omega
    for dist, i, j in pairs:
        if i in used_cf or j in used_or:
            continue
        used_cf.add(i)
        used_or.add(j)
        cf[i].oracle_gap = cf[i].energy - oracle[j]
        if dist <= tol:
            matched.append((cf[i].energy, oracle[j], cf[i].oracle_gap))
    good_cf = {i for i, ev in enumerate(cf) if ev.oracle_gap is not None and abs(ev.oracle_gap) <= tol}
    good_or = {oracle.index(o) for _, o, _ in matched}
    unmatched_cf = [ev.energy for i, ev in enumerate(cf) if i not in good_cf]
    unmatched_or = [o for j, o in enumerate(oracle) if j not in good_or]
    matched.sort()
    return CrosscheckReport(matched, unmatched_cf, unmatched_or, match_tol)
