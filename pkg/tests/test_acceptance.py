"""Acceptance criteria 1-10, one test each.

Each test records a one-line verdict that is printed in the "acceptance
criteria" section of the pytest terminal summary.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import record_criterion
from rabi_cf.bargmann import divergence_report, norm_log_terms, partial_norm_growth
from rabi_cf.cli import run
from rabi_cf.contfrac import spectral_function
from rabi_cf.model import ModelParams, Parity, SectorLabel, Verdict, characteristic_roots, classify_regime
from rabi_cf.oracle import (
    build_full_block,
    build_sector_tridiagonal,
    convergence_study,
    eigs_dense_symmetric,
    eigs_tridiagonal,
    oracle_levels,
    parity_union,
)
from rabi_cf.recurrence import backward_minimal, forward_sequence, ortho_poly_sequence, pincherle_residual
from rabi_cf.spectrum import compute_spectrum, ordered_map

# Frozen after the calibration run in docs/calibration.md.
K3_INCREMENT_FLOOR = 1e-2  # times omega
K2_INCREMENT_CEILING = 1e-8  # times omega

TWO_MODE = ModelParams.two_mode(1.0, 0.7, 0.5)
TWO_PHOTON = ModelParams.k_photon(2, 1.0, 0.3, 0.2)


def _sectors(blocks):
    return [SectorLabel(Fraction(b), p) for b in blocks for p in Parity]


def _six_lowest(params, sectors, window):
    """Per sector: CF roots (accepted plus ill-conditioned), accepted results, oracle levels."""

    def one(s):
        result = compute_spectrum(params, s, *window)
        return s, result, oracle_levels(params, s, *window, truncation=400)

    return ordered_map(one, sectors)


def test_criterion_01_regime_gate():
    table = [
        (ModelParams.two_mode(1, 0, 0.5), Verdict.NORMALIZABLE),
        (ModelParams.two_mode(1, 0, 0.99), Verdict.NORMALIZABLE),
        (ModelParams.two_mode(1, 0, 1.0), Verdict.NON_NORMALIZABLE),
        (ModelParams.two_mode(1, 0, 1.5), Verdict.NON_NORMALIZABLE),
        (ModelParams.k_photon(2, 1, 0, 0.25), Verdict.NORMALIZABLE),
        (ModelParams.k_photon(2, 1, 0, 0.495), Verdict.NORMALIZABLE),
        (ModelParams.k_photon(2, 1, 0, 0.5), Verdict.NON_NORMALIZABLE),
        (ModelParams.k_photon(2, 1, 0, 0.6), Verdict.NON_NORMALIZABLE),
        (ModelParams.k_photon(3, 1, 0, 0.1), Verdict.UNDEFINED_K_GE_3),
    ]
    start = time.perf_counter()
    got = [classify_regime(p).verdict for p, _ in table]
    elapsed = time.perf_counter() - start
    exact = sum(g is want for g, (_, want) in zip(got, table))
    ok = exact == len(table) and elapsed < 1.0
    record_criterion(1, ok, f"regime gate: {exact}/{len(table)} exact verdicts in {elapsed * 1e3:.2f} ms")
    assert ok


def test_criterion_02_two_mode_oracle_agreement():
    start = time.perf_counter()
    runs = _six_lowest(TWO_MODE, _sectors(["1/2", "1"]), (-1.0, 12.0))
    elapsed = time.perf_counter() - start
    worst, counts = 0.0, []
    for s, result, oracle in runs:
        roots = result.energies[:6]
        counts.append(len(roots))
        worst = max(worst, float(np.max(np.abs(roots - oracle[:6]))) if len(roots) == 6 else math.inf)
    ok = worst <= 1e-8 and elapsed <= 10.0 and counts == [6] * 4
    record_criterion(2, ok, f"two-mode CF vs N=400 oracle: 4 sectors x 6 accepted roots, "
                            f"max |gap| = {worst:.2e}, runtime {elapsed:.2f} s")
    assert ok


def test_criterion_03_two_photon_oracle_agreement():
    runs = _six_lowest(TWO_PHOTON, _sectors(["1/4", "3/4"]), (-1.0, 12.0))
    worst, ill_used = 0.0, 0
    for s, result, oracle in runs:
        roots = result.root_energies()[:6]
        accepted = set(result.energies.tolist())
        ill_used += sum(1 for r in roots if r not in accepted)
        assert len(roots) == 6 and len(oracle) >= 6
        worst = max(worst, float(np.max(np.abs(roots - oracle[:6]))))
    ok = worst <= 1e-8
    record_criterion(3, ok, f"k=2 CF vs N=400 oracle: 4 sectors x 6 lowest roots, max |gap| = {worst:.2e} "
                            f"({ill_used} of 24 roots at the double-precision residual floor, "
                            f"not accepted as eigenvalues; see criterion 5)")
    assert ok


def _closed_form_sectors():
    tm = ModelParams.two_mode(1, 0, 0.5)
    kp = ModelParams.k_photon(2, 1, 0, 0.25)
    for b in ("1/2", "1"):
        yield tm, Fraction(b), lambda n, x: 2 * math.sqrt(1 - 0.25) * (n + x) - 1
    for b in ("1/4", "3/4"):
        yield kp, Fraction(b), lambda n, x: 2 * math.sqrt(1 - 4 * 0.0625) * (n + x) - 0.5


def test_criterion_04_closed_forms():
    cf_worst = oracle_worst = 0.0
    for params, block, formula in _closed_form_sectors():
        exact = np.array([formula(n, float(block)) for n in range(10)])
        for parity in Parity:
            s = SectorLabel(block, parity)
            for n_trunc in (400, 800):
                oracle = eigs_tridiagonal(build_sector_tridiagonal(params, s, n_trunc), 10)
                oracle_worst = max(oracle_worst, float(np.max(np.abs(oracle - exact))))
            roots = compute_spectrum(params, s, -1.0, exact[-1] + 0.5).root_energies()[:10]
            cf_worst = max(cf_worst, float(np.max(np.abs(roots - exact))) if len(roots) == 10 else math.inf)
    free_worst = 0.0
    weak = ModelParams.two_mode(1, 0.7, 1e-6)
    for s in _sectors(["1/2", "1"]):
        n = np.arange(400)
        diagonal = np.sort(2 * (n + float(s.block) - 0.5) + s.parity.sign * 0.7 * np.where(n % 2 == 0, 1, -1))
        oracle = eigs_tridiagonal(build_sector_tridiagonal(weak, s, 400), 20)
        free_worst = max(free_worst, float(np.max(np.abs(oracle - diagonal[:20]))))
    ok = cf_worst <= 1e-10 and oracle_worst <= 1e-10 and free_worst <= 1e-4
    record_criterion(4, ok, f"Delta=0 closed forms n<=9: CF max err {cf_worst:.2e}, oracle N=400/800 max err "
                            f"{oracle_worst:.2e}; g=1e-6 vs diagonal formula {free_worst:.2e}")
    assert ok


def test_criterion_05_dual_zero():
    accepted = rejected = 0
    worst_at_root, weakest_mid = 0.0, math.inf
    floors = []
    for params, blocks, window in ((TWO_MODE, ["1/2", "1"], (-1.0, 12.0)), (TWO_PHOTON, ["1/4", "3/4"], (-1.0, 12.0))):
        for s, result, _ in _six_lowest(params, _sectors(blocks), window):
            for ev in result.eigenvalues:
                f = spectral_function(params, s, ev.energy).value
                p = pincherle_residual(params, s, ev.energy)
                worst_at_root = max(worst_at_root, abs(f), abs(p))
                accepted += 1
            for item in result.diagnostics.ill_conditioned:
                rejected += 1
                floors.append(abs(item["f_residual"]) / item["floor"])
            roots = result.root_energies()
            for lo, hi in zip(roots, roots[1:]):
                mid = 0.5 * (lo + hi)
                f = spectral_function(params, s, mid).value
                p = pincherle_residual(params, s, mid)
                weakest_mid = min(weakest_mid, abs(f), abs(p))
    ok = worst_at_root <= 1e-8 and weakest_mid > 1e-3 and all(r <= 1.0 for r in floors)
    extra = ""
    if rejected:
        extra = (f"; {rejected} genuine roots not accepted, each with |F| <= |F'| ulp/2 "
                 f"(worst ratio {max(floors):.2f})")
    record_criterion(5, ok, f"{accepted} accepted eigenvalues: max(|F|,|Pincherle|) = {worst_at_root:.2e}; "
                            f"midpoints min(|F|,|Pincherle|) = {weakest_mid:.3f}{extra}")
    assert ok


def test_criterion_06_minimal_asymptotics():
    s = SectorLabel(Fraction(1, 2), Parity.PLUS)
    e0 = compute_spectrum(TWO_MODE, s, -1, 2).eigenvalues[0].energy
    t1 = abs(characteristic_roots(TWO_MODE).t1)
    seq = backward_minimal(TWO_MODE, s, e0, 260)
    step_err = abs(abs(seq.ratio(200)) * 200 / t1 - 1)
    tm_est = norm_log_terms(backward_minimal(TWO_MODE, s, e0, 260))
    tm_err = abs(tm_est.ratio_sequence[200] / t1**2 - 1)
    kp = ModelParams.k_photon(2, 1.0, 0.3, 0.25)
    sk = SectorLabel(Fraction(1, 4), Parity.PLUS)
    ek = compute_spectrum(kp, sk, -1, 2).eigenvalues[0].energy
    kp_est = norm_log_terms(backward_minimal(kp, sk, ek, 260))
    kp_err = abs(kp_est.ratio_sequence[200] / (4 * abs(characteristic_roots(kp).t1) ** 2) - 1)
    ok = max(step_err, tm_err, kp_err) <= 0.02
    record_criterion(6, ok, f"n=200: |S_n+1/S_n| n vs |t1| off by {step_err:.2%}; norm ratios vs |t1|^2 "
                            f"{tm_err:.2%}, vs 4|t1|^2 (k=2) {kp_err:.2%}")
    assert ok


def test_criterion_07_polynomial_identities():
    rng = np.random.default_rng(20240607)
    n = np.arange(31)
    lgam = np.vectorize(math.lgamma)
    worst = 0.0
    cases = [(TWO_MODE, s) for s in _sectors(["1/2", "1"])] + [(TWO_PHOTON, s) for s in _sectors(["1/4", "3/4"])]
    for params, s in cases:
        if params.family.value == "two-mode":
            log_weight = lgam(n + 1.0) + lgam(n + 2.0 * float(s.block))
        else:
            log_weight = lgam(2.0 * (n + float(s.block) - 0.25) + 1.0)
        for e in rng.uniform(-2.0, 12.0, 20):
            seq = forward_sequence(params, s, float(e), 31)
            poly = ortho_poly_sequence(params, s, float(e), 31)
            assert np.all(seq.sign == poly.sign)
            rel = np.abs(np.expm1(seq.log_abs + log_weight - poly.log_abs))
            worst = max(worst, float(np.max(rel)))
    ok = worst <= 1e-10
    record_criterion(7, ok, f"S_n n!(n+2kappa-1)! = P_n and K_n [2(n+q-1/4)]! = P_n, n<=30, 20 random E x 8 "
                            f"sectors: max rel err {worst:.2e}")
    assert ok


def test_criterion_08_parity_union():
    rng = np.random.default_rng(8)
    worst = 0.0
    labels = []
    for _ in range(10):
        omega = float(rng.uniform(0.5, 2.0))
        delta = float(rng.uniform(0.0, 1.5)) * omega
        family = rng.choice(["two-mode", "k1", "k2"])
        if family == "two-mode":
            params = ModelParams.two_mode(omega, delta, float(rng.uniform(-0.9, 0.9)) * omega)
            block = Fraction(int(rng.integers(1, 5)), 2)
        elif family == "k1":
            params = ModelParams.k_photon(1, omega, delta, float(rng.uniform(-1.0, 1.0)) * omega)
            block = Fraction(1)
        else:
            params = ModelParams.k_photon(2, omega, delta, float(rng.uniform(-0.45, 0.45)) * omega)
            block = Fraction(int(rng.choice([1, 3])), 4)
        assert classify_regime(params).normalizable
        dense = eigs_dense_symmetric(build_full_block(params, block, 100))
        union = parity_union(params, block, 100)
        worst = max(worst, float(np.max(np.abs(dense - union))) / omega)
        labels.append(f"{family}:{block}")
    ok = worst <= 1e-9
    record_criterion(8, ok, f"full block (Jacobi) vs parity union (QL), N=100, 10 random configs: "
                            f"max gap {worst:.2e} omega")
    assert ok


def test_criterion_09_breakdown_diagnostics():
    truncations = [100, 200, 400, 800]
    k3 = convergence_study(ModelParams.k_photon(3, 1, 0.5, 0.1), SectorLabel(Fraction(1, 9), Parity.PLUS),
                           truncations)
    k2 = convergence_study(ModelParams.k_photon(2, 1, 0.5, 0.4), SectorLabel(Fraction(1, 4), Parity.PLUS),
                           truncations)
    k3_min = float(np.min(k3.increments[:, 0]))
    k2_last = float(k2.increments[-1, 0])
    energies = [-1.0, 0.0, 1.0, 2.0, 5.0]
    unsupported = [
        (ModelParams.two_mode(1, 0.5, 1.5), Fraction(1, 2)),
        (ModelParams.two_mode(1, 0.5, 1.0), Fraction(1, 2)),
        (ModelParams.k_photon(2, 1, 0.5, 0.5), Fraction(1, 4)),
        (ModelParams.k_photon(3, 1, 0.5, 0.1), Fraction(1, 9)),
        (ModelParams.k_photon(4, 1, 0.5, 0.1), Fraction(1, 16)),
    ]
    flagged = total = 0
    k3_exponents = []
    for params, block in unsupported:
        for parity in Parity:
            report = divergence_report(params, SectorLabel(block, parity), energies)
            flagged += sum(smp.flagged for smp in report.samples)
            total += len(report.samples)
            if params.k == 3:
                k3_exponents += [smp.tail_exponent for smp in report.samples]
    false_flags = checked = 0
    for params, blocks, window in ((TWO_MODE, ["1/2", "1"], (-1.0, 12.0)), (TWO_PHOTON, ["1/4", "3/4"], (-1.0, 12.0))):
        for s in _sectors(blocks):
            energies_here = list(compute_spectrum(params, s, *window).energies) + list(np.linspace(*window, 5))
            for e in energies_here:
                growth = partial_norm_growth(backward_minimal(params, s, float(e), 500))
                false_flags += growth.flagged
                checked += 1
    ok = (k3_min >= K3_INCREMENT_FLOOR and k2_last < K2_INCREMENT_CEILING and flagged == total
          and false_flags == 0)
    record_criterion(9, ok, f"k=3 ground increments >= {k3_min:.3g} (floor {K3_INCREMENT_FLOOR:g}); k=2 last "
                            f"increment {k2_last:.1e} (< {K2_INCREMENT_CEILING:g}); divergence flag {flagged}/{total} "
                            f"unsupported samples, {false_flags}/{checked} normalizable minimal solutions; "
                            f"k=3 tail exponent {min(k3_exponents):.2f}..{max(k3_exponents):.2f}")
    assert ok


ARTIFACT_RUNS = [
    ("regime_two_mode.json", ["regime", "--set", "g=0.5", "--format", "json"]),
    ("regime_k2.json", ["regime", "--set", "family=k-photon", "--set", "g=0.25", "--format", "json"]),
    ("regime_k3.json", ["regime", "--set", "family=k-photon", "--set", "k=3", "--set", "g=0.1", "--format", "json"]),
    ("compare_two_mode.csv", ["compare", "--set", "delta=0.7", "--set", "e_min=-1", "--set", "e_max=12"]),
    ("compare_two_mode.json", ["compare", "--set", "delta=0.7", "--set", "e_min=-1", "--set", "e_max=12",
                               "--format", "json"]),
    ("compare_k2.csv", ["compare", "--set", "family=k-photon", "--set", "delta=0.3", "--set", "g=0.2",
                        "--set", "e_min=-1", "--set", "e_max=12"]),
    ("spectrum_delta0.csv", ["spectrum", "--set", "blocks=1/2", "--set", "parity=plus", "--set", "e_min=-0.5",
                             "--set", "e_max=5.5", "--trace"]),
    ("convergence_k3.csv", ["convergence", "--set", "family=k-photon", "--set", "k=3", "--set", "g=0.1",
                            "--set", "delta=0.5", "--set", "blocks=1/9", "--set", "parity=plus"]),
    ("convergence_k2.json", ["convergence", "--set", "family=k-photon", "--set", "g=0.4", "--set", "delta=0.5",
                             "--set", "blocks=1/4", "--set", "parity=plus", "--format", "json"]),
    ("diverge_two_mode.csv", ["diverge", "--set", "g=1.5", "--set", "delta=0.5", "--set", "blocks=1/2"]),
    ("diverge_k3.json", ["diverge", "--set", "family=k-photon", "--set", "k=3", "--set", "g=0.1",
                         "--set", "delta=0.5", "--set", "blocks=all:3", "--format", "json"]),
    ("wavefunction.csv", ["wavefunction", "--set", "delta=0.7", "--set", "blocks=1/2", "--set", "samples=11"]),
]


def _produce_artifacts(directory):
    for name, argv in ARTIFACT_RUNS:
        code = run([*argv, "--out", str(directory / name)])
        assert code == 0, name
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_criterion_10_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("RABI_CF_THREADS", "4")
    first_dir, second_dir = tmp_path / "run1", tmp_path / "run2"
    first_dir.mkdir()
    second_dir.mkdir()
    first = _produce_artifacts(first_dir)
    second = _produce_artifacts(second_dir)
    same = [name for name in first if first[name] == second.get(name)]
    ok = len(first) >= len(ARTIFACT_RUNS) and set(first) == set(second) and len(same) == len(first)
    record_criterion(10, ok, f"two consecutive artifact runs (4 worker threads): {len(same)}/{len(first)} "
                             f"CSV/JSON files byte-identical")
    assert ok
