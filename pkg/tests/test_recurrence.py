from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rabi_cf.errors import CouplingZero, MinimalSolutionUnavailable
from rabi_cf.model import ModelParams, SectorLabel, characteristic_roots
from rabi_cf.oracle import build_sector_tridiagonal, eigs_tridiagonal
from rabi_cf.recurrence import (
    SequenceKind,
    backward_minimal,
    coeff_at,
    coefficient_arrays,
    forward_sequence,
    log_bargmann_weight,
    log_poly_normalizer,
    ortho_poly_sequence,
    pincherle_residual,
    three_point_residuals,
)

from conftest import sector


def test_coefficient_examples(two_mode):
    assert coeff_at(two_mode, sector("1/2"), 0, 0.0).c == pytest.approx(1.4, rel=1e-15)
    assert coeff_at(two_mode, sector("1/2"), 1, 3.3).d == 0.25
    kp = ModelParams.k_photon(2, 1, 0.3, 0.2)
    assert coeff_at(kp, sector("1/4"), 1, 0.0).d == pytest.approx(1 / 12, rel=1e-15)


def test_coefficient_arrays_match_scalar(two_photon):
    c, d = coefficient_arrays(two_photon, sector("3/4", "minus"), 0.37, 12)
    for n in range(12):
        pair = coeff_at(two_photon, sector("3/4", "minus"), n, 0.37)
        assert pair.c == pytest.approx(c[n], rel=1e-15) and pair.d == pytest.approx(d[n], rel=1e-15)


@given(n=st.integers(0, 500), e=st.floats(-50, 50), h=st.floats(-5, 5), k=st.sampled_from([0, 1, 2, 3]))
def test_coefficients_affine_in_energy_and_d_positive(n, e, h, k):
    if k == 0:
        params, s = ModelParams.two_mode(1.3, 0.4, 0.7), sector("3/2")
        denom = (n + 1) * (n + 3)
    else:
        params = ModelParams.k_photon(k, 1.3, 0.4, 0.7)
        s = sector(Fraction(1, k * k))
        denom = float(np.prod([k * n + i for i in range(1, k + 1)]))
    a, b = coeff_at(params, s, n, e), coeff_at(params, s, n, e + h)
    assert b.c - a.c == pytest.approx(-h / (0.7 * denom), rel=1e-9, abs=1e-15 * max(1.0, abs(a.c)))
    assert a.d == b.d > 0
    assert a.d == pytest.approx(1.0 / denom, rel=1e-14)


@given(n=st.integers(0, 100), e=st.floats(-20, 20), delta=st.floats(-3, 3))
def test_parity_flip_symmetry(n, e, delta):
    plus = coeff_at(ModelParams.two_mode(1, delta, 0.6), sector("1"), n, e)
    minus = coeff_at(ModelParams.two_mode(1, -delta, 0.6), sector("1", "minus"), n, e)
    assert plus == minus


def test_forward_example(two_mode):
    seq = forward_sequence(two_mode, sector("1/2"), 0.0, 3)
    assert seq.values == pytest.approx([1.0, -1.4, 0.66], rel=1e-14)
    assert seq.kind is SequenceKind.FORWARD_DOMINANT
    two = forward_sequence(two_mode, sector("1"), 0.3, 2)
    assert two.ratio(0) == -coeff_at(two_mode, sector("1"), 0, 0.3).c


def test_k1_reduces_to_rabi_recurrence():
    params = ModelParams.k_photon(1, 1.0, 0.4, 0.8)
    for n in range(6):
        pair = coeff_at(params, sector(1), n, 0.25)
        expected = (0.4 * (-1) ** n - 0.25 + 1.0 * n) / (0.8 * (n + 1))
        assert pair.c == pytest.approx(expected, rel=1e-14)
        assert pair.d == pytest.approx(1.0 / (n + 1), rel=1e-14)


def test_forward_survives_overflow(two_mode):
    seq = forward_sequence(two_mode, sector("1/2"), 3.0, 5000)
    assert np.all(np.isfinite(seq.log_abs[seq.sign != 0]))


def test_backward_minimal_ratio(two_mode):
    t1 = abs(characteristic_roots(two_mode).t1)
    seq = backward_minimal(two_mode, sector("1/2"), 0.342, 260)
    assert seq.values[0] == 1.0
    assert abs(seq.ratio(200)) * 200 == pytest.approx(t1, rel=0.02)


def test_backward_buffer_insensitive(two_mode):
    a = backward_minimal(two_mode, sector("1/2"), 1.0, 120, buffer=50)
    b = backward_minimal(two_mode, sector("1/2"), 1.0, 120, buffer=100)
    assert np.all(a.sign == b.sign)
    assert np.max(np.abs(np.expm1(a.log_abs - b.log_abs))) < 1e-12


@pytest.mark.parametrize("params,blk", [
    (ModelParams.two_mode(1, 0.7, 0.5), "1/2"),
    (ModelParams.k_photon(2, 1, 0.3, 0.2), "1/4"),
    (ModelParams.k_photon(1, 1, 0.4, 0.8), 1),
])
def test_three_point_residuals(params, blk):
    for seq in (forward_sequence(params, sector(blk), 0.7, 200), backward_minimal(params, sector(blk), 0.7, 200)):
        assert np.max(three_point_residuals(params, seq)) <= 1e-12


def test_pincherle_residual_at_oracle_levels(two_mode):
    s = sector("1/2", "minus")
    levels = eigs_tridiagonal(build_sector_tridiagonal(two_mode, s, 400), 4)
    for e in levels:
        assert abs(pincherle_residual(two_mode, s, float(e))) < 1e-10
    for lo, hi in zip(levels, levels[1:]):
        assert abs(pincherle_residual(two_mode, s, float((lo + hi) / 2))) > 1e-3
    e0 = float(levels[0])
    assert np.sign(pincherle_residual(two_mode, s, e0 - 1e-4)) != np.sign(pincherle_residual(two_mode, s, e0 + 1e-4))


def test_minimal_unavailable_and_zero_coupling():
    with pytest.raises(MinimalSolutionUnavailable):
        backward_minimal(ModelParams.two_mode(1, 0, 1.5), sector("1/2"), 0.0, 10)
    with pytest.raises(MinimalSolutionUnavailable):
        backward_minimal(ModelParams.k_photon(3, 1, 0, 0.1), sector(Fraction(1, 9)), 0.0, 10)
    with pytest.raises(CouplingZero):
        forward_sequence(ModelParams.two_mode(1, 0, 0), sector("1/2"), 0.0, 10)


def test_ortho_poly_first_terms(two_mode):
    p = ortho_poly_sequence(two_mode, sector("1/2"), 0.0, 3)
    assert p.values[0] == 1.0
    assert p.values[1] == pytest.approx(-1.4, rel=1e-15)


@pytest.mark.parametrize("params,blk,par", [
    (ModelParams.two_mode(1, 0.7, 0.5), "1/2", "plus"),
    (ModelParams.two_mode(1, 0.7, 0.5), "3/2", "minus"),
    (ModelParams.k_photon(2, 1, 0.3, 0.2), "1/4", "plus"),
    (ModelParams.k_photon(2, 1, 0.3, 0.2), "3/4", "minus"),
    (ModelParams.k_photon(3, 1, 0.3, 0.1), Fraction(4, 9), "plus"),
])
def test_polynomial_identity(params, blk, par):
    rng = np.random.default_rng(11)
    s = sector(blk, par)
    for e in rng.uniform(-2, 10, 5):
        seq = forward_sequence(params, s, float(e), 31)
        poly = ortho_poly_sequence(params, s, float(e), 31)
        scaled = seq.log_abs + log_poly_normalizer(params, s, np.arange(31))
        assert np.all(seq.sign == poly.sign)
        assert np.max(np.abs(np.expm1(scaled - poly.log_abs))) <= 1e-10


def test_two_photon_normalizer_is_shifted_factorial():
    import math
    params = ModelParams.k_photon(2, 1, 0, 0.2)
    n = np.arange(10)
    for blk, offset in (("1/4", 0), ("3/4", 1)):
        got = log_poly_normalizer(params, sector(blk), n)
        want = np.array([math.lgamma(2 * m + offset + 1) for m in n])
        assert got == pytest.approx(want, abs=1e-11)


def test_bargmann_weight_large_n_finite(two_mode):
    w = log_bargmann_weight(two_mode, sector("1"), np.arange(100_000))
    assert np.all(np.isfinite(w))
