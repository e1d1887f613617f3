"""Null-steering precoders and the truncated-SVD inverse they share."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopbeam import geometry, precoding
from coopbeam.precoding import ConstraintSet, InfeasibleConstraints

LAM = 0.004


def _cvec(rng, m):
    return rng.standard_normal(m) + 1j * rng.standard_normal(m)


# --- regularized inverse -----------------------------------------------------

def test_regularized_inverse_identity():
    inv, report = precoding.regularized_inverse(np.eye(3, dtype=complex))
    assert np.allclose(inv, np.eye(3))
    assert report.rank == 3 and not report.truncated


def test_regularized_inverse_rank_deficient():
    inv, report = precoding.regularized_inverse(np.diag([1.0, 0.0]).astype(complex))
    assert np.allclose(inv, np.diag([1.0, 0.0]))
    assert report.rank == 1 and report.truncated


def test_regularized_inverse_matches_direct_solve():
    rng = np.random.default_rng(0)
    x = _cvec(rng, 12).reshape(3, 4)
    gram = x @ x.conj().T + np.eye(3)  # well conditioned
    inv, report = precoding.regularized_inverse(gram)
    assert np.max(np.abs(inv - np.linalg.inv(gram))) < 1e-10
    assert report.rank == 3


# --- zfp ---------------------------------------------------------------------

def test_zfp_no_interferers_is_identity():
    rng = np.random.default_rng(1)
    d = _cvec(rng, 16)
    out = precoding.zfp(ConstraintSet(d))
    assert np.allclose(out.weights, d)
    assert out.method == "zfp"


def test_zfp_orthogonal_interferer_is_noop():
    rng = np.random.default_rng(2)
    d = _cvec(rng, 16)
    v = _cvec(rng, 16)
    v -= (np.vdot(d, v) / np.vdot(d, d)) * d
    out = precoding.zfp(ConstraintSet(d, (v,)))
    assert np.max(np.abs(out.weights - d)) < 1e-10


def test_zfp_collinear_interferer_annihilates():
    rng = np.random.default_rng(3)
    d = _cvec(rng, 16)
    out = precoding.zfp(ConstraintSet(d, (2.0j * d,)))
    assert np.max(np.abs(out.weights)) < 1e-10


def test_zfp_nulling_and_projection_identity():
    rng = np.random.default_rng(4)
    m = 64
    for _ in range(25):
        n = int(rng.integers(1, 17))
        d = _cvec(rng, m)
        vs = [_cvec(rng, m) for _ in range(n)]
        w = precoding.zfp(ConstraintSet(d, tuple(vs))).weights
        for v in vs:
            assert abs(np.vdot(w, v)) <= 1e-9 * m * np.linalg.norm(v)
        # orthogonal projection: w^H d equals ||w||^2 and is real nonnegative
        p = np.vdot(w, d)
        assert abs(p.imag) < 1e-9
        assert p.real >= 0.0
        assert abs(p - np.vdot(w, w).real) < 1e-9 * max(1.0, p.real)


def test_zfp_scaling_invariance():
    rng = np.random.default_rng(5)
    d = _cvec(rng, 32)
    vs = [_cvec(rng, 32) for _ in range(5)]
    w1 = precoding.zfp(ConstraintSet(d, tuple(vs))).weights
    w2 = precoding.zfp(ConstraintSet(d, tuple((0.3 - 1.7j) * v for v in vs))).weights
    assert np.max(np.abs(w1 - w2)) < 1e-9


@given(st.integers(0, 60), st.integers(0, 1000))
@settings(max_examples=60, deadline=None)
def test_zfp_nulls_every_constraint(n, seed):
    rng = np.random.default_rng(seed)
    m = 64
    d = _cvec(rng, m)
    vs = [_cvec(rng, m) for _ in range(n)]
    w = precoding.zfp(ConstraintSet(d, tuple(vs))).weights
    for v in vs:
        assert abs(np.vdot(w, v)) <= 1e-9 * m * np.linalg.norm(v)


def test_zfp_near_duplicate_constraints_merge():
    rng = np.random.default_rng(6)
    d = _cvec(rng, 16)
    v = _cvec(rng, 16)
    dup = v * (1.0 + 1e-13)
    w = precoding.zfp(ConstraintSet(d, (v, dup, v))).weights
    assert abs(np.vdot(w, v)) <= 1e-9 * 16 * np.linalg.norm(v)
    assert np.linalg.norm(w) > 0.1 * np.linalg.norm(d)


def test_infeasible_constraint_count():
    rng = np.random.default_rng(7)
    m = 8
    d = _cvec(rng, m)
    vs = tuple(_cvec(rng, m) for _ in range(m))
    with pytest.raises(InfeasibleConstraints):
        precoding.zfp(ConstraintSet(d, vs))


# --- zfp with derivative constraints -----------------------------------------

def test_zfp_d_reduces_without_derivatives():
    rng = np.random.default_rng(8)
    d = _cvec(rng, 16)
    vs = (_cvec(rng, 16),)
    plain = precoding.zfp(ConstraintSet(d, vs)).weights
    zero_dv = (np.zeros(16, dtype=complex), np.zeros(16, dtype=complex))
    viad = precoding.zfp_d(ConstraintSet(d, vs, zero_dv)).weights
    assert np.max(np.abs(plain - viad)) < 1e-10
    empty = precoding.zfp_d(ConstraintSet(d)).weights
    assert np.allclose(empty, d)


def test_zfp_d_nulls_derivative_vectors():
    rng = np.random.default_rng(9)
    m = 64
    d = _cvec(rng, m)
    vs = tuple(_cvec(rng, m) for _ in range(4))
    dv = tuple(_cvec(rng, m) for _ in range(8))
    w = precoding.zfp_d(ConstraintSet(d, vs, dv)).weights
    for v in vs + dv:
        assert abs(np.vdot(w, v)) <= 1e-9 * m * np.linalg.norm(v)


def test_zfp_d_widened_null_survives_angle_error():
    # an interferer that drifts half a degree stays far below the plain
    # zero-forcing response when its derivative pair is also nulled
    arr = geometry.planar_array(8, 8, LAM / 2, (0.0, 0.0, 0.0))
    ang_d = geometry.AnglePair(0.3, 1.9)
    ang_i = geometry.AnglePair(
        ang_d.azimuth + math.radians(12.0), ang_d.zenith - math.radians(10.0)
    )
    ed = geometry.steering_vector(arr, ang_d, LAM)
    ei = geometry.steering_vector(arr, ang_i, LAM)
    dv = (
        geometry.steering_derivative(arr, ang_i, LAM, "azimuth"),
        geometry.steering_derivative(arr, ang_i, LAM, "zenith"),
    )
    w_plain = precoding.zfp(ConstraintSet(ed, (ei,))).weights
    w_deriv = precoding.zfp_d(ConstraintSet(ed, (ei,), dv)).weights
    drift = geometry.AnglePair(
        ang_i.azimuth + math.radians(0.5), ang_i.zenith + math.radians(0.5)
    )
    e_drift = geometry.steering_vector(arr, drift, LAM)
    leak_plain = abs(np.vdot(w_plain, e_drift)) / abs(np.vdot(w_plain, ed))
    leak_deriv = abs(np.vdot(w_deriv, e_drift)) / abs(np.vdot(w_deriv, ed))
    assert 20.0 * math.log10(leak_deriv / leak_plain) <= -20.0


# --- two-array split constraints ----------------------------------------------

def test_zfp_general_no_interferers():
    rng = np.random.default_rng(10)
    dl, dr = _cvec(rng, 16), _cvec(rng, 16)
    w = precoding.zfp_general(ConstraintSet(dl), ConstraintSet(dr)).weights
    assert np.allclose(w, dl + dr)


def test_zfp_general_nulls_each_array_separately():
    # opposite per-array responses cancel in the summed constraint, which
    # makes plain zfp blind to them; the split form still nulls both
    rng = np.random.default_rng(11)
    m = 32
    dl, dr = _cvec(rng, m), _cvec(rng, m)
    vl = _cvec(rng, m)
    vr = -vl
    w_sum = precoding.zfp(ConstraintSet(dl + dr, (vl + vr,))).weights
    assert np.allclose(w_sum, dl + dr)  # zero vector constraint, vacuous
    w_split = precoding.zfp_general(
        ConstraintSet(dl, (vl,)), ConstraintSet(dr, (vr,))
    ).weights
    assert abs(np.vdot(w_split, vl)) <= 1e-9 * m * np.linalg.norm(vl)
    assert abs(np.vdot(w_split, vr)) <= 1e-9 * m * np.linalg.norm(vr)
    assert np.max(np.abs(w_split - (dl + dr))) > 1e-3


def test_zfp_general_implies_summed_nulls():
    rng = np.random.default_rng(12)
    m = 48
    dl, dr = _cvec(rng, m), _cvec(rng, m)
    vls = [_cvec(rng, m) for _ in range(3)]
    vrs = [_cvec(rng, m) for _ in range(3)]
    w = precoding.zfp_general(ConstraintSet(dl, tuple(vls)), ConstraintSet(dr, tuple(vrs))).weights
    for vl, vr in zip(vls, vrs):
        assert abs(np.vdot(w, vl + vr)) <= 2e-9 * m * (np.linalg.norm(vl) + np.linalg.norm(vr))


# --- distortionless solution ---------------------------------------------------

def test_mpdr_distortionless_always():
    rng = np.random.default_rng(13)
    m = 32
    for n in (0, 1, 5, 12):
        d = _cvec(rng, m)
        vs = tuple(_cvec(rng, m) for _ in range(n))
        w = precoding.mpdr(ConstraintSet(d, vs)).weights
        assert abs(np.vdot(w, d) - 1.0) <= 1e-9
    # rank-deficient set: duplicated interferers must not break the constraint
    d = _cvec(rng, m)
    v = _cvec(rng, m)
    w = precoding.mpdr(ConstraintSet(d, (v, v, v))).weights
    assert abs(np.vdot(w, d) - 1.0) <= 1e-9


def test_mpdr_no_interferers_matched_filter():
    rng = np.random.default_rng(14)
    d = _cvec(rng, 16)
    w = precoding.mpdr(ConstraintSet(d)).weights
    assert np.max(np.abs(w - d / np.vdot(d, d).real)) < 1e-10


def test_mpdr_rejects_orthogonal_interferer():
    rng = np.random.default_rng(15)
    d = _cvec(rng, 16)
    v = _cvec(rng, 16)
    v -= (np.vdot(d, v) / np.vdot(d, d)) * d
    w = precoding.mpdr(ConstraintSet(d, (v,))).weights
    assert abs(np.vdot(w, v)) <= 1e-9


# --- single-array fallback -----------------------------------------------------

def test_conventional_zf_cannot_separate_co_angle_users():
    arr = geometry.planar_array(8, 8, LAM / 2, (0.0, 0.0, 120.0))
    ang = geometry.AnglePair(0.4, 2.1)
    e = geometry.steering_vector(arr, ang, LAM)
    out = precoding.conventional_zf(ConstraintSet(e, (e,)))
    assert np.max(np.abs(out.weights)) < 1e-10

    near = geometry.AnglePair(ang.azimuth + math.radians(1.0), ang.zenith)
    e_near = geometry.steering_vector(arr, near, LAM)
    shrunk = precoding.conventional_zf(ConstraintSet(e, (e_near,)))
    assert np.linalg.norm(shrunk.weights) < 0.5 * np.linalg.norm(e)


def test_constraint_set_validation():
    rng = np.random.default_rng(16)
    d = _cvec(rng, 8)
    with pytest.raises(ValueError):
        ConstraintSet(d, (_cvec(rng, 7),))
    with pytest.raises(ValueError):
        ConstraintSet(np.zeros((2, 2), dtype=complex))


def test_zfp_bank_matches_per_user_solutions():
    rng = np.random.default_rng(17)
    s = rng.standard_normal((24, 4)) + 1j * rng.standard_normal((24, 4))
    bank = precoding.zfp_bank(s)
    assert bank.shape == s.shape
    for u in range(4):
        others = tuple(s[:, v] for v in range(4) if v != u)
        w = precoding.zfp(ConstraintSet(s[:, u], others)).weights
        assert np.max(np.abs(bank[:, u] - w)) < 1e-9
