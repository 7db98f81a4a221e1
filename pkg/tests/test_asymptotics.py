import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opseq.asymptotics import (
    CONVERGED,
    NON_CONVERGENT,
    SequenceTrace,
    Step,
    asymptotic_decomposition,
    averaged_operator,
    cesaro_trace,
    composition_window_sequence,
    conjugation_sequence,
    detect_convergence,
    ess_norm_estimate,
    perturbation_gap_check,
    spectral_region_certificate,
    tauberian_report,
    window_sequence,
)
from opseq.operators import (
    basis_vector,
    composition_matrix,
    model_compression,
    operator_norm,
    rank_one_matrix,
    tm_basis,
    toeplitz_matrix,
)
from opseq.symbols import BlaschkeSpec, monomial, symbol_mul, trig_from_coeffs

cplx = st.builds(complex, st.floats(-2, 2), st.floats(-2, 2))
trig = st.dictionaries(st.integers(-4, 4), cplx, min_size=1, max_size=4).map(trig_from_coeffs)


def _synthetic(mats, kind="power"):
    t = SequenceTrace(kind, window_dim=mats[0].shape[0])
    prev = None
    for n, X in enumerate(mats):
        inc = float("nan") if prev is None else operator_norm(X - prev)
        t.steps.append(Step(n, X, operator_norm(X), inc))
        prev = X
    return t


def test_window_examples():
    phi = trig_from_coeffs([(0, 0.5), (1, 1)])
    t = window_sequence(toeplitz_matrix(phi, 256), 64, 192)
    ref = toeplitz_matrix(phi, 64).entries
    assert all(np.array_equal(s.matrix, ref) for s in t.steps if s.matrix is not None)
    t = window_sequence(composition_matrix(monomial(1, 0.5), 256), 64, 40)
    assert np.allclose(t.norms, 0.5 ** np.arange(41), rtol=1e-12, atol=0)
    e0 = basis_vector(8)
    t = window_sequence(rank_one_matrix(e0, e0), 4, 4)
    assert t.norms[0] == 1 and np.all(t.norms[1:] == 0)


def test_window_rejects_small_input():
    with pytest.raises(ValueError):
        window_sequence(np.eye(10), 8, 4)


def test_retention_cap():
    t = window_sequence(np.eye(100), 4, 90, retain=5)
    kept = [s.n for s in t.steps if s.matrix is not None]
    assert kept == list(range(86, 91))
    with pytest.raises(ValueError):
        cesaro_trace(t)


def test_conjugation_examples():
    T = toeplitz_matrix(trig_from_coeffs([(-1, 1), (1, 2j)]), 10).entries
    t = conjugation_sequence(np.eye(10), T, np.eye(10), 10, 5)
    assert all(np.array_equal(s.matrix, T) for s in t.steps)
    h = 0.5 * np.eye(10)
    t = conjugation_sequence(h, T, h, 10, 6)
    assert np.allclose(t.norms, 0.25 ** np.arange(7) * operator_norm(T), rtol=1e-10)


def test_conjugation_matches_window():
    phi = monomial(1)
    N, n_max = 16, 8
    M = N + n_max
    T = toeplitz_matrix(phi, M).entries
    S = np.eye(M, k=-1)
    pad = conjugation_sequence(S.T, T, S, N, n_max)
    win = window_sequence(T, N, n_max)
    for a, b in zip(pad.steps, win.steps):
        assert np.array_equal(a.matrix, b.matrix)
    assert pad.truncation_warning


def test_cesaro_examples():
    X = np.array([[1, 2j], [0, 3]])
    c = cesaro_trace(_synthetic([X] * 6))
    assert all(np.allclose(s.matrix, X) for s in c.steps)
    c = cesaro_trace(_synthetic([(-1) ** n * X for n in range(20)]))
    for s in c.steps:
        assert s.norm <= operator_norm(X) / s.n + 1e-12
    c = cesaro_trace(window_sequence(composition_matrix(monomial(1, 0.5), 200), 64, 128, retain=None))
    assert c.norms[-1] < 2.0 / 129


def test_detect_examples():
    T = toeplitz_matrix(trig_from_coeffs([(1, 1), (-2, 0.5)]), 80)
    v = detect_convergence(window_sequence(T, 32, 40))
    assert v.status == CONVERGED
    assert np.array_equal(v.limit, toeplitz_matrix(trig_from_coeffs([(1, 1), (-2, 0.5)]), 32).entries)
    M = np.array([[1, 1], [0, 1j]])
    v = detect_convergence(_synthetic([2.0 ** -n * M for n in range(60)]))
    assert v.status == CONVERGED and operator_norm(v.limit) < 1e-6
    v = detect_convergence(_synthetic([(-1) ** n * M for n in range(30)]))
    assert v.status == NON_CONVERGENT


def test_detect_needs_enough_steps():
    with pytest.raises(ValueError):
        detect_convergence(_synthetic([np.eye(2)] * 10), window_w=8)


def test_converged_verdict_invariant():
    M = np.diag([1.0, 0.0])
    v = detect_convergence(_synthetic([M + 1e-3 * 0.5 ** n * np.eye(2) for n in range(40)]), tol=1e-6)
    assert v.status == CONVERGED
    assert v.evidence["max_pairwise_deviation"] <= 1e-6


def test_decomposition_examples():
    phi = trig_from_coeffs([(0, 0.5), (1, 1), (-1, 0.25)])
    N, n_max = 32, 24
    T = toeplitz_matrix(phi, N + n_max).entries
    dec = asymptotic_decomposition(window_sequence(T, N, n_max), T)
    assert operator_norm(dec.K) <= 1e-12
    e0 = basis_vector(N + n_max)
    T2 = T + rank_one_matrix(e0, e0).entries
    dec = asymptotic_decomposition(window_sequence(T2, N, n_max), T2)
    assert np.abs(dec.T0 - T[:N, :N]).max() <= 1e-12
    assert np.abs(dec.K - rank_one_matrix(e0[:N], e0[:N]).entries).max() <= 1e-12
    assert np.abs(dec.T0 + dec.K - T2[:N, :N]).max() <= 1e-12
    with pytest.raises(ValueError):
        alt = _synthetic([(-1) ** n * np.eye(2) for n in range(20)])
        asymptotic_decomposition(alt, np.eye(2))


def test_ess_norm_examples():
    e0 = basis_vector(40)
    est, _ = ess_norm_estimate(rank_one_matrix(e0, e0), 20, 16)
    assert est == 0.0
    basis = tm_basis(BlaschkeSpec((0.2, -0.4, 0.5j)))
    F = model_compression(basis, monomial(1)).entries
    big = np.zeros((30, 30), dtype=complex)
    big[:3, :3] = F
    est, _ = ess_norm_estimate(big, 10, 16)
    assert est == 0.0


def test_tauberian_examples():
    A = np.diag([1.0, 0.5])
    p = conjugation_sequence(A, np.eye(2), np.eye(2), 2, 80, retain=None)
    r = tauberian_report(p, cesaro_trace(p), 1e-9)
    assert r.hypotheses_hold and r.conclusion_holds and not r.defect
    assert np.allclose(detect_convergence(p, 1e-9).limit, np.diag([1, 0]), atol=1e-12)
    A = np.diag([1.0, -1.0])
    p = conjugation_sequence(A, np.eye(2), np.eye(2), 2, 40, retain=None)
    r = tauberian_report(p, cesaro_trace(p), 1e-9)
    assert not r.increments_vanish and not r.hypotheses_hold and not r.defect
    T = np.array([[1, 2], [3j, 4]])
    p = conjugation_sequence(np.eye(2), T, np.eye(2), 2, 20, retain=None)
    r = tauberian_report(p, cesaro_trace(p), 1e-9)
    assert r.conclusion_holds and r.limit_gap == 0.0


def test_spectral_region_certificate():
    assert spectral_region_certificate(np.diag([1 + 1j, 2]), np.diag([1 - 1j, 1])) == "A in D+, B in D-"
    assert spectral_region_certificate(np.diag([1 - 1j]), np.diag([3 + 0.5j])) == "A in D-, B in D+"
    assert spectral_region_certificate(np.diag([0.5]), np.diag([1])) is None
    with pytest.raises(ValueError):
        spectral_region_certificate(np.ones((2, 2)), np.eye(2))


def test_averaged_operator_examples():
    S = averaged_operator(np.diag([1, 1j, -1, -1j]), 4).entries
    assert np.allclose(S, np.diag([1, 0, 0, 0]), atol=1e-15)
    assert np.allclose(averaged_operator(np.eye(3), 5).entries, np.eye(3))
    assert np.allclose(averaged_operator(np.diag([1, -1]), 2).entries, np.diag([1, 0]))
    with pytest.raises(ValueError):
        averaged_operator(np.eye(2), 1)


def test_gap_examples():
    N = 16
    e0 = basis_vector(N)
    K = rank_one_matrix(e0, e0).entries
    r = perturbation_gap_check(K, -0.5 * np.eye(N))
    assert r.ratio == pytest.approx(0.5, abs=1e-12)
    assert perturbation_gap_check(K, np.zeros((N, N))).ratio == pytest.approx(1.0, abs=1e-15)
    assert perturbation_gap_check(np.zeros((N, N)), np.eye(N)).status == "vacuous"
    with pytest.raises(ValueError):
        perturbation_gap_check(K, np.diag(np.arange(N, dtype=float)))


def test_composition_dichotomy_shapes():
    t = composition_window_sequence(monomial(2), 16, 40, retain=None)
    assert t.steps[0].matrix.shape == (40 + 32, 16)
    # every window keeps the unit mass of the first column
    assert np.all(np.abs(t.norms - 1.0) <= 1e-12)


@given(trig, st.integers(2, 12))
def test_trig_toeplitz_fixed_points(phi, N):
    n_max = 16
    T = toeplitz_matrix(phi, N + n_max).entries
    dec = asymptotic_decomposition(window_sequence(T, N, n_max), T)
    assert operator_norm(dec.K) <= 1e-12


@given(trig, trig)
def test_product_windows_stabilize(phi, psi):
    deg = max(abs(phi.min_index), phi.max_index, abs(psi.min_index), psi.max_index)
    N, n_max = 8, deg + 4
    M = N + n_max + deg + 1
    T = (toeplitz_matrix(phi, M + deg).entries @ toeplitz_matrix(psi, M + deg).entries)[:M, :M]
    t = window_sequence(T, N, n_max, retain=None)
    for n in range(deg + 1, n_max + 1):
        assert np.array_equal(t.matrix(n), t.matrix(deg))
    assert np.abs(t.matrix(deg) - toeplitz_matrix(symbol_mul(phi, psi), N).entries).max() <= 1e-12


@given(st.integers(1, 4), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_compact_decay(rank, r, seed):
    rng = np.random.default_rng(seed)
    K = np.zeros((32, 32), dtype=complex)
    for _ in range(rank):
        x = np.zeros(32, dtype=complex)
        y = np.zeros(32, dtype=complex)
        x[:r] = rng.standard_normal(r)
        y[:r] = rng.standard_normal(r)
        K += np.outer(x, y)
    norms = window_sequence(K, 12, 16).norms
    assert np.all(norms[r:] == 0.0)


@given(st.integers(0, 2**32 - 1))
def test_increments_recomputable(seed):
    rng = np.random.default_rng(seed)
    A = np.diag(rng.uniform(-1, 1, 5))
    t = conjugation_sequence(A, rng.standard_normal((5, 5)), A, 5, 8, retain=None)
    for a, b in zip(t.steps, t.steps[1:]):
        assert abs(b.increment - np.linalg.norm(b.matrix - a.matrix, 2)) <= 1e-12


@given(st.lists(st.complex_numbers(max_magnitude=0.7), min_size=1, max_size=5),
       st.integers(0, 2**32 - 1))
def test_cesaro_consistency(z, seed):
    rng = np.random.default_rng(seed)
    z = np.array(z + [1.0])
    A = np.diag(z)
    T = np.diag(rng.standard_normal(z.size))
    p = conjugation_sequence(A, T, np.eye(z.size), z.size, 160, retain=None)
    tol = 1e-6
    pv = detect_convergence(p, tol)
    if pv.converged:
        cv = detect_convergence(cesaro_trace(p), tol)
        assert cv.converged
        assert operator_norm(pv.limit - cv.limit) <= 2 * tol


@given(st.integers(0, 2**32 - 1), st.integers(2, 10))
def test_gap_bound(seed, N):
    rng = np.random.default_rng(seed)
    K = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    c = complex(*rng.standard_normal(2))
    phi = trig_from_coeffs([(0, c), (1, rng.standard_normal()), (-1, rng.standard_normal())])
    r = perturbation_gap_check(K, toeplitz_matrix(phi, N))
    assert r.ratio >= 0.5 - 1e-9
