import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biophase.biorthogonal import (GaugeTransform, StatePair, apply_gauge, binorm_defect,
                                   biorthogonal_complement, build_frame, dual_partner,
                                   match_frames, match_permutation)
from biophase.errors import AmbiguousMatchError, DegenerateSpectrumError, ZeroVectorError

from _util import E1, E2, R2, crandn, rand_matrix, rand_pair

seeds = st.integers(0, 2**32 - 1)


def pt(g):
    return np.array([[1j * g, 1], [1, -1j * g]])


def test_frame_diagonal():
    f = build_frame(np.diag([1, 2j]))
    swap = np.array([[0, 1], [1, 0]])
    np.testing.assert_allclose(f.eigenvalues, [2j, 1])
    np.testing.assert_allclose(f.right, swap, atol=1e-15)
    np.testing.assert_allclose(f.left, swap, atol=1e-15)


def test_frame_upper_triangular():
    f = build_frame([[1, 1], [0, 2]])
    np.testing.assert_allclose(f.right[:, 0], [1, 0])
    np.testing.assert_allclose(f.right[:, 1], [R2, R2])
    # left vectors are multiples of (1,-1) and (0,1)
    l0, l1 = f.left[:, 0], f.left[:, 1]
    assert abs(l0[0] + l0[1]) < 1e-14 and abs(l1[0]) < 1e-14
    np.testing.assert_allclose(f.left.conj().T @ f.right, np.eye(2), atol=1e-14)


def test_frame_pt_cross_overlap():
    f = build_frame(pt(0.6))
    assert abs(np.vdot(f.left[:, 0], f.right[:, 1])) <= 1e-12
    assert abs(np.vdot(f.left[:, 1], f.right[:, 0])) <= 1e-12


def test_frame_exceptional_point():
    with pytest.raises(DegenerateSpectrumError):
        build_frame(pt(1.0))


def test_left_vectors_match_adjoint_eigenvectors():
    # oracle: left vectors are eigenvectors of H^dagger with conjugate eigenvalues
    rng = np.random.default_rng(5)
    H = rand_matrix(rng, 5)
    f = build_frame(H)
    for n in range(5):
        l = f.left[:, n]
        np.testing.assert_allclose(H.conj().T @ l, np.conj(f.eigenvalues[n]) * l, atol=1e-10)


@settings(max_examples=100)
@given(seeds, st.integers(2, 8))
def test_frame_invariants(seed, N):
    f = build_frame(rand_matrix(np.random.default_rng(seed), N))
    assert f.biorthonormality_residual() <= 1e-10
    assert f.completeness_residual() <= 1e-9


def test_match_identity_and_swap():
    f = build_frame(rand_matrix(np.random.default_rng(1), 4))
    assert match_permutation(f, f) == [0, 1, 2, 3]
    perm = [2, 0, 3, 1]
    g = type(f)(f.eigenvalues[perm], f.right[:, perm], f.left[:, perm])
    m = match_permutation(f, g)
    # prev triple n sits at column m[n] of g
    assert [perm[c] for c in m] == [0, 1, 2, 3]
    h = match_frames(f, g)
    np.testing.assert_allclose(h.eigenvalues, f.eigenvalues)


def test_match_pt_neighbours():
    a, b = build_frame(pt(0.59)), build_frame(pt(0.60))
    assert match_permutation(a, b) == [0, 1]


def test_match_rephases_overlaps():
    rng = np.random.default_rng(2)
    f = build_frame(rand_matrix(rng, 3))
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
    g = type(f)(f.eigenvalues, f.right * phases, f.left * phases)
    h = match_frames(f, g)
    ov = np.einsum("in,in->n", f.left.conj(), h.right)
    np.testing.assert_allclose(ov, 1.0, atol=1e-12)
    assert h.biorthonormality_residual() <= 1e-12


def test_match_ambiguous():
    f = build_frame(np.diag([1.0, 2.0]))
    g = type(f)(f.eigenvalues, np.array([[R2, R2], [R2, -R2]]), np.array([[R2, R2], [R2, -R2]]))
    with pytest.raises(AmbiguousMatchError):
        match_permutation(f, g)


def test_match_continuity_along_pt_path():
    # eigenvalue curves stay continuous to first order in the step
    gs = np.linspace(0.0, 0.9, 901)
    prev = build_frame(pt(gs[0]))
    for g in gs[1:]:
        nxt = match_frames(prev, build_frame(pt(g)))
        assert np.abs(nxt.eigenvalues - prev.eigenvalues).max() <= 10 * (gs[1] - gs[0])
        prev = nxt


def test_dual_partner_eigenstate():
    f = build_frame(rand_matrix(np.random.default_rng(8), 4))
    for k in range(4):
        p = dual_partner(f, f.right[:, k])
        np.testing.assert_allclose(p.dual, f.left[:, k], atol=1e-12)


def test_dual_partner_identity_frame():
    f = build_frame(np.diag([1.0, 2.0]))
    p = dual_partner(f, [1, 1])
    np.testing.assert_allclose(p.dual, [0.5, 0.5])
    assert binorm_defect(p) == 0


@settings(max_examples=100)
@given(seeds)
def test_dual_partner_binormalized(seed):
    rng = np.random.default_rng(seed)
    f = build_frame(rand_matrix(rng, 4))
    assert binorm_defect(dual_partner(f, crandn(rng, 4))) <= 1e-12


def test_dual_partner_zero():
    with pytest.raises(ZeroVectorError):
        dual_partner(build_frame(np.diag([1.0, 2.0])), [0, 0])


def test_complement_identity_frame():
    f = build_frame(np.diag([1.0, 2.0, 3.0]))
    comp = biorthogonal_complement(f, StatePair(np.eye(3)[0], np.eye(3)[0]))
    span = np.array([c.state for c in comp])
    assert np.abs(span[:, 0]).max() <= 1e-15
    assert np.linalg.matrix_rank(span[:, 1:]) == 2


def test_complement_two_dimensional():
    f = build_frame(np.diag([1.0, 2.0]))
    p = StatePair.self_dual([R2, R2])
    (c,) = biorthogonal_complement(f, p)
    assert abs(np.vdot(c.dual, p.state)) <= 1e-15
    assert abs(np.vdot(p.dual, c.state)) <= 1e-15
    assert abs(c.overlap - 1) <= 1e-15


@settings(max_examples=100)
@given(seeds, st.integers(2, 6))
def test_complement_properties(seed, N):
    rng = np.random.default_rng(seed)
    f = build_frame(rand_matrix(rng, N))
    p = dual_partner(f, crandn(rng, N))
    comp = biorthogonal_complement(f, p)
    assert len(comp) == N - 1
    for i, c in enumerate(comp):
        assert abs(np.vdot(c.dual, p.state)) <= 1e-10
        assert abs(np.vdot(p.dual, c.state)) <= 1e-10
        assert abs(c.overlap - 1) <= 1e-10
        for d in comp[:i]:
            assert abs(np.vdot(d.dual, c.state)) <= 1e-10


def test_gauge_examples():
    p = StatePair(np.array([1, 2j]), np.array([0.2, -0.2j]))
    q = apply_gauge(p, 0.0)
    np.testing.assert_array_equal(q.state, p.state)
    q = apply_gauge(p, np.pi)
    np.testing.assert_allclose(q.state, -p.state, atol=1e-15)
    np.testing.assert_allclose(q.dual, -p.dual, atol=1e-15)
    q = apply_gauge(p, 1j)
    np.testing.assert_allclose(q.state, np.exp(-1) * p.state)
    np.testing.assert_allclose(q.dual, np.exp(1) * p.dual)
    assert abs(q.overlap - p.overlap) <= 1e-15


@given(seeds, st.complex_numbers(max_magnitude=3.0))
def test_gauge_preserves_binormalization(seed, zeta):
    p = rand_pair(np.random.default_rng(seed), 3)
    g = GaugeTransform(zeta)
    q = g(p)
    assert abs(q.overlap - p.overlap) <= 1e-15 * np.exp(2 * abs(zeta.imag)) + 1e-14
    back = g.inverse()(q)
    np.testing.assert_allclose(back.state, p.state, atol=1e-12)
    np.testing.assert_allclose(back.dual, p.dual, atol=1e-12)


def test_binorm_defect_examples():
    assert binorm_defect(StatePair(E1, E1)) == 0
    assert binorm_defect(StatePair(E1, 2 * E1)) == 1
    assert binorm_defect(StatePair(E1, E2)) == 1
