import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import simpson
from scipy.linalg import expm

from biophase import build_frame
from biophase.biorthogonal import StatePair, apply_gauge
from biophase.dynamics import HamiltonianPath, TimeGrid, TimeProfile, evolve_pair
from biophase.errors import AnchorError, AnchorSearchError, BiorthogonalError, GridError
from biophase.geometry import SampledCurve, distance_mod_pi, polygon_limit_phase, polygon_phase
from biophase.phases import (AnchorState, PhaseResult, anchor_support, anchored_phase,
                             auto_anchor, bracket_phase, geometric_phase,
                             geometric_phase_anchored, geometric_phase_between,
                             offdiagonal_from_pairs, offdiagonal_phase)

from _util import E1, E2, R2, SX, SY, SZ, crandn, rand_matrix, rand_pair, rand_path, self_dual

seeds = st.integers(0, 2**32 - 1)
ZERO = HamiltonianPath.constant(np.zeros((2, 2)))


def flat_traj(p0, pt, steps=4):
    """Trajectory-shaped container with prescribed endpoints and zero H."""
    tr = evolve_pair(ZERO, p0, TimeGrid(0, 1, steps))
    states, duals = tr.states.copy(), tr.duals.copy()
    states[-1], duals[-1] = pt.state, pt.dual
    return type(tr)(tr.grid, tr.times, states, duals, tr.defects)


# -- direct phase ---------------------------------------------------------------

def test_constant_h_eigenstate():
    rng = np.random.default_rng(0)
    H = rand_matrix(rng, 3)
    frame = build_frame(H)
    t1 = 2.0
    tr = evolve_pair(HamiltonianPath.constant(H), frame.pair(1), TimeGrid(0, t1, 2000))
    res = geometric_phase(tr, HamiltonianPath.constant(H))
    E = frame.eigenvalues[1]
    assert abs(res.pancharatnam.value - (-E * t1)) < 1e-9
    assert abs(res.dynamical_integral - E * t1) < 1e-9
    assert abs(res.geometric) < 1e-9
    assert res.mode == "direct" and res.anchor_used is None


def test_zero_hamiltonian():
    rng = np.random.default_rng(1)
    path = HamiltonianPath.constant(np.zeros((3, 3)))
    res = geometric_phase(evolve_pair(path, rand_pair(rng, 3), TimeGrid(0, 1, 10)), path)
    assert res.dynamical == 0
    assert abs(res.pancharatnam.value) < 1e-15 and abs(res.geometric) < 1e-15


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_decomposition_identity(seed):
    rng = np.random.default_rng(seed)
    path = rand_path(rng, 3)
    tr = evolve_pair(path, rand_pair(rng, 3), TimeGrid(0, 1, 200))
    res = geometric_phase(tr, path)
    assert res.geometric == res.pancharatnam.value - res.dynamical


def test_biorthogonal_endpoints_rejected():
    path = HamiltonianPath.constant(np.pi / 2 * SY)
    tr = evolve_pair(path, self_dual(E1), TimeGrid(0, 1, 1000))
    with pytest.raises(BiorthogonalError, match="geometric_phase_anchored"):
        geometric_phase(tr, path)


def test_hermitian_reduction_matches_standard_formula():
    rng = np.random.default_rng(2)
    A = rand_matrix(rng, 3)
    B = rand_matrix(rng, 3)
    path = HamiltonianPath([(A + A.conj().T, TimeProfile()),
                            (B + B.conj().T, TimeProfile((), 2.0, (1.0,), ()))])
    psi0 = crandn(rng, 3)
    psi0 /= np.linalg.norm(psi0)
    tr = evolve_pair(path, self_dual(psi0), TimeGrid(0, 3, 3000))
    res = geometric_phase(tr, path)
    # oracle: arg<psi0|psi_t> (unwrapped) + int <psi|H|psi> dt, computed independently
    ov = tr.states @ psi0.conj()
    arg = np.unwrap(np.angle(ov))[-1]
    e = np.array([np.vdot(s, path(t) @ s).real for t, s in zip(tr.times, tr.states)])
    want = arg + simpson(e, x=tr.times)
    assert abs(res.geometric.imag) <= 1e-7
    assert distance_mod_pi(res.geometric, want) <= 1e-8


def test_geometric_phase_matches_closed_loop():
    # gamma_geo(0,t) = -(closed loop of the trajectory and the return geodesic)
    rng = np.random.default_rng(3)
    path = rand_path(rng, 3)
    tr = evolve_pair(path, rand_pair(rng, 3), TimeGrid(0, 1, 4000))
    res = geometric_phase(tr, path)
    loop = polygon_limit_phase(tr)
    assert distance_mod_pi(loop.value, -res.geometric) <= 1e-8
    c = SampledCurve(tr.times, tr.states, tr.duals).gauged(lambda t: 0.7 * t**2 - 0.2j * t)
    assert distance_mod_pi(polygon_limit_phase(c).value, -res.geometric) <= 1e-8


def test_between_reverses_sign():
    rng = np.random.default_rng(4)
    path = rand_path(rng, 2)
    tr = evolve_pair(path, rand_pair(rng, 2), TimeGrid(0, 1, 400))
    fwd = geometric_phase_between(tr, path, 100, 300).geometric
    rev = geometric_phase_between(tr, path, 300, 100).geometric
    assert abs(fwd + rev) < 1e-12
    with pytest.raises(GridError):
        geometric_phase_between(tr, path, 5, 6)


# -- Berry phase oracle ------------------------------------------------------------

def rotating_field(cos_theta, T):
    """``H(t) = n(t).sigma`` on a cone with one turn in time ``T``."""
    s = np.sqrt(1 - cos_theta**2)
    w = 2 * np.pi / T
    path = HamiltonianPath([(cos_theta * SZ, TimeProfile()),
                            (s * SX, TimeProfile((), w, (1.0,), ())),
                            (s * SY, TimeProfile((), w, (), (1.0,)))], t_domain=(0, T))
    return path, w


def test_rotating_field_against_exact_solution():
    # exact: psi(t) = exp(-i w t sz/2) exp(-i H_eff t) psi0, H_eff = H(0) - (w/2) sz
    ct, T = 0.75, 40.0
    path, w = rotating_field(ct, T)
    frame = build_frame(path(0.0))
    p0 = frame.pair(1)                      # eigenvalue +1, aligned with the field
    tr = evolve_pair(path, p0, TimeGrid(0, T, 8000))
    Heff = path(0.0) - w / 2 * SZ
    ts = tr.times
    exact = np.array([expm(-1j * w * t / 2 * SZ) @ expm(-1j * Heff * t) @ p0.state for t in ts])
    assert np.abs(tr.states - exact).max() < 1e-8
    # phase components from the exact states
    e = np.array([np.vdot(x, path(t) @ x) for t, x in zip(ts, exact)])
    ov = exact @ p0.state.conj()
    want = np.unwrap(np.angle(ov))[-1] + simpson(e, x=ts)
    res = geometric_phase(tr, path)
    assert abs(res.geometric.imag) < 1e-9
    assert distance_mod_pi(res.geometric, want) < 1e-7


def test_berry_phase_approached_slowly():
    # solid angle 2 pi (1 - cos theta); error shrinks as the loop slows down
    ct = 0.75
    berry = -np.pi * (1 - ct)
    errs = []
    for T in (50.0, 100.0, 200.0):
        path, _ = rotating_field(ct, T)
        p0 = build_frame(path(0.0)).pair(1)
        tr = evolve_pair(path, p0, TimeGrid(0, T, int(100 * T)))
        errs.append(distance_mod_pi(geometric_phase(tr, path).geometric, berry))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.1


# -- anchored phase -------------------------------------------------------------

def test_anchored_flip_examples():
    p0, pt = self_dual(E1), self_dual(E2)
    a1 = self_dual([R2, R2])
    a2 = self_dual([R2, 1j * R2])
    assert abs(anchored_phase(p0, pt, a1).value) <= 1e-12
    assert abs(anchored_phase(p0, pt, a2).value - np.pi / 2) <= 1e-12
    res = geometric_phase_anchored(flat_traj(p0, pt), ZERO, a1)
    assert res.geometric == 0 and res.mode == "anchored"
    np.testing.assert_array_equal(res.anchor_used, a1.state)
    assert res.direct_discrepancy is None


def test_anchored_error_names_overlap():
    with pytest.raises(AnchorError) as info:
        anchored_phase(self_dual(E1), self_dual(E2), self_dual(E2))
    assert info.value.quantity == "<psi~(0)|a>"
    with pytest.raises(AnchorError) as info:
        anchored_phase(self_dual(E1), self_dual(E2), self_dual(E1))
    assert info.value.quantity == "<a~|psi(t)>"


def test_anchor_state_validation():
    with pytest.raises(AnchorError):
        AnchorState(self_dual(E1), 0.0)
    a = AnchorState.for_endpoints(self_dual([R2, R2]), [self_dual(E1), self_dual(E2)])
    assert a.min_overlap == pytest.approx(R2)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(2, 4))
def test_anchor_at_intermediate_state_composes(seed, N):
    rng = np.random.default_rng(seed)
    path = rand_path(rng, N)
    tr = evolve_pair(path, rand_pair(rng, N), TimeGrid(0, 1, 200))
    k1 = 2 * int(rng.integers(1, 99))
    res = geometric_phase_anchored(tr, path, tr.pair(k1))
    want = (geometric_phase_between(tr, path, 0, k1).geometric
            - geometric_phase_between(tr, path, len(tr) - 1, k1).geometric)
    assert abs(res.geometric - want) <= 1e-9


def test_anchored_reports_discrepancy_from_direct():
    rng = np.random.default_rng(5)
    path = rand_path(rng, 3)
    tr = evolve_pair(path, rand_pair(rng, 3), TimeGrid(0, 1, 500))
    res = geometric_phase_anchored(tr, path, tr.pair(250))
    # the phase is not additive: the gap is the closed triangle (0, t1, t)
    tri = polygon_phase([tr.initial, tr.pair(250), tr.final]).value
    assert abs(res.direct_discrepancy) > 1e-3
    assert distance_mod_pi(res.direct_discrepancy, tri) < 1e-9


def test_anchored_flip_trajectory():
    path = HamiltonianPath.constant(np.pi / 2 * SY)
    tr = evolve_pair(path, self_dual(E1), TimeGrid(0, 1, 1000))
    r1 = geometric_phase_anchored(tr, path, self_dual([R2, R2]))
    r2 = geometric_phase_anchored(tr, path, self_dual([R2, 1j * R2]))
    # real rotation in a real plane: zero dynamical term for both anchors
    assert abs(r1.dynamical) < 1e-12 and abs(r2.dynamical) < 1e-12
    assert abs(r1.geometric) < 1e-9
    # second anchor is followed continuously; the value agrees with the hand result mod pi
    assert distance_mod_pi(r2.geometric, np.pi / 2) < 1e-9


# -- auto anchor ----------------------------------------------------------------

def test_auto_anchor_examples():
    a = auto_anchor([self_dual(E1)])
    assert a.min_overlap >= R2 - 1e-15
    b = auto_anchor([self_dual(E1), self_dual(E2)])
    assert b.min_overlap >= 0.4
    assert anchor_support(b.pair, [self_dual(E1), self_dual(E2)]) == b.min_overlap


def test_auto_anchor_deterministic():
    rng = np.random.default_rng(6)
    ends = [rand_pair(rng, 4) for _ in range(3)]
    a = auto_anchor(ends, seed=11)
    b = auto_anchor(ends, seed=11)
    np.testing.assert_array_equal(a.pair.state, b.pair.state)
    assert a.min_overlap == b.min_overlap


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_auto_anchor_beats_every_basis_vector(seed):
    rng = np.random.default_rng(seed)
    ends = [rand_pair(rng, 3) for _ in range(2)]
    a = auto_anchor(ends, seed=seed, budget=50)
    for v in np.eye(3, dtype=complex):
        assert a.min_overlap >= anchor_support(self_dual(v), ends)


def test_auto_anchor_search_failure():
    # no state has overlap above 0.99 with both e1 and e2
    with pytest.raises(AnchorSearchError):
        auto_anchor([self_dual(E1), self_dual(E2)], budget=10, tol_bio=0.99)
    with pytest.raises(AnchorSearchError):
        auto_anchor([])


# -- off-diagonal phase --------------------------------------------------------

def test_offdiagonal_swap_example():
    a = self_dual([R2, R2])
    g = offdiagonal_from_pairs(self_dual(E1), self_dual(E2), self_dual(E2), self_dual(E1), a)
    assert abs(complex(g)) <= 1e-10
    # with a real trajectory: (pi/2) sigma_y carries e1 -> e2 and e2 -> -e1
    path = HamiltonianPath.constant(np.pi / 2 * SY)
    grid = TimeGrid(0, 1, 1000)
    tj = evolve_pair(path, self_dual(E1), grid)
    tk = evolve_pair(path, self_dual(E2), grid)
    assert abs(complex(offdiagonal_phase(tj, tk, path, a))) <= 1e-10


def test_offdiagonal_j_equals_k():
    rng = np.random.default_rng(7)
    path = rand_path(rng, 2)
    tr = evolve_pair(path, rand_pair(rng, 2), TimeGrid(0, 1, 400))
    a = auto_anchor([tr.initial, tr.final])
    g = offdiagonal_phase(tr, tr, path, a)
    want = (2 * geometric_phase_anchored(tr, path, a).geometric
            + 2 * bracket_phase(tr.initial, a, tr.final).value)
    assert abs(g.value - want) < 1e-12


def test_offdiagonal_errors():
    path = HamiltonianPath.constant(SZ)
    t1 = evolve_pair(path, self_dual(E1), TimeGrid(0, 1, 10))
    t2 = evolve_pair(path, self_dual(E2), TimeGrid(0, 1, 20))
    with pytest.raises(GridError):
        offdiagonal_phase(t1, t2, path, self_dual([R2, R2]))
    with pytest.raises(BiorthogonalError) as info:
        bracket_phase(self_dual(E1), self_dual([R2, R2]), self_dual(E2))
    assert info.value.quantity == "<y~(t)|x(0)>"


def adiabatic_sweep(T):
    # H = cos^3(pi t/T) sz + sin^3(pi t/T) sx on [0, T]: field turns from +z to -z
    w = np.pi / T
    path = HamiltonianPath([(SZ, TimeProfile((), w, (0.75, 0, 0.25), ())),
                            (SX, TimeProfile((), w, (), (0.75, 0, -0.25)))], t_domain=(0, T))
    grid = TimeGrid(0, T, int(50 * T))
    frame = build_frame(path(0.0))
    return path, [evolve_pair(path, frame.pair(n), grid) for n in (0, 1)]


def test_adiabatic_sweep_profile():
    path, _ = adiabatic_sweep(10.0)
    for t in (0.0, 2.5, 7.0):
        c, s = np.cos(np.pi * t / 10), np.sin(np.pi * t / 10)
        np.testing.assert_allclose(path(t), c**3 * SZ + s**3 * SX, atol=1e-14)


def test_adiabatic_offdiagonal_converges():
    anchor = self_dual([R2, 1j * R2])
    vals = []
    for T in (100.0, 200.0):
        path, (tj, tk) = adiabatic_sweep(T)
        vals.append(complex(offdiagonal_phase(tj, tk, path, anchor)))
    assert abs(vals[1].real - vals[0].real) <= 1e-3
    assert max(abs(v.imag) for v in vals) <= 1e-6


def test_phase_result_compose():
    from biophase.geometry import PhaseValue
    r = PhaseResult.compose(PhaseValue(0.5 + 0.1j, 1), 0.2 - 0.3j, endpoint_overlap=1.0)
    assert r.geometric == (0.5 + 0.1j) - (0.2 - 0.3j)
    assert r.dynamical_integral == -(0.2 - 0.3j)
