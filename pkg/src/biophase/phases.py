"""Geometric phases of evolving states: direct, anchored and off-diagonal.

For a trajectory ``psi(t)`` the complex geometric phase is

    gamma_geo(0, t) = theta_GP(0, t) - gamma_dyn(0, t)

with ``theta_GP = -(i/2) log(<psi~(0)|psi(t)> / <psi~(t)|psi(0)>)`` and
``gamma_dyn = -int <psi~|H|psi> dt``.  When the endpoints are biorthogonal
the logarithm is routed through an anchor state ``|a>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import simpson

from .biorthogonal import BiorthonormalFrame, StatePair
from .dynamics import HamiltonianPath, Trajectory, energy_expectations
from .errors import (AnchorError, AnchorSearchError, BiorthogonalError, DimensionError,
                     GridError)
from .geometry import TOL_BIO, PhaseValue, half_log_phase, unwrapped_half_log_phase


@dataclass(frozen=True)
class PhaseResult:
    pancharatnam: PhaseValue
    dynamical: complex
    geometric: complex
    endpoint_overlap: complex
    mode: str = "direct"
    anchor_used: np.ndarray | None = None
    direct_discrepancy: complex | None = None

    @classmethod
    def compose(cls, pancharatnam: PhaseValue, dynamical: complex, **kw) -> "PhaseResult":
        return cls(pancharatnam, complex(dynamical),
                   complex(pancharatnam.value - dynamical), **kw)

    @property
    def dynamical_integral(self) -> complex:
        """``int <psi~|H|psi> dt`` (the negative of ``dynamical``)."""
        return -self.dynamical


@dataclass(frozen=True)
class AnchorState:
    """Auxiliary pair ``(|a>, |a~>)`` and the smallest overlap it supports."""

    pair: StatePair
    min_overlap: float
    tol_bio: float = TOL_BIO

    def __post_init__(self):
        if not self.min_overlap > self.tol_bio:
            raise AnchorError(f"anchor min overlap {self.min_overlap:.3e} <= tol_bio",
                              operation="anchor", quantity="min_overlap")

    @classmethod
    def for_endpoints(cls, pair: StatePair, endpoints: Sequence[StatePair],
                      tol_bio: float = TOL_BIO) -> "AnchorState":
        return cls(pair, anchor_support(pair, endpoints) if endpoints else np.inf, tol_bio)


def anchor_support(anchor: StatePair, endpoints: Sequence[StatePair]) -> float:
    """``min |<psi~|a>|, |<a~|psi>|`` over the endpoints."""
    S = np.array([p.state for p in endpoints])
    D = np.array([p.dual for p in endpoints])
    return float(_support(S, D, anchor.state[None, :], anchor.dual[None, :])[0])


def _support(S, D, A, Ad) -> np.ndarray:
    # min overlap of every candidate (rows of A, Ad) against all supported pairs
    m1 = np.abs(D.conj() @ A.T).min(axis=0)
    m2 = np.abs(S @ Ad.conj().T).min(axis=0)
    return np.minimum(m1, m2)


def _anchor_pair(anchor) -> StatePair:
    return anchor.pair if isinstance(anchor, AnchorState) else anchor


# --------------------------------------------------------------------------
# direct phase

def _dyn_integral(traj: Trajectory, path: HamiltonianPath, i: int, j: int) -> complex:
    lo, hi = min(i, j), max(i, j)
    if hi - lo < 2:
        raise GridError("Simpson quadrature needs at least 2 steps",
                        operation="dynamical_phase", quantity="grid.steps")
    seg = traj.segment(lo, hi)
    val = complex(simpson(energy_expectations(seg, path), x=seg.times))
    return val if i < j else -val


def geometric_phase_between(traj: Trajectory, path: HamiltonianPath, i: int, j: int,
                            tol_bio: float = TOL_BIO) -> PhaseResult:
    """``gamma_geo(t_i, t_j)`` for two samples of a trajectory (either order).

    The logarithm is followed continuously along the samples between ``i``
    and ``j``, so the result carries no spurious multiples of ``pi``.
    """
    n = len(traj)
    i, j = i % n, j % n
    a = complex(np.vdot(traj.duals[i], traj.states[j]))
    b = complex(np.vdot(traj.duals[j], traj.states[i]))
    if abs(a) <= tol_bio or abs(b) <= tol_bio:
        raise BiorthogonalError(
            f"endpoints are biorthogonal (|overlaps| = {abs(a):.2e}, {abs(b):.2e}); "
            "use geometric_phase_anchored", operation="geometric_phase",
            quantity="endpoint_overlap")
    step = 1 if j >= i else -1
    ks = np.arange(i, j + step, step)
    num = traj.states[ks] @ traj.duals[i].conj()      # <psi~_i|psi_k>
    den = traj.duals[ks].conj() @ traj.states[i]      # <psi~_k|psi_i>
    theta = PhaseValue.of(unwrapped_half_log_phase(num / den))
    dyn = -_dyn_integral(traj, path, i, j)
    return PhaseResult.compose(theta, dyn, endpoint_overlap=a)


def geometric_phase(traj: Trajectory, path: HamiltonianPath,
                    tol_bio: float = TOL_BIO) -> PhaseResult:
    """Complex geometric phase between the first and last samples."""
    return geometric_phase_between(traj, path, 0, len(traj) - 1, tol_bio)


# --------------------------------------------------------------------------
# anchored phase

_ANCHOR_LABELS = ("<psi~(0)|a>", "<a~|psi(t)>", "<psi~(t)|a>", "<a~|psi(0)>")


def _anchored_factors(p0: StatePair, pt: StatePair, a: StatePair, tol_bio: float):
    f = (complex(np.vdot(p0.dual, a.state)), complex(np.vdot(a.dual, pt.state)),
         complex(np.vdot(pt.dual, a.state)), complex(np.vdot(a.dual, p0.state)))
    for label, v in zip(_ANCHOR_LABELS, f):
        if abs(v) <= tol_bio:
            raise AnchorError(f"anchor overlap {label} = {abs(v):.3e} <= tol_bio",
                              operation="geometric_phase_anchored", quantity=label)
    return f


def anchored_phase(p0: StatePair, pt: StatePair, anchor, tol_bio: float = TOL_BIO) -> PhaseValue:
    """``-(i/2) log[<psi~0|a><a~|psit> / (<psi~t|a><a~|psi0>)]``, principal branch."""
    f = _anchored_factors(p0, pt, _anchor_pair(anchor), tol_bio)
    return PhaseValue(half_log_phase(f[0] * f[1] / (f[2] * f[3])), 0)


def geometric_phase_anchored(traj: Trajectory, path: HamiltonianPath, anchor,
                             tol_bio: float = TOL_BIO) -> PhaseResult:
    """Geometric phase through an anchor; valid for biorthogonal endpoints too.

    The anchored ratio equals 1 at the first sample and is followed along
    the trajectory when every intermediate anchor overlap stays above
    ``tol_bio``; otherwise the principal branch is reported.
    """
    a = _anchor_pair(anchor)
    if a.dim != traj.states.shape[1]:
        raise DimensionError("anchor dimension does not match the trajectory",
                             operation="geometric_phase_anchored")
    p0, pt = traj.initial, traj.final
    f = _anchored_factors(p0, pt, a, tol_bio)
    ax = traj.states @ a.dual.conj()     # <a~|psi_k>
    xa = traj.duals.conj() @ a.state     # <psi~_k|a>
    if np.min(np.abs(ax)) > tol_bio and np.min(np.abs(xa)) > tol_bio:
        ratios = f[0] * ax / (xa * f[3])
        theta = PhaseValue.of(unwrapped_half_log_phase(ratios))
    else:
        theta = PhaseValue(half_log_phase(f[0] * f[1] / (f[2] * f[3])), 0)
    dyn = -_dyn_integral(traj, path, 0, len(traj) - 1)
    overlap = complex(np.vdot(p0.dual, pt.state))
    discrepancy = None
    if abs(overlap) > tol_bio and abs(np.vdot(pt.dual, p0.state)) > tol_bio:
        direct = geometric_phase(traj, path, tol_bio)
        discrepancy = complex(theta.value - dyn) - direct.geometric
    return PhaseResult.compose(theta, dyn, endpoint_overlap=overlap, mode="anchored",
                               anchor_used=a.state.copy(), direct_discrepancy=discrepancy)


def auto_anchor(endpoints: Sequence[StatePair], seed: int = 0, budget: int = 1000,
                tol_bio: float = TOL_BIO, frame: BiorthonormalFrame | None = None) -> AnchorState:
    """Pick the candidate anchor with the largest minimum overlap.

    Candidates, in order: basis vectors and (if given) frame pairs, the
    uniform superpositions with Fourier phases, then ``budget`` seeded
    random self-dual states.  Ties go to the earliest candidate.
    """
    if not endpoints:
        raise AnchorSearchError("auto_anchor needs at least one endpoint",
                                operation="auto_anchor")
    N = endpoints[0].dim
    cands: list[StatePair] = [StatePair.self_dual(v) for v in np.eye(N, dtype=complex)]
    if frame is not None:
        cands += [frame.pair(n) for n in range(frame.dim)]
    k = np.arange(N)
    for m in range(N):
        cands.append(StatePair.self_dual(np.exp(2j * np.pi * m * k / N) / np.sqrt(N)))
    rng = np.random.default_rng(seed)
    for _ in range(budget):
        v = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        cands.append(StatePair.self_dual(v / np.linalg.norm(v)))
    A = np.array([c.state for c in cands])
    Ad = np.array([c.dual for c in cands])
    scores = _support(np.array([p.state for p in endpoints]),
                      np.array([p.dual for p in endpoints]), A, Ad)
    best = int(np.argmax(scores))
    if scores[best] <= tol_bio:
        raise AnchorSearchError(f"no anchor with overlaps above {tol_bio:g} in "
                                f"{len(cands)} candidates", operation="auto_anchor",
                                quantity="min_overlap")
    return AnchorState(cands[best], float(scores[best]), tol_bio)


# --------------------------------------------------------------------------
# off-diagonal phase

def bracket_phase(x0: StatePair, a, yt: StatePair, tol_bio: float = TOL_BIO) -> PhaseValue:
    """Three-vertex term ``gamma[x(0), a, y(t)]``.

    ``-(i/2) log[<x~0|a><a~|yt><y~t|x0> / (<a~|x0><y~t|a><x~0|yt>)]``.
    """
    a = _anchor_pair(a)
    labels = ("<x~(0)|a>", "<a~|y(t)>", "<y~(t)|x(0)>", "<a~|x(0)>", "<y~(t)|a>", "<x~(0)|y(t)>")
    f = (np.vdot(x0.dual, a.state), np.vdot(a.dual, yt.state), np.vdot(yt.dual, x0.state),
         np.vdot(a.dual, x0.state), np.vdot(yt.dual, a.state), np.vdot(x0.dual, yt.state))
    for label, v in zip(labels, f):
        if abs(v) <= tol_bio:
            raise BiorthogonalError(f"overlap {label} = {abs(v):.3e} <= tol_bio",
                                    operation="offdiagonal_phase", quantity=label)
    return PhaseValue(half_log_phase(f[0] * f[1] * f[2] / (f[3] * f[4] * f[5])), 0)


@dataclass(frozen=True)
class OffDiagonalPhase:
    value: complex
    bracket_jk: PhaseValue
    bracket_kj: PhaseValue
    phase_j: complex
    phase_k: complex

    def __complex__(self):
        return self.value


def offdiagonal_from_pairs(j0: StatePair, jt: StatePair, k0: StatePair, kt: StatePair,
                           anchor, dyn_integral_j: complex = 0.0,
                           dyn_integral_k: complex = 0.0,
                           tol_bio: float = TOL_BIO) -> OffDiagonalPhase:
    """Off-diagonal phase from endpoint pairs and the two dynamical integrals."""
    a = _anchor_pair(anchor)
    b_jk = bracket_phase(j0, a, kt, tol_bio)
    b_kj = bracket_phase(k0, a, jt, tol_bio)
    g_j = anchored_phase(j0, jt, a, tol_bio).value + dyn_integral_j
    g_k = anchored_phase(k0, kt, a, tol_bio).value + dyn_integral_k
    return OffDiagonalPhase(complex(b_jk.value + b_kj.value + g_j + g_k), b_jk, b_kj,
                            complex(g_j), complex(g_k))


def offdiagonal_phase(traj_j: Trajectory, traj_k: Trajectory, path: HamiltonianPath,
                      anchor, tol_bio: float = TOL_BIO) -> OffDiagonalPhase:
    """``gamma_jk = gamma[j0,a,kt] + gamma[k0,a,jt] + gamma_j(0,t) + gamma_k(0,t)``.

    The single-state terms are anchored geometric phases including their
    dynamical integrals.
    """
    if traj_j.times.shape != traj_k.times.shape or not np.array_equal(traj_j.times, traj_k.times):
        raise GridError("trajectories j and k are sampled on different grids",
                        operation="offdiagonal_phase", quantity="grid")
    a = _anchor_pair(anchor)
    b_jk = bracket_phase(traj_j.initial, a, traj_k.final, tol_bio)
    b_kj = bracket_phase(traj_k.initial, a, traj_j.final, tol_bio)
    g_j = geometric_phase_anchored(traj_j, path, a, tol_bio).geometric
    g_k = geometric_phase_anchored(traj_k, path, a, tol_bio).geometric
    return OffDiagonalPhase(complex(b_jk.value + b_kj.value + g_j + g_k), b_jk, b_kj, g_j, g_k)
