"""Biorthonormal frames and binormalized state/dual pairs.

A state ``|psi>`` of a non-Hermitian system is always carried together with
its dual ``|psi~>``; phases are built from the mixed products ``<psi~|phi>``
rather than ordinary inner products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousMatchError, DimensionError, ZeroVectorError
from .linalg import as_matrix, as_vector, eigendecompose, solve

#: default tolerance on ``<psi~|psi> = 1``
TOL_BINORM = 1e-9


@dataclass(frozen=True)
class StatePair:
    """A state vector together with an explicit dual vector."""

    state: np.ndarray
    dual: np.ndarray

    def __post_init__(self):
        s = as_vector(self.state, "state")
        d = as_vector(self.dual, "dual")
        if s.shape != d.shape:
            raise DimensionError(f"state has dim {s.size} but dual has dim {d.size}")
        object.__setattr__(self, "state", s)
        object.__setattr__(self, "dual", d)

    @property
    def dim(self) -> int:
        return self.state.size

    @property
    def overlap(self) -> complex:
        """``<psi~|psi>``; equal to 1 for a binormalized pair."""
        return complex(np.vdot(self.dual, self.state))

    @classmethod
    def self_dual(cls, v) -> "StatePair":
        """Pair ``v`` with ``v / ||v||^2`` (the Hermitian convention)."""
        v = as_vector(v)
        n2 = float(np.vdot(v, v).real)
        if n2 == 0.0:
            raise ZeroVectorError("cannot pair the zero vector", operation="self_dual")
        return cls(v, v / n2)

    def binormalized(self) -> "StatePair":
        """Rescale the dual so that ``<psi~|psi> = 1``."""
        ov = self.overlap
        if ov == 0:
            raise ZeroVectorError("state and dual are biorthogonal", operation="binormalized")
        return StatePair(self.state, self.dual / np.conj(ov))


def binorm_defect(pair: StatePair) -> float:
    """``|<psi~|psi> - 1|``."""
    return abs(pair.overlap - 1.0)


@dataclass(frozen=True)
class GaugeTransform:
    """``psi -> exp(i zeta) psi`` together with ``psi~ -> exp(i conj(zeta)) psi~``."""

    zeta: complex

    def inverse(self) -> "GaugeTransform":
        return GaugeTransform(-self.zeta)

    def __call__(self, pair: StatePair) -> StatePair:
        return apply_gauge(pair, self)


def apply_gauge(pair: StatePair, g: GaugeTransform | complex) -> StatePair:
    """Complex gauge transform; leaves ``<psi~|psi>`` unchanged."""
    zeta = complex(g.zeta if isinstance(g, GaugeTransform) else g)
    return StatePair(np.exp(1j * zeta) * pair.state,
                     np.exp(1j * np.conj(zeta)) * pair.dual)


@dataclass(frozen=True)
class BiorthonormalFrame:
    """Eigen-triples ``(E_n, |n>, |n~>)`` with ``<m~|n> = delta_mn``.

    ``right[:, n]`` and ``left[:, n]`` hold the right and left vectors.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    source_time: float = 0.0
    permutation: tuple = field(default=(), compare=False)

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def pair(self, n: int) -> StatePair:
        return StatePair(self.right[:, n], self.left[:, n])

    def biorthonormality_residual(self) -> float:
        G = self.left.conj().T @ self.right
        return float(np.abs(G - np.eye(self.dim)).max())

    def completeness_residual(self) -> float:
        P = self.right @ self.left.conj().T
        return float(np.linalg.norm(P - np.eye(self.dim)))


def build_frame(H, t: float = 0.0, tol_gap: float | None = None) -> BiorthonormalFrame:
    """Biorthonormal eigenframe of ``H``.

    Left vectors are the conjugated rows of ``V^{-1}``, so biorthonormality
    holds to the accuracy of the inversion.
    """
    H = as_matrix(H, "H")
    spec = eigendecompose(H, tol_gap=tol_gap)
    V = spec.right
    Vinv = solve(V, np.eye(V.shape[0], dtype=complex))
    return BiorthonormalFrame(spec.eigenvalues, V, Vinv.conj().T, float(t),
                              tuple(range(spec.dim)))


def match_permutation(prev: BiorthonormalFrame, nxt: BiorthonormalFrame,
                      tie_tol: float = 1e-12) -> list[int]:
    """Greedy assignment ``perm`` with ``nxt`` triple ``perm[n]`` matched to ``prev`` triple ``n``."""
    if prev.dim != nxt.dim:
        raise DimensionError("frames differ in dimension", operation="match_frames")
    O = np.abs(prev.left.conj().T @ nxt.right)
    N = prev.dim
    perm = [-1] * N
    rows = set(range(N))
    cols = set(range(N))
    for _ in range(N):
        r_idx = sorted(rows)
        c_idx = sorted(cols)
        sub = O[np.ix_(r_idx, c_idx)]
        flat = int(np.argmax(sub))
        i, j = divmod(flat, len(c_idx))
        best = sub[i, j]
        others = np.concatenate([np.delete(sub[i, :], j), np.delete(sub[:, j], i)])
        if others.size and np.any(np.abs(others - best) <= tie_tol):
            raise AmbiguousMatchError(
                f"overlap {best:.3e} is not uniquely maximal for triple {r_idx[i]}",
                operation="match_frames", quantity="overlap")
        perm[r_idx[i]] = c_idx[j]
        rows.discard(r_idx[i])
        cols.discard(c_idx[j])
    return perm


def match_frames(prev: BiorthonormalFrame, nxt: BiorthonormalFrame) -> BiorthonormalFrame:
    """Reorder and rephase ``nxt`` to continue ``prev`` smoothly.

    After matching, ``<prev.left_n|next.right_n>`` is real and positive
    whenever it is nonzero; biorthonormality is untouched because the left
    vector receives the compensating factor.
    """
    perm = match_permutation(prev, nxt)
    E = nxt.eigenvalues[perm]
    R = nxt.right[:, perm].copy()
    L = nxt.left[:, perm].copy()
    for n in range(prev.dim):
        ov = np.vdot(prev.left[:, n], R[:, n])
        if ov != 0:
            u = np.conj(ov) / abs(ov)  # e^{-i arg ov}
            R[:, n] *= u
            L[:, n] *= u  # 1 / conj(u) == u for |u| = 1
    return BiorthonormalFrame(E, R, L, nxt.source_time, tuple(perm))


def dual_partner(frame: BiorthonormalFrame, psi) -> StatePair:
    """Binormalized dual of ``psi`` built from the frame.

    With ``psi = sum c_n |n>``, the dual is ``sum c_n / sum|c_m|^2 |n~>``; an
    eigenvector is therefore paired with its own left vector.
    """
    psi = as_vector(psi, "psi")
    if psi.size != frame.dim:
        raise DimensionError(f"psi has dim {psi.size}, frame has dim {frame.dim}")
    if not np.any(psi):
        raise ZeroVectorError("psi is the zero vector", operation="dual_partner")
    c = frame.left.conj().T @ psi
    dual = frame.left @ (c / np.vdot(c, c).real)
    return StatePair(psi, dual)


def biorthogonal_complement(frame: BiorthonormalFrame, pair: StatePair) -> list[StatePair]:
    """``N - 1`` pairs biorthogonal to ``pair`` and to each other.

    Frame vectors are projected with the oblique projector
    ``Q = 1 - |psi><psi~|`` and biorthonormalized one at a time, always
    taking the remaining frame index with the largest ``|<l_n|Q|r_n>|``.
    Because ``Q`` stays a projector whose trace is the number of pairs still
    missing, that pivot never drops below ``1/2``.
    """
    if pair.dim != frame.dim:
        raise DimensionError("pair and frame differ in dimension",
                             operation="biorthogonal_complement")
    N = frame.dim
    Q = np.eye(N, dtype=complex) - np.outer(pair.state, pair.dual.conj())
    remaining = list(range(N))
    out = []
    for _ in range(N - 1):
        g = np.array([np.vdot(frame.left[:, n], Q @ frame.right[:, n]) for n in remaining])
        k = int(np.argmax(np.abs(g)))
        n = remaining.pop(k)
        r = Q @ frame.right[:, n]
        l_ = Q.conj().T @ frame.left[:, n]
        a = np.linalg.norm(r)
        phi = r / a
        phi_d = l_ / np.conj(g[k] / a)
        out.append(StatePair(phi, phi_d))
        Q = Q - np.outer(phi, phi_d.conj())
    return out
