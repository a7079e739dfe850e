"""Dense complex linear-algebra primitives.

Vectors are 1-D complex ``ndarray`` objects and matrices are square 2-D
complex arrays.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateSpectrumError, DimensionError, NumericalError,
                     SingularMatrixError, ValidationError)

#: reciprocal condition number below which a matrix is treated as singular
RCOND_MIN = 1e-14
#: default relative eigen-residual tolerance
TOL_EIG = 1e-10
#: default relative gap tolerance, multiplied by ``||H||``
TOL_GAP_REL = 1e-8
# entries smaller than this do not fix the phase of an eigenvector
_PHASE_ENTRY_MIN = 1e-10


def as_vector(v, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"{name} must be a non-empty 1-D array, got shape {v.shape}",
                             quantity=name)
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} has non-finite entries", quantity=name)
    return v


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimensionError(f"{name} must be square, got shape {m.shape}", quantity=name)
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries", quantity=name)
    return m


def inner(u, v) -> complex:
    """Return ``<u|v> = sum(conj(u_k) v_k)`` (conjugate-linear in ``u``)."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionError(f"inner product of shapes {u.shape} and {v.shape}",
                             operation="inner")
    return complex(np.vdot(u, v))


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Scale ``v`` to unit norm with its first non-negligible entry real positive."""
    v = v / np.linalg.norm(v)
    idx = np.flatnonzero(np.abs(v) > _PHASE_ENTRY_MIN)
    if idx.size:
        a = v[idx[0]]
        v = v * (abs(a) / a)
    return v


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues ``E_n`` and unit-norm right eigenvectors (columns of ``right``)."""

    eigenvalues: np.ndarray
    right: np.ndarray
    condition_estimate: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def right_vectors(self) -> list[np.ndarray]:
        return [self.right[:, n] for n in range(self.dim)]


def default_tol_gap(H: np.ndarray) -> float:
    return TOL_GAP_REL * float(np.linalg.norm(H))


def min_gap(eigenvalues: np.ndarray) -> float:
    E = np.asarray(eigenvalues)
    if E.size < 2:
        return np.inf
    d = np.abs(E[:, None] - E[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def _order(E: np.ndarray, scale: float) -> np.ndarray:
    # sort by real part, then imaginary part; rounding keeps the order stable
    # against roundoff when real parts coincide
    re = np.round(E.real / scale, 9)
    im = np.round(E.imag / scale, 9)
    return np.lexsort((im, re))


def eigendecompose(H, tol_gap: float | None = None,
                   tol_eig: float = TOL_EIG) -> SpectralDecomposition:
    """Diagonalize a non-defective complex matrix.

    Eigenpairs are sorted by ``(Re E, Im E)``.  Each right vector has unit
    Euclidean norm and zero phase on its first non-negligible entry.

    Raises
    ------
    DegenerateSpectrumError
        If two eigenvalues are within ``tol_gap`` (default ``1e-8 * ||H||``)
        or the eigenvector matrix is numerically singular.
    NumericalError
        If LAPACK fails or an eigen-residual exceeds ``tol_eig * ||H||``.
    """
    H = as_matrix(H, "H")
    if tol_gap is None:
        tol_gap = default_tol_gap(H)
    if tol_gap < 0:
        raise ValidationError("tol_gap must be non-negative", quantity="tol_gap")
    try:
        E, V = np.linalg.eig(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}", operation="eigendecompose") from exc

    normH = float(np.linalg.norm(H))
    gap = min_gap(E)
    if gap <= tol_gap:
        raise DegenerateSpectrumError(
            f"eigenvalue separation {gap:.3e} <= tol_gap {tol_gap:.3e}",
            operation="eigendecompose", quantity="min_gap")

    order = _order(E, max(normH, 1.0))
    E = E[order]
    V = np.column_stack([fix_phase(V[:, k]) for k in order])

    rcond = 1.0 / np.linalg.cond(V)
    if not np.isfinite(rcond) or rcond < RCOND_MIN:
        raise DegenerateSpectrumError(
            f"eigenvector matrix is singular (rcond={rcond:.3e}); defective H",
            operation="eigendecompose", quantity="condition_estimate")

    resid = np.linalg.norm(H @ V - V * E, axis=0)
    if np.any(resid > tol_eig * max(normH, np.finfo(float).tiny)) and normH > 0:
        raise NumericalError(f"eigen-residual {resid.max():.3e} too large",
                             operation="eigendecompose", quantity="residual")
    return SpectralDecomposition(eigenvalues=E, right=V, condition_estimate=float(rcond))


def solve(M, B) -> np.ndarray:
    """Solve ``M X = B``; raise :class:`SingularMatrixError` if ``M`` is singular."""
    M = as_matrix(M, "M")
    B = np.asarray(B, dtype=complex)
    if B.shape[0] != M.shape[0]:
        raise DimensionError(f"right-hand side has {B.shape[0]} rows, expected {M.shape[0]}",
                             operation="solve")
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(M)
    rcond = 0.0 if not np.isfinite(cond) else 1.0 / cond
    if rcond < RCOND_MIN:
        raise SingularMatrixError(f"matrix is singular to working precision (rcond={rcond:.3e})",
                                  operation="solve", quantity="rcond")
    return np.linalg.solve(M, B)
