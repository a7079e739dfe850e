"""Interference, generalized Pancharatnam phase and ray-space geometry.

Curves are handled as sampled objects exposing ``params`` (parameter
values), ``states`` and ``duals`` (arrays of shape ``(n_samples, N)``):
:class:`~biophase.dynamics.Trajectory`, :class:`GeodesicPath` and
:class:`SampledCurve` all qualify.  Derivatives along curves are
finite differences: fourth order for first derivatives and second order
for second derivatives on uniform grids.

Phases are complex.  ``-(i/2) log z`` is defined modulo ``pi`` in its real
part; single evaluations use the principal branch (real part in
``(-pi/2, pi/2]``), sequences are unwrapped by summing principal increments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import simpson

from .biorthogonal import TOL_BINORM, StatePair, apply_gauge, binorm_defect
from .errors import (BiorthogonalError, DegeneratePathError, GridError,
                     NotBinormalizedError)

TOL_BIO = 1e-6


# --------------------------------------------------------------------------
# phase values and branches

def _principal_arg(z):
    """``arg z`` in ``(-pi, pi]``; the negative real axis maps to ``+pi``."""
    z = np.asarray(z, dtype=complex)
    a = np.angle(z)
    on_cut = (z.imag == 0) & (z.real < 0)
    return np.where(on_cut, np.pi, a)


def half_log_phase(ratio: complex) -> complex:
    """Principal ``-(i/2) log(ratio)``; real part in ``(-pi/2, pi/2]``."""
    r = complex(ratio)
    return 0.5 * float(_principal_arg(r)) - 0.5j * np.log(abs(r))


def unwrapped_half_log_phase(ratios) -> complex:
    """``-(i/2) log`` of the last ratio, continued along the whole sequence.

    The argument is accumulated from principal increments between
    consecutive ratios, starting from the principal value of the first.
    """
    r = np.asarray(ratios, dtype=complex)
    arg = float(_principal_arg(r[0])) + float(np.sum(np.angle(r[1:] / r[:-1])))
    return 0.5 * arg - 0.5j * np.log(abs(r[-1]))


@dataclass(frozen=True)
class PhaseValue:
    """Complex phase with branch bookkeeping.

    ``value.real`` equals a principal value in ``(-pi/2, pi/2]`` plus
    ``branch_offset * pi``.
    """

    value: complex
    branch_offset: int = 0

    @classmethod
    def of(cls, value: complex) -> "PhaseValue":
        v = complex(value)
        k = int(np.ceil((v.real - np.pi / 2) / np.pi))
        return cls(v, k)

    @property
    def principal(self) -> complex:
        return self.value - self.branch_offset * np.pi

    def __complex__(self):
        return self.value

    def __add__(self, other):
        return PhaseValue.of(self.value + complex(other))

    def __neg__(self):
        return PhaseValue.of(-self.value)


def distance_mod_pi(a: complex, b: complex) -> float:
    """``|a - b|`` with the real part of the difference reduced modulo ``pi``."""
    d = complex(a) - complex(b)
    re = (d.real + np.pi / 2) % np.pi - np.pi / 2
    return float(np.hypot(re, d.imag))


# --------------------------------------------------------------------------
# two-point quantities

def _overlaps(p1: StatePair, p2: StatePair, tol_bio: float, operation: str):
    a = complex(np.vdot(p1.dual, p2.state))   # <psi~_1|psi_2>
    b = complex(np.vdot(p2.dual, p1.state))   # <psi~_2|psi_1>
    if abs(a) <= tol_bio:
        raise BiorthogonalError(f"|<psi~_1|psi_2>| = {abs(a):.3e} <= tol_bio",
                                operation=operation, quantity="<psi~_1|psi_2>")
    if abs(b) <= tol_bio:
        raise BiorthogonalError(f"|<psi~_2|psi_1>| = {abs(b):.3e} <= tol_bio",
                                operation=operation, quantity="<psi~_2|psi_1>")
    return a, b


def interference_intensity(p1: StatePair, p2: StatePair, theta: complex) -> complex:
    """``<e^{i conj(theta)} psi~_1 + psi~_2 | e^{i theta} psi_1 + psi_2>``.

    For binormalized pairs this is
    ``2 + e^{i theta} <psi~_2|psi_1> + e^{-i theta} <psi~_1|psi_2>``.
    """
    q = apply_gauge(p1, theta)
    return complex(np.vdot(q.dual + p2.dual, q.state + p2.state))


def pancharatnam_phase(p1: StatePair, p2: StatePair, tol_bio: float = TOL_BIO) -> PhaseValue:
    """``-(i/2) log(<psi~_1|psi_2> / <psi~_2|psi_1>)`` on the principal branch.

    This is the stationary point of :func:`interference_intensity` in
    ``theta``.
    """
    a, b = _overlaps(p1, p2, tol_bio, "pancharatnam_phase")
    return PhaseValue(half_log_phase(a / b), 0)


def in_phase_residual(p1: StatePair, p2: StatePair, tol_bio: float = TOL_BIO) -> complex:
    """``sqrt(<psi~_1|psi_2> / <psi~_2|psi_1>) - 1`` (zero when in phase)."""
    theta = pancharatnam_phase(p1, p2, tol_bio).value
    return complex(np.exp(1j * theta) - 1.0)


# --------------------------------------------------------------------------
# sampled curves

@dataclass(frozen=True)
class SampledCurve:
    params: np.ndarray
    states: np.ndarray
    duals: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "params", np.asarray(self.params, dtype=float))
        object.__setattr__(self, "states", np.asarray(self.states, dtype=complex))
        object.__setattr__(self, "duals", np.asarray(self.duals, dtype=complex))

    def __len__(self):
        return self.params.size

    def pair(self, k: int) -> StatePair:
        return StatePair(self.states[k], self.duals[k])

    @classmethod
    def from_pairs(cls, params, pairs: Sequence[StatePair]) -> "SampledCurve":
        return cls(params, np.array([p.state for p in pairs]), np.array([p.dual for p in pairs]))

    def gauged(self, zeta) -> "SampledCurve":
        """Apply the gauge ``zeta(s)`` (array or callable) sample by sample."""
        z = np.asarray(zeta(self.params) if callable(zeta) else zeta, dtype=complex)
        z = np.broadcast_to(z, self.params.shape)
        return SampledCurve(self.params,
                            self.states * np.exp(1j * z)[:, None],
                            self.duals * np.exp(1j * np.conj(z))[:, None])

    def reversed(self) -> "SampledCurve":
        return SampledCurve(self.params[::-1], self.states[::-1], self.duals[::-1])


def as_curve(curve) -> SampledCurve:
    if isinstance(curve, SampledCurve):
        return curve
    return SampledCurve(curve.params, curve.states, curve.duals)


def _require(curve: SampledCurve, n: int, operation: str):
    if len(curve) < n:
        raise GridError(f"{operation} needs at least {n} samples, got {len(curve)}",
                        operation=operation, quantity="samples")


def _uniform(params: np.ndarray) -> bool:
    h = np.diff(params)
    return bool(np.allclose(h, h[0], rtol=1e-9, atol=0.0))


def _deriv(values: np.ndarray, params: np.ndarray) -> np.ndarray:
    """First derivative; fourth order on uniform grids of 5+ samples."""
    if len(params) < 5 or not _uniform(params):
        return np.gradient(values, params, axis=0, edge_order=2)
    f = values
    out = np.empty_like(f)
    out[2:-2] = f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]
    out[0] = -25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]
    out[1] = -3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]
    out[-1] = 25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]
    out[-2] = 3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]
    return out / (12.0 * (params[1] - params[0]))


def _deriv2(values: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Second derivative, second order (three-point interior stencil)."""
    if len(params) < 4 or not _uniform(params):
        return _deriv(_deriv(values, params), params)
    h = np.diff(params)
    f = values
    out = np.empty_like(f)
    out[1:-1] = f[2:] - 2.0 * f[1:-1] + f[:-2]
    out[0] = 2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]
    out[-1] = 2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]
    return out / h[0] ** 2


def _rowdot(a, b):
    return np.einsum("ki,ki->k", a.conj(), b)


def connection_series(curve) -> np.ndarray:
    """``A(s) = <psi~(s)|d psi/ds>`` at every sample."""
    c = as_curve(curve)
    _require(c, 3, "connection")
    return _rowdot(c.duals, _deriv(c.states, c.params))


def dual_connection_series(curve) -> np.ndarray:
    """Tilde counterpart ``<psi(s)|d psi~/ds>`` at every sample."""
    c = as_curve(curve)
    _require(c, 3, "connection")
    return _rowdot(c.states, _deriv(c.duals, c.params))


@dataclass(frozen=True)
class ConnectionSample:
    s: float
    value: complex


def connection_sample(curve, index: int) -> ConnectionSample:
    c = as_curve(curve)
    A = connection_series(c)
    return ConnectionSample(float(c.params[index]), complex(A[index]))


def covariant_series(curve):
    """``(D psi/ds, D~ psi~/ds)`` at every sample, shapes ``(n, N)``."""
    c = as_curve(curve)
    _require(c, 3, "covariant_derivative")
    dpsi = _deriv(c.states, c.params)
    ddual = _deriv(c.duals, c.params)
    A = _rowdot(c.duals, dpsi)
    At = _rowdot(c.states, ddual)
    return dpsi - A[:, None] * c.states, ddual - At[:, None] * c.duals


def covariant_derivative(curve, index: int) -> np.ndarray:
    """``(d/ds - A(s)) psi(s)``; covariant under ``psi -> e^{i zeta(s)} psi``."""
    return covariant_series(curve)[0][index]


def metric_series(curve) -> np.ndarray:
    """Complex metric element ``<D~ psi~|D psi>`` per unit ``ds^2``."""
    D, Dt = covariant_series(curve)
    return _rowdot(Dt, D)


def metric_element(curve, index: int) -> complex:
    return complex(metric_series(curve)[index])


def path_length(curve) -> complex:
    """Quadrature of the principal ``sqrt`` of the metric element."""
    c = as_curve(curve)
    g = metric_series(c)
    return complex(simpson(np.sqrt(g), x=c.params))


def second_covariant_series(curve, horizontal: bool = True):
    """``D^2 psi/ds^2`` and ``D~^2 psi~/ds^2``.

    With ``horizontal=True`` the component along the curve itself is
    removed (``(1 - |psi><psi~|) D^2 psi``).  That component always equals
    ``-g psi`` for a binormalized curve, so only the horizontal part can
    vanish.
    """
    c = as_curve(curve)
    _require(c, 4, "second_covariant_derivative")
    x, y = c.states, c.duals
    dx, dy = _deriv(x, c.params), _deriv(y, c.params)
    ddx, ddy = _deriv2(x, c.params), _deriv2(y, c.params)
    A, At = _rowdot(y, dx), _rowdot(x, dy)
    dA = _rowdot(dy, dx) + _rowdot(y, ddx)
    dAt = _rowdot(dx, dy) + _rowdot(x, ddy)
    # D(D psi) = psi'' - 2 A psi' - (A' - A^2) psi, and its tilde counterpart
    D2 = ddx - 2.0 * A[:, None] * dx - (dA - A**2)[:, None] * x
    D2t = ddy - 2.0 * At[:, None] * dy - (dAt - At**2)[:, None] * y
    if horizontal:
        D2 = D2 - c.states * _rowdot(c.duals, D2)[:, None]
        D2t = D2t - c.duals * _rowdot(c.states, D2t)[:, None]
    return D2, D2t


def geodesic_residual(curve) -> float:
    """Largest interior norm of the horizontal second covariant derivatives.

    State and dual equations are checked together; the result vanishes at
    rate ``O(h^2)`` on affinely parametrized geodesics.
    """
    c = as_curve(curve)
    _require(c, 5, "geodesic_residual")
    D2, D2t = second_covariant_series(c, horizontal=True)
    inner_idx = slice(1, len(c) - 1)
    return float(max(np.linalg.norm(D2[inner_idx], axis=1).max(),
                     np.linalg.norm(D2t[inner_idx], axis=1).max()))


def connection_line_integral(curve) -> PhaseValue:
    """``-i int A(s) ds`` by composite Simpson quadrature."""
    c = as_curve(curve)
    A = connection_series(c)
    return PhaseValue.of(-1j * simpson(A, x=c.params))


# --------------------------------------------------------------------------
# geodesics

@dataclass(frozen=True)
class GeodesicPath:
    """Sampled geodesic from ``start`` to the ray of ``end``.

    ``theta`` is the generalized Pancharatnam phase of the endpoints; the
    last sample is ``exp(-i theta) end.state``.  ``tau`` is the complex
    geodesic length ``arccos <psi~_1|phi(1)>``.
    """

    params: np.ndarray
    states: np.ndarray
    duals: np.ndarray
    start: StatePair
    end: StatePair
    theta: PhaseValue
    tau: complex

    def __len__(self):
        return self.params.size

    def pair(self, k: int) -> StatePair:
        return StatePair(self.states[k], self.duals[k])

    @property
    def samples(self) -> list[StatePair]:
        return [self.pair(k) for k in range(len(self))]

    def gauged(self, profile=None) -> SampledCurve:
        """Apply ``theta(s)`` (default ``s * theta``) so the curve ends at ``end``."""
        th = self.theta.value
        prof = (lambda s: s * th) if profile is None else profile
        return as_curve(self).gauged(prof)

    def in_phase_residuals(self) -> np.ndarray:
        """``|q(s)|`` of every sample relative to ``start``."""
        a = self.duals.conj() @ self.start.state        # <phi~(s)|psi_1>
        b = self.states @ self.start.dual.conj()        # <psi~_1|phi(s)>
        ratio = b / a
        root = np.exp(1j * np.array([half_log_phase(r) for r in ratio]))
        return np.abs(root - 1.0)


def _sin_ratio(s: np.ndarray, tau: complex) -> np.ndarray:
    # sin(s tau) / sin(tau), continued to tau -> 0
    if abs(tau) < 1e-6:
        return s * (1.0 + (1.0 - s**2) * tau**2 / 6.0)
    return np.sin(s * tau) / np.sin(tau)


def geodesic_between(p1: StatePair, p2: StatePair, n: int = 1001,
                     parametrization: str = "affine",
                     tol_bio: float = TOL_BIO) -> GeodesicPath:
    """Geodesic in ray space from ``p1`` to the ray of ``p2``.

    ``p2`` is first rotated into phase with ``p1``:
    ``phi = exp(-i theta) psi_2`` with ``theta`` the Pancharatnam phase, so
    that ``<psi~_1|phi> = <phi~|psi_1> = c``.  The curve then lies in the
    complex line spanned by ``psi_1`` and ``phi``:

    * ``"affine"`` (default): ``[sin((1-s) tau) psi_1 + sin(s tau) phi] / sin(tau)``
      with ``cos(tau) = c``, the dual built with conjugated coefficients.
      Binormalized, in phase with ``p1`` and parallel-transported at every
      sample, with constant metric element ``tau^2``.
    * ``"linear"``: ``(1-s) psi_1 + s phi`` with the matching dual line,
      binormalized by splitting ``sqrt(<L~|L>)`` evenly between state and
      dual.  Also in phase and parallel, but not affinely parametrized.

    Raises
    ------
    BiorthogonalError
        Endpoints biorthogonal.
    DegeneratePathError
        ``c`` real and negative: the connecting line crosses a state
        biorthogonal to ``psi_1``.
    """
    if n < 3:
        raise GridError("geodesic needs at least 3 samples", operation="geodesic_between",
                        quantity="samples")
    for name, p in (("start", p1), ("end", p2)):
        if binorm_defect(p) > TOL_BINORM:
            raise NotBinormalizedError(f"{name} pair is not binormalized",
                                       operation="geodesic_between", quantity=name)
    a, _ = _overlaps(p1, p2, tol_bio, "geodesic_between")
    theta = PhaseValue(half_log_phase(a / complex(np.vdot(p2.dual, p1.state))), 0)
    phi = apply_gauge(p2, -theta.value)
    c = complex(np.exp(-1j * theta.value) * a)
    if c.real < 0 and abs(c.imag) <= 1e-12 * abs(c):
        raise DegeneratePathError(
            f"in-phase overlap {c.real:.3e} is real negative; path crosses a state "
            "biorthogonal to the start", operation="geodesic_between",
            quantity="<psi~_1|phi(s)>")
    s = np.linspace(0.0, 1.0, n)
    tau = complex(np.arccos(c))

    if parametrization == "affine":
        cs = np.cos(s * tau)
        S = _sin_ratio(s, tau)
        u_state = phi.state - c * p1.state
        u_dual = phi.dual - np.conj(c) * p1.dual
        states = cs[:, None] * p1.state + S[:, None] * u_state
        duals = np.conj(cs)[:, None] * p1.dual + np.conj(S)[:, None] * u_dual
    elif parametrization == "linear":
        L = (1 - s)[:, None] * p1.state + s[:, None] * phi.state
        Lt = (1 - s)[:, None] * p1.dual + s[:, None] * phi.dual
        nrm = _rowdot(Lt, L)
        if np.min(np.abs(nrm)) <= tol_bio:
            raise DegeneratePathError("straight line passes through a null state",
                                      operation="geodesic_between", quantity="<L~|L>")
        root = np.sqrt(nrm.astype(complex))
        for k in range(1, n):  # continuous branch of the square root
            if abs(root[k] + root[k - 1]) < abs(root[k] - root[k - 1]):
                root[k:] = -root[k:]
        states = L / root[:, None]
        duals = Lt / np.conj(root)[:, None]
        states[-1] = phi.state
        duals[-1] = phi.dual
    else:
        raise ValueError(f"unknown parametrization {parametrization!r}")
    states[0] = p1.state
    duals[0] = p1.dual
    return GeodesicPath(s, states, duals, p1, p2, theta, tau)


# --------------------------------------------------------------------------
# polygons and their continuum limit

def polygon_phase(vertices: Sequence[StatePair], closed: bool = True,
                  tol_bio: float = TOL_BIO) -> PhaseValue:
    """Sum of principal Pancharatnam phases along consecutive edges.

    For ``closed=True`` the edge from the last vertex back to the first is
    included and the result is gauge invariant modulo ``pi``.
    """
    n = len(vertices)
    if n < 2:
        raise GridError("polygon needs at least 2 vertices", operation="polygon_phase")
    edges = [(k, k + 1) for k in range(n - 1)]
    if closed and n > 2:
        edges.append((n - 1, 0))
    total = 0j
    for i, j in edges:
        try:
            total += pancharatnam_phase(vertices[i], vertices[j], tol_bio).value
        except BiorthogonalError as exc:
            raise BiorthogonalError(f"edge ({i}, {j}): {exc}", operation="polygon_phase",
                                    quantity=f"edge[{i},{j}]") from exc
    return PhaseValue.of(total)


def _closing_term(c: SampledCurve, tol_bio: float) -> complex:
    # -(i/2) log(<psi~(s)|psi(0)> / <psi~(0)|psi(s)>), followed from s=0 to the end
    num = c.duals.conj() @ c.states[0]
    den = c.states @ c.duals[0].conj()
    if abs(num[-1]) <= tol_bio or abs(den[-1]) <= tol_bio:
        raise BiorthogonalError("curve endpoints are biorthogonal",
                                operation="polygon_limit_phase", quantity="endpoint_overlap")
    return unwrapped_half_log_phase(num / den)


def polygon_limit_phase(curve, tol_bio: float = TOL_BIO) -> PhaseValue:
    """Closed-loop phase of a smooth curve joined back to its start.

    ``-(i/2) log(<psi~(1)|psi(0)> / <psi~(0)|psi(1)>) - i int <psi~|d psi/ds> ds``,
    the limit of :func:`polygon_phase` over ever finer closed samplings.
    """
    c = as_curve(curve)
    _require(c, 3, "polygon_limit_phase")
    closing = _closing_term(c, tol_bio)
    integral = -1j * simpson(connection_series(c), x=c.params)
    return PhaseValue.of(closing + integral)
