"""Paired integration of the Schrodinger and adjoint Schrodinger equations.

The state follows ``d psi/dt = -i H(t) psi`` and its dual follows
``d psi~/dt = -i H(t)^dagger psi~``.  The pairing ``<psi~|psi>`` is then a
constant of motion; its numerical drift is recorded but never corrected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson

from .biorthogonal import TOL_BINORM, StatePair, binorm_defect
from .errors import (DimensionError, DriftError, GridError, NotBinormalizedError,
                     ValidationError)
from .linalg import as_matrix

DRIFT_FAIL = 1e-4


@dataclass(frozen=True)
class TimeProfile:
    """Scalar coefficient ``c(t)``: a polynomial plus a Fourier series.

    ``c(t) = sum_j poly[j] t^j + sum_k (cos[k-1] cos(k w t) + sin[k-1] sin(k w t))``
    """

    poly: tuple = (1.0,)
    omega: float = 0.0
    cos: tuple = ()
    sin: tuple = ()

    def __post_init__(self):
        for name in ("poly", "cos", "sin"):
            vals = tuple(complex(x) for x in getattr(self, name))
            if not all(np.isfinite(v) for v in vals):
                raise ValidationError(f"non-finite {name} coefficient", quantity=name)
            object.__setattr__(self, name, vals)
        if not np.isfinite(self.omega):
            raise ValidationError("non-finite omega", quantity="omega")
        object.__setattr__(self, "omega", float(self.omega))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for c in reversed(self.poly):
            out = out * t + c
        for k, c in enumerate(self.cos, start=1):
            out = out + c * np.cos(k * self.omega * t)
        for k, c in enumerate(self.sin, start=1):
            out = out + c * np.sin(k * self.omega * t)
        return out


CONSTANT = TimeProfile()


class HamiltonianPath:
    """Time-dependent generator ``H(t) = sum_k c_k(t) M_k``.

    Scenario files only describe the sum-of-terms form.  Library users can
    pass ``func`` (any callable returning an ``N x N`` matrix) instead.
    """

    def __init__(self, terms: Sequence[tuple] = (), t_domain=(-np.inf, np.inf),
                 func: Callable[[float], np.ndarray] | None = None, dim: int | None = None):
        mats = []
        profiles = []
        for m, p in terms:
            mats.append(as_matrix(m, "hamiltonian term"))
            profiles.append(CONSTANT if p is None else p)
        if func is None and not mats:
            raise ValidationError("HamiltonianPath needs terms or func")
        if mats:
            dims = {m.shape[0] for m in mats}
            if len(dims) != 1:
                raise DimensionError(f"term matrices have different sizes {sorted(dims)}")
            dim = dims.pop() if dim is None else dim
            if mats[0].shape[0] != dim:
                raise DimensionError(f"terms have dim {mats[0].shape[0]}, expected {dim}")
        if dim is None:
            dim = as_matrix(func(float(t_domain[0]) if np.isfinite(t_domain[0]) else 0.0)).shape[0]
        t0, t1 = (float(t_domain[0]), float(t_domain[1]))
        if not t1 > t0:
            raise ValidationError(f"empty time domain [{t0}, {t1}]", quantity="t_domain")
        self.dim = int(dim)
        self.t_domain = (t0, t1)
        self.func = func
        self.matrices = tuple(mats)
        self.profiles = tuple(profiles)
        self._stack = np.array(mats) if mats else None

    @classmethod
    def constant(cls, H, t_domain=(-np.inf, np.inf)) -> "HamiltonianPath":
        return cls([(H, CONSTANT)], t_domain=t_domain)

    @classmethod
    def from_function(cls, func, dim: int, t_domain=(-np.inf, np.inf)) -> "HamiltonianPath":
        return cls(func=func, dim=dim, t_domain=t_domain)

    @property
    def terms(self):
        return list(zip(self.matrices, self.profiles))

    def coefficients(self, t) -> np.ndarray:
        """Coefficient values, shape ``(len(t), n_terms)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([p(t) for p in self.profiles], axis=-1)

    def __call__(self, t: float) -> np.ndarray:
        if self.func is not None:
            H = as_matrix(self.func(float(t)), "H(t)")
            if H.shape[0] != self.dim:
                raise DimensionError(f"H({t}) has dim {H.shape[0]}, expected {self.dim}")
            return H
        c = self.coefficients(t)[0]
        return np.tensordot(c, self._stack, axes=1)

    def evaluate_many(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.func is not None:
            return np.array([self(t) for t in times])
        c = self.coefficients(times)
        return np.tensordot(c, self._stack, axes=1)

    def contains(self, t0: float, t1: float) -> bool:
        return self.t_domain[0] <= t0 and t1 <= self.t_domain[1]


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.t1)) or not self.t1 > self.t0:
            raise GridError(f"need finite t1 > t0, got [{self.t0}, {self.t1}]", quantity="grid")
        if int(self.steps) != self.steps or self.steps < 1:
            raise GridError(f"steps must be a positive integer, got {self.steps}",
                            quantity="grid.steps")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @property
    def samples(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.steps + 1)


@dataclass(frozen=True)
class Trajectory:
    """Samples of ``(psi(t), psi~(t))``; row ``k`` belongs to ``times[k]``."""

    grid: TimeGrid
    times: np.ndarray
    states: np.ndarray
    duals: np.ndarray
    defects: np.ndarray = field(repr=False)

    @property
    def max_binorm_drift(self) -> float:
        return float(self.defects.max())

    @property
    def params(self) -> np.ndarray:
        return self.times

    def __len__(self) -> int:
        return self.times.size

    def pair(self, k: int) -> StatePair:
        return StatePair(self.states[k], self.duals[k])

    @property
    def pairs(self) -> list[StatePair]:
        return [self.pair(k) for k in range(len(self))]

    @property
    def initial(self) -> StatePair:
        return self.pair(0)

    @property
    def final(self) -> StatePair:
        return self.pair(-1)

    def segment(self, i: int, j: int) -> "Trajectory":
        """Sub-trajectory over samples ``i..j`` inclusive (``i < j``)."""
        n = len(self)
        i, j = i % n, j % n
        if j <= i:
            raise GridError("segment needs i < j", quantity="segment")
        sl = slice(i, j + 1)
        grid = TimeGrid(float(self.times[i]), float(self.times[j]), j - i)
        return Trajectory(grid, self.times[sl], self.states[sl], self.duals[sl],
                          self.defects[sl])


def _rk4_step(x, h, Ha, Hm, Hb):
    k1 = -1j * (Ha @ x)
    k2 = -1j * (Hm @ (x + 0.5 * h * k1))
    k3 = -1j * (Hm @ (x + 0.5 * h * k2))
    k4 = -1j * (Hb @ (x + h * k3))
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve_pair(path: HamiltonianPath, initial: StatePair, grid: TimeGrid,
                drift_fail: float = DRIFT_FAIL) -> Trajectory:
    """Integrate state and dual together with classical fixed-step RK4.

    Raises
    ------
    DriftError
        If ``|<psi~|psi> - 1|`` exceeds ``drift_fail`` at any sample.
    """
    if initial.dim != path.dim:
        raise DimensionError(f"initial pair has dim {initial.dim}, H has dim {path.dim}",
                             operation="evolve_pair")
    d0 = binorm_defect(initial)
    if d0 > TOL_BINORM:
        raise NotBinormalizedError(f"initial pair has binormalization defect {d0:.3e}",
                                   operation="evolve_pair", quantity="initial_dual")
    if not path.contains(grid.t0, grid.t1):
        raise GridError(f"grid [{grid.t0}, {grid.t1}] outside Hamiltonian domain {path.t_domain}",
                        operation="evolve_pair", quantity="grid")

    times = grid.samples
    h = grid.h
    # H at every sample and every midpoint
    fine = np.linspace(grid.t0, grid.t1, 2 * grid.steps + 1)
    n = path.dim
    states = np.empty((grid.steps + 1, n), dtype=complex)
    duals = np.empty_like(states)
    states[0] = initial.state
    duals[0] = initial.dual
    x, y = initial.state.copy(), initial.dual.copy()
    chunk = max(1, 200_000 // (n * n))  # bounds the pre-evaluated H block
    Hblock = None
    base = 0
    for k in range(grid.steps):
        i = 2 * k
        if Hblock is None or i + 2 >= base + len(Hblock):
            base = i
            Hblock = path.evaluate_many(fine[base:base + 2 * chunk + 1])
        Ha, Hm, Hb = Hblock[i - base], Hblock[i - base + 1], Hblock[i - base + 2]
        x = _rk4_step(x, h, Ha, Hm, Hb)
        y = _rk4_step(y, h, Ha.conj().T, Hm.conj().T, Hb.conj().T)
        states[k + 1] = x
        duals[k + 1] = y

    defects = np.abs(np.einsum("ij,ij->i", duals.conj(), states) - 1.0)
    if not np.all(np.isfinite(defects)):
        raise DriftError("integration diverged; reduce the step",
                         operation="evolve_pair", quantity="binorm_drift")
    worst = float(defects.max())
    if worst > drift_fail:
        raise DriftError(
            f"binormalization drift {worst:.3e} exceeds {drift_fail:.1e}; use a smaller step",
            operation="evolve_pair", quantity="binorm_drift")
    return Trajectory(grid, times, states, duals, defects)


def drift_report(traj: Trajectory) -> float:
    """Largest ``|<psi~(t)|psi(t)> - 1|`` over the trajectory."""
    return traj.max_binorm_drift


def energy_expectations(traj: Trajectory, path: HamiltonianPath) -> np.ndarray:
    """``<psi~(t)|H(t)|psi(t)>`` at every sample."""
    Hs = path.evaluate_many(traj.times)
    Hpsi = np.einsum("kij,kj->ki", Hs, traj.states)
    return np.einsum("ki,ki->k", traj.duals.conj(), Hpsi)


def dynamical_integral(traj: Trajectory, path: HamiltonianPath) -> complex:
    """``int <psi~|H|psi> dt`` over the trajectory by composite Simpson."""
    if len(traj) < 3:
        raise GridError("Simpson quadrature needs at least 2 steps",
                        operation="dynamical_phase", quantity="grid.steps")
    return complex(simpson(energy_expectations(traj, path), x=traj.times))


def dynamical_phase(traj: Trajectory, path: HamiltonianPath) -> complex:
    """``gamma_dyn = -int <psi~|H|psi> dt``, so that ``gamma_geo = theta_GP - gamma_dyn``."""
    return -dynamical_integral(traj, path)
