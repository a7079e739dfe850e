"""Command dispatch, the invariant check suite, sweeps and export.

``run(command, scenario)`` returns a :class:`ResultBundle` whose ``payload``
is a JSON-ready dict.  Every result section carries the producing
``operation`` and the grid resolution ``steps``.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .biorthogonal import StatePair, apply_gauge, build_frame
from .dynamics import Trajectory, evolve_pair
from .errors import BiophaseError, BiorthogonalError, IoError, ParseError
from .geometry import (PhaseValue, SampledCurve, connection_line_integral, distance_mod_pi,
                       geodesic_between, geodesic_residual, in_phase_residual,
                       pancharatnam_phase, path_length, polygon_limit_phase, polygon_phase)
from .phases import (AnchorState, PhaseResult, auto_anchor, geometric_phase,
                     geometric_phase_anchored, geometric_phase_between, offdiagonal_phase)
from .scenario import PairSpec, Scenario

#: at most this many instants are diagonalized by the spectrum guard
GUARD_SAMPLES = 513
#: trajectory samples (besides the endpoints) an automatic anchor must support
ANCHOR_SUPPORT = 256


@dataclass
class ResultBundle:
    command: str
    payload: dict
    trajectory: Trajectory | None = field(default=None, repr=False)
    checks: list = field(default_factory=list)
    exit_status: int = 0

    @property
    def passed(self) -> bool:
        return all(c["passed"] is not False for c in self.checks)


# --------------------------------------------------------------------------
# JSON helpers

def _num(x: float):
    x = float(x)
    return x if np.isfinite(x) else str(x)


def cjson(z) -> dict:
    z = complex(z)
    return {"re": _num(z.real), "im": _num(z.imag)}


def vjson(v) -> list:
    return [[_num(z.real), _num(z.imag)] for z in np.asarray(v, dtype=complex)]


def phase_json(p: PhaseValue) -> dict:
    return {**cjson(p.value), "branch_offset": int(p.branch_offset)}


def _tag(operation: str, steps, **body) -> dict:
    return {"operation": operation, "steps": steps, **body}


# --------------------------------------------------------------------------
# shared pipeline pieces

def spectrum_guard(s: Scenario, samples: int = GUARD_SAMPLES) -> dict:
    """Diagonalize ``H`` at up to ``samples`` grid instants.

    Raises :class:`DegenerateSpectrumError` at the first instant whose gap
    falls below ``tol_gap`` (an exceptional point or a degeneracy).
    """
    g = s.grid
    idx = np.unique(np.linspace(0, g.steps, min(samples, g.steps + 1)).round().astype(int))
    times = g.samples[idx]
    path = s.path
    worst_bio = worst_comp = 0.0
    for t in times:
        f = build_frame(path(t), t=t, tol_gap=s.tolerances.tol_gap)
        worst_bio = max(worst_bio, f.biorthonormality_residual())
        worst_comp = max(worst_comp, f.completeness_residual())
    return {"instants": int(times.size), "biorthonormality": worst_bio,
            "completeness": worst_comp}


def _trajectory(s: Scenario, pair: StatePair | None = None) -> Trajectory:
    pair = s.initial_pair() if pair is None else pair
    return evolve_pair(s.path, pair, s.grid, drift_fail=s.tolerances.drift_fail)


def _support(traj: Trajectory) -> list[StatePair]:
    idx = np.unique(np.linspace(0, len(traj) - 1, ANCHOR_SUPPORT + 2).round().astype(int))
    return [traj.pair(int(k)) for k in idx]


def resolve_anchor(s: Scenario, trajs: list[Trajectory]) -> AnchorState:
    """Literal scenario anchor, or the automatic search.

    The automatic search scores candidates against the endpoints and a
    uniform subsample of every trajectory, so the anchored ratio can be
    followed continuously between the endpoints.
    """
    tol = s.tolerances.tol_bio
    if isinstance(s.anchor, PairSpec):
        endpoints = [p for t in trajs for p in (t.initial, t.final)]
        return AnchorState.for_endpoints(s.resolve(s.anchor), endpoints, tol)
    support = [p for t in trajs for p in _support(t)]
    try:
        frame = s.frame()
    except BiophaseError:
        frame = None
    try:
        return auto_anchor(support, seed=s.seed, tol_bio=tol, frame=frame)
    except BiophaseError:
        # no candidate supports the whole trajectory; settle for the endpoints
        endpoints = [p for t in trajs for p in (t.initial, t.final)]
        return auto_anchor(endpoints, seed=s.seed, tol_bio=tol, frame=frame)


def _phase_section(r: PhaseResult, steps: int, anchor: AnchorState | None) -> dict:
    op = "geometric_phase" if r.mode == "direct" else "geometric_phase_anchored"
    out = _tag(op, steps, mode=r.mode,
               pancharatnam=phase_json(r.pancharatnam),
               dynamical=cjson(r.dynamical),
               geometric=cjson(r.geometric),
               anchor_used=None if r.anchor_used is None else vjson(r.anchor_used),
               endpoint_overlap=cjson(r.endpoint_overlap))
    if anchor is not None:
        out["anchor_min_overlap"] = _num(anchor.min_overlap)
    if r.direct_discrepancy is not None:
        out["direct_discrepancy"] = cjson(r.direct_discrepancy)
    return out


def _require(s: Scenario, what: str, command: str):
    if getattr(s, what) is None:
        raise ParseError(f"command {command!r} needs the {what!r} section", path=what)


# --------------------------------------------------------------------------
# commands

def run_evolve(s: Scenario) -> ResultBundle:
    _require(s, "grid", "evolve")
    traj = _trajectory(s)
    n = s.grid.steps
    payload = {"evolve": _tag("evolve_pair", n, t0=s.grid.t0, t1=s.grid.t1,
                              max_binorm_drift=_num(traj.max_binorm_drift),
                              final_state=vjson(traj.final.state),
                              final_dual=vjson(traj.final.dual)),
               "trajectory": _tag("evolve_pair", n,
                                  t=[_num(t) for t in traj.times],
                                  states=[vjson(v) for v in traj.states],
                                  duals=[vjson(v) for v in traj.duals],
                                  binorm_defect=[_num(d) for d in traj.defects])}
    return ResultBundle("evolve", payload, traj)


def run_phase(s: Scenario) -> ResultBundle:
    _require(s, "grid", "phase")
    spectrum_guard(s)
    traj = _trajectory(s)
    anchor = None
    try:
        r = geometric_phase(traj, s.path, s.tolerances.tol_bio)
    except BiorthogonalError as exc:
        if s.anchor is None:
            raise BiorthogonalError(f"{exc}; the scenario has no anchor (set anchor or "
                                    "pass --anchor auto)", operation="geometric_phase",
                                    quantity="anchor") from exc
        anchor = resolve_anchor(s, [traj])
        r = geometric_phase_anchored(traj, s.path, anchor, s.tolerances.tol_bio)
    n = s.grid.steps
    payload = {"phase": _phase_section(r, n, anchor),
               "evolve": _tag("evolve_pair", n, max_binorm_drift=_num(traj.max_binorm_drift))}
    return ResultBundle("phase", payload, traj)


def run_offdiag(s: Scenario) -> ResultBundle:
    _require(s, "grid", "offdiag")
    _require(s, "offdiag", "offdiag")
    spectrum_guard(s)
    frame = s.frame()
    j, k = s.offdiag
    tj = _trajectory(s, frame.pair(j))
    tk = _trajectory(s, frame.pair(k))
    anchor = resolve_anchor(s, [tj, tk])
    r = offdiagonal_phase(tj, tk, s.path, anchor, s.tolerances.tol_bio)
    n = s.grid.steps
    payload = {"offdiag": _tag("offdiagonal_phase", n, j=j, k=k,
                               gamma_jk=cjson(r.value),
                               bracket_jk=phase_json(r.bracket_jk),
                               bracket_kj=phase_json(r.bracket_kj),
                               gamma_j=cjson(r.phase_j), gamma_k=cjson(r.phase_k),
                               anchor_used=vjson(anchor.pair.state),
                               anchor_min_overlap=_num(anchor.min_overlap),
                               max_binorm_drift=_num(max(tj.max_binorm_drift,
                                                         tk.max_binorm_drift)))}
    return ResultBundle("offdiag", payload)


def run_geodesic(s: Scenario) -> ResultBundle:
    _require(s, "geodesic", "geodesic")
    spec = s.geodesic
    p1, p2 = s.resolve(spec.start), s.resolve(spec.end)
    tol = s.tolerances.tol_bio
    g = geodesic_between(p1, p2, spec.samples, spec.parametrization, tol)
    line = connection_line_integral(g.gauged())
    payload = {"geodesic": _tag(
        "geodesic_between", spec.samples, parametrization=spec.parametrization,
        pancharatnam=phase_json(g.theta), tau=cjson(g.tau),
        line_integral=phase_json(line),
        theorem_error=_num(abs(line.value - g.theta.value)),
        max_in_phase_residual=_num(g.in_phase_residuals().max()),
        geodesic_residual=_num(geodesic_residual(g)),
        length=cjson(path_length(g)))}
    return ResultBundle("geodesic", payload)


def run_polygon(s: Scenario) -> ResultBundle:
    _require(s, "polygon", "polygon")
    verts = [s.resolve(v) for v in s.polygon.vertices]
    p = polygon_phase(verts, s.polygon.closed, s.tolerances.tol_bio)
    payload = {"polygon": _tag("polygon_phase", len(verts), closed=s.polygon.closed,
                               phase=phase_json(p))}
    return ResultBundle("polygon", payload)


# --------------------------------------------------------------------------
# invariant suite

def _check(name: str, measured, threshold, passed, operation: str, steps) -> dict:
    return {"name": name, "operation": operation, "steps": steps,
            "measured": None if measured is None else _num(measured),
            "threshold": None if threshold is None else _num(threshold),
            "passed": passed}


def _le(name, measured, threshold, operation, steps) -> dict:
    return _check(name, measured, threshold, bool(measured <= threshold), operation, steps)


def _skip(name, operation, steps) -> dict:
    return _check(name, None, None, None, operation, steps)


def _is_hermitian(s: Scenario, traj: Trajectory) -> bool:
    Hs = s.path.evaluate_many(traj.times[:: max(1, len(traj) // 64)])
    scale = max(1.0, float(np.abs(Hs).max()))
    if np.abs(Hs - Hs.conj().transpose(0, 2, 1)).max() > 1e-12 * scale:
        return False
    p = traj.initial
    return bool(np.abs(p.state / np.vdot(p.state, p.state).real - p.dual).max() <= 1e-12)


def run_check(s: Scenario) -> ResultBundle:
    """Invariant suite at the scenario's own resolution.

    Each entry reports the measured value, the threshold and pass/fail;
    entries that do not apply to the scenario are reported as skipped.
    """
    _require(s, "grid", "check")
    n = s.grid.steps
    tol = s.tolerances.tol_bio
    checks = []
    guard = spectrum_guard(s)
    checks.append(_le("frame_biorthonormality", guard["biorthonormality"], 1e-9, "build_frame", n))
    checks.append(_le("frame_completeness", guard["completeness"], 1e-9, "build_frame", n))

    traj = _trajectory(s)
    path = s.path
    checks.append(_le("binormalization_drift", traj.max_binorm_drift,
                      s.tolerances.drift_fail, "evolve_pair", n))

    p0, pt = traj.initial, traj.final
    try:
        direct = geometric_phase(traj, path, tol)
    except BiorthogonalError:
        direct = None

    curve = SampledCurve(traj.times, traj.states, traj.duals)
    rng = np.random.default_rng(s.seed)
    zeta = (rng.uniform(-0.5, 0.5, 2) + 1j * rng.uniform(-0.5, 0.5, 2))
    span = s.grid.t1 - s.grid.t0

    if direct is None:
        for name, op in (("phase_decomposition", "geometric_phase"),
                         ("closed_loop_consistency", "polygon_limit_phase"),
                         ("closed_loop_gauge_invariance", "polygon_limit_phase"),
                         ("in_phase_after_gauge", "in_phase_residual"),
                         ("geodesic_theorem", "connection_line_integral"),
                         ("geodesic_in_phase", "geodesic_between"),
                         ("geodesic_equation", "geodesic_residual"),
                         ("polygon_convergence", "polygon_phase"),
                         ("anchored_composition", "geometric_phase_anchored"),
                         ("hermitian_reduction", "polygon_limit_phase")):
            checks.append(_skip(name, op, n))
    else:
        d = abs(direct.geometric - (direct.pancharatnam.value - direct.dynamical))
        checks.append(_le("phase_decomposition", d, 0.0, "geometric_phase", n))

        loop = polygon_limit_phase(curve, tol)
        checks.append(_le("closed_loop_consistency",
                          distance_mod_pi(loop.value, -direct.geometric), 1e-5,
                          "polygon_limit_phase", n))
        gauged = curve.gauged(lambda t: zeta[0] + zeta[1] * (t - s.grid.t0) / span)
        checks.append(_le("closed_loop_gauge_invariance",
                          distance_mod_pi(polygon_limit_phase(gauged, tol).value, loop.value),
                          1e-6, "polygon_limit_phase", n))

        theta = pancharatnam_phase(p0, pt, tol)
        q = in_phase_residual(apply_gauge(p0, theta.value), pt, tol)
        checks.append(_le("in_phase_after_gauge", abs(q), 1e-10, "in_phase_residual", n))

        # endpoints first; a real negative in-phase overlap makes the straight
        # line degenerate, so fall back to earlier samples of the trajectory
        g = None
        for target in np.unique(np.linspace(2, n, 64).round().astype(int))[::-1]:
            target = int(target)
            try:
                g = geodesic_between(p0, traj.pair(target), 2001, tol_bio=tol)
                break
            except BiophaseError:
                continue
        if g is None:
            for name, op in (("geodesic_theorem", "connection_line_integral"),
                             ("geodesic_in_phase", "geodesic_between"),
                             ("geodesic_equation", "geodesic_residual")):
                checks.append(_skip(name, op, 2001))
        else:
            line = connection_line_integral(g.gauged())
            checks.append(_check("geodesic_target_sample", target, None, None,
                                 "geodesic_between", 2001))
            checks.append(_le("geodesic_theorem", abs(line.value - g.theta.value), 1e-6,
                              "connection_line_integral", 2001))
            checks.append(_le("geodesic_in_phase", g.in_phase_residuals().max(), 1e-10,
                              "geodesic_between", 2001))
            checks.append(_le("geodesic_equation", geodesic_residual(g), 1e-5,
                              "geodesic_residual", 2001))

        errs = []
        m0 = max(32, n // 16)
        for m in (m0, 2 * m0):
            idx = np.unique(np.linspace(0, n, m + 1).round().astype(int))
            poly = polygon_phase([traj.pair(int(k)) for k in idx], True, tol)
            errs.append(distance_mod_pi(poly.value, loop.value))
        checks.append(_check("polygon_convergence", errs[1], max(errs[0] / 1.8, 1e-10),
                             bool(errs[1] <= max(errs[0] / 1.8, 1e-10)), "polygon_phase", n))

        mid = n // 2
        if mid >= 2 and n - mid >= 2:
            try:
                an = geometric_phase_anchored(traj, path, traj.pair(mid), tol)
                comp = (geometric_phase_between(traj, path, 0, mid, tol).geometric
                        - geometric_phase_between(traj, path, n, mid, tol).geometric)
                checks.append(_le("anchored_composition", abs(an.geometric - comp), 1e-9,
                                  "geometric_phase_anchored", n))
            except BiorthogonalError:
                checks.append(_skip("anchored_composition", "geometric_phase_anchored", n))
        else:
            checks.append(_skip("anchored_composition", "geometric_phase_anchored", n))

        if _is_hermitian(s, traj):
            checks.append(_le("hermitian_reduction", abs(loop.value.imag), 1e-7,
                              "polygon_limit_phase", n))
        else:
            checks.append(_skip("hermitian_reduction", "polygon_limit_phase", n))

    bundle = ResultBundle("check", {"check": _tag("check", n, results=checks)}, traj, checks)
    bundle.payload["check"]["passed"] = bundle.passed
    return bundle


# --------------------------------------------------------------------------
# sweep

def _sweep_point(command: str, base: Scenario, index: int, point: dict) -> dict:
    try:
        sc = base.with_overrides(point)
        b = run(command, sc)
        return {"index": index, "overrides": point, "exit_status": b.exit_status,
                "result": b.payload}
    except BiophaseError as exc:
        return {"index": index, "overrides": point, "exit_status": exc.exit_code,
                "error": exc.record()}


def run_sweep(s: Scenario, workers: int | None = None) -> ResultBundle:
    """Re-run ``sweep.command`` once per point; rows keep the point order."""
    _require(s, "sweep", "sweep")
    cmd = s.sweep.command
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda ip: _sweep_point(cmd, s, *ip), enumerate(s.sweep.points)))
    status = next((r["exit_status"] for r in rows if r["exit_status"]), 0)
    return ResultBundle("sweep", {"sweep": {"operation": "sweep", "command": cmd,
                                            "points": rows}}, exit_status=status)


_COMMANDS = {"evolve": run_evolve, "phase": run_phase, "offdiag": run_offdiag,
             "geodesic": run_geodesic, "polygon": run_polygon, "check": run_check,
             "sweep": run_sweep}


def run(command: str, scenario: Scenario) -> ResultBundle:
    if command not in _COMMANDS:
        raise ParseError(f"unknown command {command!r}", path="command")
    bundle = _COMMANDS[command](scenario)
    if command == "check" and not bundle.passed:
        bundle.exit_status = 1
    return bundle


# --------------------------------------------------------------------------
# export

TRAJECTORY_SECTION = "trajectory"


def trajectory_header(N: int) -> list[str]:
    return (["t"] + [f"re(psi_{i})" for i in range(N)] + [f"im(psi_{i})" for i in range(N)]
            + [f"re(dual_{i})" for i in range(N)] + [f"im(dual_{i})" for i in range(N)]
            + ["binorm_defect"])


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _flatten(section: dict, prefix: str = ""):
    """Yield ``(quantity, re, im, branch_offset, text)`` rows of a result section."""
    for key, val in section.items():
        if key in ("operation", "steps"):
            continue
        q = f"{prefix}{key}"
        if isinstance(val, dict) and "re" in val and "im" in val:
            yield q, val["re"], val["im"], val.get("branch_offset"), None
        elif isinstance(val, dict):
            yield from _flatten(val, q + ".")
        elif isinstance(val, list):
            for i, v in enumerate(val):
                if isinstance(v, list) and len(v) == 2:
                    yield f"{q}[{i}]", v[0], v[1], None, None
                elif isinstance(v, dict):
                    yield from _flatten(v, f"{q}[{i}].")
                else:
                    yield f"{q}[{i}]", v, None, None, None
        elif isinstance(val, (bool, str)) or val is None:
            yield q, None, None, None, val
        else:
            yield q, val, None, None, None


RESULT_HEADER = ["section", "operation", "steps", "quantity", "re", "im", "branch_offset",
                 "text"]


def _result_rows(payload: dict):
    for name, section in payload.items():
        if name == TRAJECTORY_SECTION:
            continue
        if name == "check":
            for c in section["results"]:
                if c["passed"] is None:
                    status = "skipped" if c["measured"] is None else "info"
                else:
                    status = "pass" if c["passed"] else "fail"
                yield [name, c["operation"], c["steps"], c["name"], c["measured"],
                       c["threshold"], None, status]
            continue
        if name == "sweep":
            for p in section["points"]:
                tag = f"point[{p['index']}]"
                if "error" in p:
                    yield [tag, p["error"]["operation"], None, p["error"]["quantity"], None,
                           None, None, p["error"]["message"]]
                    continue
                for row in _result_rows(p["result"]):
                    yield [f"{tag}.{row[0]}"] + row[1:]
            continue
        for q, re_, im_, br, text in _flatten(section):
            yield [name, section.get("operation"), section.get("steps"), q, re_, im_, br, text]


def export(bundle: ResultBundle, fmt: str = "json") -> str:
    """Serialize a bundle.  Output is a pure function of the bundle.

    ``json`` writes the full payload.  ``csv`` writes the trajectory table
    for ``evolve`` (preceded by a ``#`` line with operation and steps) and a
    long-format result table for every other command.
    """
    if fmt == "json":
        return json.dumps(bundle.payload, indent=2, allow_nan=False) + "\n"
    if fmt != "csv":
        raise ParseError(f"unknown format {fmt!r}", path="format")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if bundle.command == "evolve" and bundle.trajectory is not None:
        tr = bundle.trajectory
        buf.write(f"# operation=evolve_pair steps={tr.grid.steps}\n")
        w.writerow(trajectory_header(tr.states.shape[1]))
        for t, x, y, d in zip(tr.times, tr.states, tr.duals, tr.defects):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in
                                           (*x.real, *x.imag, *y.real, *y.imag)]
                       + [repr(float(d))])
        return buf.getvalue()
    w.writerow(RESULT_HEADER)
    for row in _result_rows(bundle.payload):
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_output(text: str, path: str | None, stream=None) -> None:
    if path is None:
        stream.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path!r}: {exc.strerror}", operation="export",
                      quantity="out") from exc
