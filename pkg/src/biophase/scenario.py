"""Scenario documents: JSON in, validated :class:`Scenario` out.

Complex numbers are always written as ``[re, im]`` pairs.  A minimal
document::

    {
      "scenario_version": 1,
      "dimension": 2,
      "hamiltonian": {
        "t_domain": [0, 1],
        "terms": [{"matrix": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]]}]
      },
      "initial_state": [[1, 0], [0, 0]]
    }

Omitted fields take their defaults (grid over the whole domain with 1000
steps, dual built from the eigenframe at ``t0``, no anchor).
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .biorthogonal import StatePair, build_frame, dual_partner
from .dynamics import DRIFT_FAIL, HamiltonianPath, TimeGrid, TimeProfile
from .errors import DimensionError, GridError, IoError, ParseError
from .geometry import TOL_BIO

SCENARIO_VERSION = 1
DEFAULT_STEPS = 1000
FRAME_ASSOCIATED = "frame-associated"
SELF_DUAL = "self-dual"
COMMANDS = ("evolve", "phase", "offdiag", "geodesic", "polygon", "check", "sweep")

_TOP_KEYS = {"scenario_version", "name", "dimension", "hamiltonian", "initial_state",
             "initial_dual", "grid", "anchor", "tolerances", "seed", "outputs", "offdiag",
             "geodesic", "polygon", "sweep"}


@dataclass(frozen=True)
class Tolerances:
    tol_gap: float | None = None
    tol_bio: float = TOL_BIO
    drift_fail: float = DRIFT_FAIL


@dataclass(frozen=True)
class PairSpec:
    """A state with a literal dual or one of the tokens ``frame-associated`` / ``self-dual``."""

    state: np.ndarray
    dual: np.ndarray | str = FRAME_ASSOCIATED


@dataclass(frozen=True)
class GeodesicSpec:
    start: PairSpec
    end: PairSpec
    samples: int = 1001
    parametrization: str = "affine"


@dataclass(frozen=True)
class PolygonSpec:
    vertices: tuple
    closed: bool = True


@dataclass(frozen=True)
class SweepSpec:
    command: str
    points: tuple


@dataclass(frozen=True)
class Scenario:
    dimension: int
    terms: tuple | None
    t_domain: tuple | None
    initial_state: np.ndarray | None = None
    initial_dual: np.ndarray | str = FRAME_ASSOCIATED
    grid: TimeGrid | None = None
    anchor: PairSpec | str | None = None
    tolerances: Tolerances = Tolerances()
    seed: int = 0
    outputs: tuple = ()
    offdiag: tuple | None = None
    geodesic: GeodesicSpec | None = None
    polygon: PolygonSpec | None = None
    sweep: SweepSpec | None = None
    name: str = ""
    document: dict = field(default=None, repr=False, compare=False)

    @property
    def path(self) -> HamiltonianPath:
        if self.terms is None:
            raise ParseError("scenario has no hamiltonian", path="hamiltonian")
        return HamiltonianPath(list(self.terms), t_domain=self.t_domain)

    def frame(self, t: float | None = None):
        t = self.grid.t0 if t is None else t
        return build_frame(self.path(t), t=t, tol_gap=self.tolerances.tol_gap)

    def resolve(self, spec: PairSpec) -> StatePair:
        if isinstance(spec.dual, str):
            if spec.dual == SELF_DUAL:
                return StatePair.self_dual(spec.state)
            return dual_partner(self.frame(), spec.state)
        return StatePair(spec.state, spec.dual)

    def initial_pair(self) -> StatePair:
        if self.initial_state is None:
            raise ParseError("scenario has no initial_state", path="initial_state")
        return self.resolve(PairSpec(self.initial_state, self.initial_dual))

    def with_overrides(self, overrides: dict) -> "Scenario":
        doc = copy.deepcopy(self.document if self.document is not None else serialize_scenario(self))
        for key, value in overrides.items():
            set_dotted(doc, key, value)
        return parse_document(doc)


# --------------------------------------------------------------------------
# field parsers; each takes the dotted path of the value for error messages

def _need(doc: dict, key: str, where: str):
    if key not in doc:
        raise ParseError(f"missing required field {where}", path=where)
    return doc[key]


def _number(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not np.isfinite(x):
        raise ParseError(f"{where} must be a finite number", path=where)
    return float(x)


def _integer(x, where: str, minimum: int | None = None) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError(f"{where} must be an integer", path=where)
    if minimum is not None and x < minimum:
        raise ParseError(f"{where} must be >= {minimum}", path=where)
    return x


def _complex(x, where: str) -> complex:
    if (not isinstance(x, list) or len(x) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x)):
        raise ParseError(f"{where} must be an [re, im] pair", path=where)
    z = complex(x[0], x[1])
    if not np.isfinite(z):
        raise ParseError(f"{where} is not finite", path=where)
    return z


def _complex_list(x, where: str) -> tuple:
    if not isinstance(x, list):
        raise ParseError(f"{where} must be a list of [re, im] pairs", path=where)
    return tuple(_complex(v, f"{where}[{i}]") for i, v in enumerate(x))


def _vector(x, where: str, dim: int) -> np.ndarray:
    v = np.array(_complex_list(x, where), dtype=complex)
    if v.size != dim:
        raise DimensionError(f"{where} has length {v.size}, expected dimension {dim}",
                             quantity=where)
    return v


def _matrix(x, where: str) -> np.ndarray:
    if not isinstance(x, list) or not x or not all(isinstance(r, list) for r in x):
        raise ParseError(f"{where} must be a list of rows", path=where)
    n = len(x)
    if any(len(r) != n for r in x):
        raise ParseError(f"{where} must be square, got {n} rows of lengths "
                         f"{sorted({len(r) for r in x})}", path=where)
    return np.array([[_complex(v, f"{where}[{i}][{j}]") for j, v in enumerate(r)]
                     for i, r in enumerate(x)], dtype=complex)


def _profile(x, where: str) -> TimeProfile:
    if x is None:
        return TimeProfile()
    if not isinstance(x, dict):
        raise ParseError(f"{where} must be an object", path=where)
    unknown = set(x) - {"poly", "fourier"}
    if unknown:
        raise ParseError(f"unknown key {sorted(unknown)[0]!r} in {where}", path=where)
    poly = _complex_list(x["poly"], f"{where}.poly") if "poly" in x else ()
    omega, cos, sin = 0.0, (), ()
    if "fourier" in x:
        f = x["fourier"]
        fw = f"{where}.fourier"
        if not isinstance(f, dict):
            raise ParseError(f"{fw} must be an object", path=fw)
        omega = _number(_need(f, "omega", f"{fw}.omega"), f"{fw}.omega")
        cos = _complex_list(f.get("cos", []), f"{fw}.cos")
        sin = _complex_list(f.get("sin", []), f"{fw}.sin")
    if "poly" not in x and "fourier" not in x:
        poly = (1.0,)
    return TimeProfile(poly, omega, cos, sin)


def _pair_spec(x, where: str, dim: int) -> PairSpec:
    if not isinstance(x, dict):
        raise ParseError(f"{where} must be an object with 'state' and optional 'dual'", path=where)
    state = _vector(_need(x, "state", f"{where}.state"), f"{where}.state", dim)
    return PairSpec(state, _dual(x.get("dual", FRAME_ASSOCIATED), f"{where}.dual", dim))


def _dual(x, where: str, dim: int):
    if isinstance(x, str):
        if x not in (FRAME_ASSOCIATED, SELF_DUAL):
            raise ParseError(f"{where} must be a vector, {FRAME_ASSOCIATED!r} or {SELF_DUAL!r}",
                             path=where)
        return x
    return _vector(x, where, dim)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a JSON scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}", path="$") from exc
    return parse_document(doc)


def parse_document(doc: Any) -> Scenario:
    if not isinstance(doc, dict):
        raise ParseError("scenario must be a JSON object", path="$")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        k = sorted(unknown)[0]
        raise ParseError(f"unknown field {k!r}", path=k)
    version = _need(doc, "scenario_version", "scenario_version")
    if version != SCENARIO_VERSION:
        raise ParseError(f"unsupported scenario_version {version!r}", path="scenario_version")
    dim = _integer(_need(doc, "dimension", "dimension"), "dimension", minimum=1)

    terms = t_domain = None
    if "hamiltonian" in doc:
        h = doc["hamiltonian"]
        if not isinstance(h, dict):
            raise ParseError("hamiltonian must be an object", path="hamiltonian")
        td = _need(h, "t_domain", "hamiltonian.t_domain")
        if not isinstance(td, list) or len(td) != 2:
            raise ParseError("hamiltonian.t_domain must be [t0, t1]", path="hamiltonian.t_domain")
        t_domain = (_number(td[0], "hamiltonian.t_domain[0]"),
                    _number(td[1], "hamiltonian.t_domain[1]"))
        if not t_domain[1] > t_domain[0]:
            raise ParseError("hamiltonian.t_domain must have t1 > t0", path="hamiltonian.t_domain")
        raw_terms = _need(h, "terms", "hamiltonian.terms")
        if not isinstance(raw_terms, list) or not raw_terms:
            raise ParseError("hamiltonian.terms must be a non-empty list", path="hamiltonian.terms")
        parsed = []
        for i, term in enumerate(raw_terms):
            where = f"hamiltonian.terms[{i}]"
            if not isinstance(term, dict):
                raise ParseError(f"{where} must be an object", path=where)
            M = _matrix(_need(term, "matrix", f"{where}.matrix"), f"{where}.matrix")
            if M.shape[0] != dim:
                raise DimensionError(f"{where}.matrix is {M.shape[0]}x{M.shape[0]}, "
                                     f"expected dimension {dim}", quantity=f"{where}.matrix")
            parsed.append((M, _profile(term.get("coeff"), f"{where}.coeff")))
        terms = tuple(parsed)

    initial_state = None
    if "initial_state" in doc:
        initial_state = _vector(doc["initial_state"], "initial_state", dim)
    initial_dual = _dual(doc.get("initial_dual", FRAME_ASSOCIATED), "initial_dual", dim)

    grid = None
    g = doc.get("grid", {})
    if not isinstance(g, dict):
        raise ParseError("grid must be an object", path="grid")
    if t_domain is not None or g:
        t0 = _number(g["t0"], "grid.t0") if "t0" in g else (t_domain or (None,))[0]
        t1 = _number(g["t1"], "grid.t1") if "t1" in g else (t_domain or (None, None))[1]
        if t0 is None or t1 is None:
            raise ParseError("grid needs t0 and t1 when there is no hamiltonian", path="grid")
        steps = _integer(g.get("steps", DEFAULT_STEPS), "grid.steps", minimum=1)
        grid = TimeGrid(t0, t1, steps)
        if t_domain is not None and not (t_domain[0] <= t0 and t1 <= t_domain[1]):
            raise GridError(f"grid [{t0}, {t1}] lies outside the hamiltonian domain {t_domain}",
                            quantity="grid")

    anchor = doc.get("anchor")
    if anchor is not None:
        if isinstance(anchor, str):
            if anchor != "auto":
                raise ParseError("anchor must be 'auto' or a vector", path="anchor")
        elif isinstance(anchor, dict):
            anchor = _pair_spec({"dual": SELF_DUAL, **anchor}, "anchor", dim)
        else:
            anchor = PairSpec(_vector(anchor, "anchor", dim), SELF_DUAL)

    tol = doc.get("tolerances", {})
    if not isinstance(tol, dict):
        raise ParseError("tolerances must be an object", path="tolerances")
    unknown = set(tol) - {"tol_gap", "tol_bio", "drift_fail"}
    if unknown:
        raise ParseError(f"unknown tolerance {sorted(unknown)[0]!r}", path="tolerances")
    tolerances = Tolerances(
        None if tol.get("tol_gap") is None else _number(tol["tol_gap"], "tolerances.tol_gap"),
        _number(tol.get("tol_bio", TOL_BIO), "tolerances.tol_bio"),
        _number(tol.get("drift_fail", DRIFT_FAIL), "tolerances.drift_fail"))

    seed = _integer(doc.get("seed", 0), "seed", minimum=0)
    outputs = doc.get("outputs", [])
    if not isinstance(outputs, list) or not all(isinstance(o, str) for o in outputs):
        raise ParseError("outputs must be a list of strings", path="outputs")

    offdiag = None
    if "offdiag" in doc:
        o = doc["offdiag"]
        if not isinstance(o, dict):
            raise ParseError("offdiag must be an object", path="offdiag")
        j = _integer(_need(o, "j", "offdiag.j"), "offdiag.j", minimum=0)
        k = _integer(_need(o, "k", "offdiag.k"), "offdiag.k", minimum=0)
        for name, v in (("j", j), ("k", k)):
            if v >= dim:
                raise DimensionError(f"offdiag.{name} = {v} out of range for dimension {dim}",
                                     quantity=f"offdiag.{name}")
        if j == k:
            raise ParseError("offdiag.j and offdiag.k must differ", path="offdiag")
        offdiag = (j, k)

    geodesic = None
    if "geodesic" in doc:
        gd = doc["geodesic"]
        if not isinstance(gd, dict):
            raise ParseError("geodesic must be an object", path="geodesic")
        param = gd.get("parametrization", "affine")
        if param not in ("affine", "linear"):
            raise ParseError("geodesic.parametrization must be 'affine' or 'linear'",
                             path="geodesic.parametrization")
        geodesic = GeodesicSpec(_pair_spec(_need(gd, "start", "geodesic.start"), "geodesic.start", dim),
                                _pair_spec(_need(gd, "end", "geodesic.end"), "geodesic.end", dim),
                                _integer(gd.get("samples", 1001), "geodesic.samples", minimum=5),
                                param)

    polygon = None
    if "polygon" in doc:
        pg = doc["polygon"]
        if not isinstance(pg, dict):
            raise ParseError("polygon must be an object", path="polygon")
        verts = _need(pg, "vertices", "polygon.vertices")
        if not isinstance(verts, list) or len(verts) < 2:
            raise ParseError("polygon.vertices needs at least 2 entries", path="polygon.vertices")
        closed = pg.get("closed", True)
        if not isinstance(closed, bool):
            raise ParseError("polygon.closed must be true or false", path="polygon.closed")
        polygon = PolygonSpec(tuple(_pair_spec(v, f"polygon.vertices[{i}]", dim)
                                    for i, v in enumerate(verts)), closed)

    sweep = None
    if "sweep" in doc:
        sw = doc["sweep"]
        if not isinstance(sw, dict):
            raise ParseError("sweep must be an object", path="sweep")
        cmd = _need(sw, "command", "sweep.command")
        if cmd not in COMMANDS or cmd == "sweep":
            raise ParseError(f"sweep.command must be one of {COMMANDS[:-1]}", path="sweep.command")
        pts = _need(sw, "points", "sweep.points")
        if not isinstance(pts, list) or not pts or not all(isinstance(p, dict) for p in pts):
            raise ParseError("sweep.points must be a non-empty list of objects", path="sweep.points")
        for i, p in enumerate(pts):
            for key in p:
                if key.split(".")[0].split("[")[0] == "sweep":
                    raise ParseError("sweep points cannot override the sweep itself",
                                     path=f"sweep.points[{i}]")
        sweep = SweepSpec(cmd, tuple(copy.deepcopy(pts)))

    name = doc.get("name", "")
    if not isinstance(name, str):
        raise ParseError("name must be a string", path="name")

    return Scenario(dim, terms, t_domain, initial_state, initial_dual, grid, anchor,
                    tolerances, seed, tuple(outputs), offdiag, geodesic, polygon, sweep,
                    name, copy.deepcopy(doc))


# --------------------------------------------------------------------------
# serialization

def _c(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _cv(v) -> list:
    return [_c(z) for z in v]


def _pair_doc(p: PairSpec) -> dict:
    return {"state": _cv(p.state), "dual": p.dual if isinstance(p.dual, str) else _cv(p.dual)}


def _profile_doc(p: TimeProfile) -> dict:
    out = {"poly": _cv(p.poly)}
    if p.omega or p.cos or p.sin:
        out["fourier"] = {"omega": p.omega, "cos": _cv(p.cos), "sin": _cv(p.sin)}
    return out


def serialize_scenario(s: Scenario) -> dict:
    """Document form of a scenario; ``parse_document`` inverts it."""
    doc: dict = {"scenario_version": SCENARIO_VERSION, "dimension": s.dimension}
    if s.name:
        doc["name"] = s.name
    if s.terms is not None:
        doc["hamiltonian"] = {
            "t_domain": list(s.t_domain),
            "terms": [{"matrix": [_cv(row) for row in M], "coeff": _profile_doc(p)}
                      for M, p in s.terms]}
    if s.initial_state is not None:
        doc["initial_state"] = _cv(s.initial_state)
    doc["initial_dual"] = s.initial_dual if isinstance(s.initial_dual, str) else _cv(s.initial_dual)
    if s.grid is not None:
        doc["grid"] = {"t0": s.grid.t0, "t1": s.grid.t1, "steps": s.grid.steps}
    if s.anchor is not None:
        doc["anchor"] = s.anchor if isinstance(s.anchor, str) else _pair_doc(s.anchor)
    doc["tolerances"] = {"tol_gap": s.tolerances.tol_gap, "tol_bio": s.tolerances.tol_bio,
                         "drift_fail": s.tolerances.drift_fail}
    doc["seed"] = s.seed
    doc["outputs"] = list(s.outputs)
    if s.offdiag is not None:
        doc["offdiag"] = {"j": s.offdiag[0], "k": s.offdiag[1]}
    if s.geodesic is not None:
        g = s.geodesic
        doc["geodesic"] = {"start": _pair_doc(g.start), "end": _pair_doc(g.end),
                           "samples": g.samples, "parametrization": g.parametrization}
    if s.polygon is not None:
        doc["polygon"] = {"vertices": [_pair_doc(v) for v in s.polygon.vertices],
                          "closed": s.polygon.closed}
    if s.sweep is not None:
        doc["sweep"] = {"command": s.sweep.command, "points": copy.deepcopy(list(s.sweep.points))}
    return doc


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(serialize_scenario(s), indent=2)


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read scenario {path!r}: {exc.strerror}",
                      operation="parse_scenario", quantity="scenario") from exc
    return parse_scenario(text)


_TOKEN = re.compile(r"([^.\[\]]+)|\[(\d+)\]")


def set_dotted(doc: dict, key: str, value) -> None:
    """Set ``doc`` at a path such as ``hamiltonian.terms[0].coeff.fourier.omega``."""
    parts = []
    for name, idx in _TOKEN.findall(key):
        parts.append(int(idx) if idx else name)
    if not parts or "".join(str(p) for p in parts) == "":
        raise ParseError(f"bad override path {key!r}", path=key)
    node = doc
    for p in parts[:-1]:
        try:
            node = node[p]
        except (KeyError, IndexError, TypeError):
            if isinstance(p, str) and isinstance(node, dict):
                node = node.setdefault(p, {})
            else:
                raise ParseError(f"override path {key!r} does not exist", path=key) from None
    last = parts[-1]
    try:
        node[last] = copy.deepcopy(value)
    except (IndexError, TypeError):
        raise ParseError(f"override path {key!r} does not exist", path=key) from None
