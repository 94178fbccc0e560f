# cli/cli_problem.py
# Problem files (JSON, version 1): parse into domain objects, serialize back to canonical form.
#
# Complex scalars are numbers or [re, im]; matrices are row-major lists of rows.
#   {"version": 1,
#    "effect" | "povm" | "instrument": ...,
#    "state": {"vector": [...]} | {"density": [[...]]},        (optional)
#    "tolerances": {"feas_tol": 1e-7, ...}}                   (optional)

import cmath
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import numpy as np

from core.errors import ConfigError, ProblemParseError, SatrepError
from core.settings import Tolerances, tolerances
from quantum.instrument import (
    Instrument,
    derived_observable,
    ladder,
    luders_binary,
    mixture,
    preparative,
    repeatable,
    require_valid_instrument,
)
from quantum.kernel import label_from_json, label_to_json
from quantum.povm import (
    DensityMatrix,
    Povm,
    StateVector,
    density_matrix,
    povm_from_effects,
    require_effect,
    spectral_measure_of_effect,
    state_vector,
    two_outcome,
)

logger = logging.getLogger(__name__)

PROBLEM_VERSION = 1
_KINDS = ("effect", "povm", "instrument")
_BUILDERS = ("luders", "ladder", "preparative", "mixture", "repeatable")

# canonical problem trees hold numpy arrays where the file holds matrices
Tree = Dict[str, Any]


@dataclass
class Problem:
    kind: str
    tree: Any
    effect: Optional[np.ndarray] = None
    povm: Optional[Povm] = None
    instrument: Optional[Instrument] = None
    state_tree: Optional[Tree] = None
    state: Optional[DensityMatrix] = None
    psi: Optional[StateVector] = None
    tolerance_overrides: Dict[str, Any] = field(default_factory=dict)
    source: Optional[str] = None

    def as_instrument(self, tols: Tolerances = tolerances) -> Instrument:
        """Instrument problems as given; a bare effect means its Lüders instrument."""
        if self.instrument is not None:
            return self.instrument
        if self.effect is not None:
            return luders_binary(self.effect, tols)
        raise ProblemParseError("problem does not describe an instrument", self.source, "/povm")

    def as_povm(self, tols: Tolerances = tolerances) -> Povm:
        """POVM problems as given; effects give {1 - A, A}; instruments their derived observable."""
        if self.povm is not None:
            return self.povm
        if self.effect is not None:
            return two_outcome(self.effect, tols)
        return derived_observable(self.instrument)

    def luders_effect(self) -> Optional[np.ndarray]:
        """The effect A when the problem is a bare effect or a Lüders builder, else None."""
        if self.effect is not None:
            return self.effect
        if self.kind == "instrument" and isinstance(self.tree, dict) and self.tree.get("builder") == "luders":
            return self.tree["effect"]
        return None


# ================== SCALARS & MATRICES ==================

def _fail(message: str, source: Optional[str], where: str) -> ProblemParseError:
    return ProblemParseError(message, source, where or "/")


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _complex(raw: Any, source: Optional[str], where: str) -> complex:
    if _is_number(raw):
        z = complex(raw)
    elif isinstance(raw, list) and len(raw) == 2 and all(_is_number(x) for x in raw):
        z = complex(raw[0], raw[1])
    else:
        raise _fail(f"expected a number or [re, im], got {raw!r}", source, where)
    if not cmath.isfinite(z):
        raise _fail(f"non-finite entry {raw!r}", source, where)
    return z


def matrix_from_json(raw: Any, source: Optional[str] = None, where: str = "") -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise _fail("expected a non-empty list of rows", source, where)
    dim = len(raw)
    out = np.zeros((dim, dim), dtype=complex)
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != dim:
            raise _fail(f"row must have {dim} entries (square matrix)", source, f"{where}/{i}")
        for j, x in enumerate(row):
            out[i, j] = _complex(x, source, f"{where}/{i}/{j}")
    return out


def vector_from_json(raw: Any, source: Optional[str] = None, where: str = "") -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise _fail("expected a non-empty list of amplitudes", source, where)
    return np.array([_complex(x, source, f"{where}/{i}") for i, x in enumerate(raw)], dtype=complex)


def matrix_to_json(M: np.ndarray) -> List[List[List[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(M, dtype=complex)]


def vector_to_json(v: np.ndarray) -> List[List[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


# ================== PROBLEM TREES ==================

def _require_dict(raw: Any, source: Optional[str], where: str) -> Dict[str, Any]:
    if not isinstance(raw, dict):
        raise _fail(f"expected an object, got {type(raw).__name__}", source, where)
    return raw


def _require_key(raw: Dict[str, Any], key: str, source: Optional[str], where: str) -> Any:
    if key not in raw:
        raise _fail(f"missing key '{key}'", source, where)
    return raw[key]


def _labels(raw: Any, source: Optional[str], where: str) -> List[Any]:
    if not isinstance(raw, list) or not raw:
        raise _fail("expected a non-empty list of labels", source, where)
    return [label_from_json(x) for x in raw]


def _povm_tree(raw: Any, source: Optional[str], where: str) -> Tree:
    raw = _require_dict(raw, source, where)
    if "spectral_of" in raw:
        return {"spectral_of": matrix_from_json(raw["spectral_of"], source, f"{where}/spectral_of")}
    labels = _labels(_require_key(raw, "labels", source, where), source, f"{where}/labels")
    effects_raw = _require_key(raw, "effects", source, where)
    if not isinstance(effects_raw, list) or len(effects_raw) != len(labels):
        raise _fail(f"need exactly {len(labels)} effects", source, f"{where}/effects")
    effects = [matrix_from_json(E, source, f"{where}/effects/{k}") for k, E in enumerate(effects_raw)]
    return {"labels": labels, "effects": effects}


def _state_tree(raw: Any, source: Optional[str], where: str) -> Tree:
    raw = _require_dict(raw, source, where)
    if "vector" in raw:
        return {"vector": vector_from_json(raw["vector"], source, f"{where}/vector")}
    if "density" in raw:
        return {"density": matrix_from_json(raw["density"], source, f"{where}/density")}
    raise _fail("state needs 'vector' or 'density'", source, where)


def _instrument_tree(raw: Any, source: Optional[str], where: str) -> Tree:
    raw = _require_dict(raw, source, where)
    builder = raw.get("builder")
    if builder is None:
        labels = _labels(_require_key(raw, "labels", source, where), source, f"{where}/labels")
        kraus_raw = _require_key(raw, "kraus", source, where)
        if not isinstance(kraus_raw, list) or len(kraus_raw) != len(labels):
            raise _fail(f"need exactly {len(labels)} Kraus lists", source, f"{where}/kraus")
        kraus = []
        for k, ops in enumerate(kraus_raw):
            if not isinstance(ops, list) or not ops:
                raise _fail("expected a non-empty list of Kraus matrices", source, f"{where}/kraus/{k}")
            kraus.append([matrix_from_json(K, source, f"{where}/kraus/{k}/{m}") for m, K in enumerate(ops)])
        return {"labels": labels, "kraus": kraus}

    if builder == "luders":
        return {"builder": "luders", "effect": matrix_from_json(_require_key(raw, "effect", source, where), source, f"{where}/effect")}
    if builder == "ladder":
        d = _require_key(raw, "d", source, where)
        if not isinstance(d, int) or isinstance(d, bool):
            raise _fail(f"'d' must be an integer, got {d!r}", source, f"{where}/d")
        return {"builder": "ladder", "d": d}
    if builder == "repeatable":
        return {"builder": "repeatable", "povm": _povm_tree(_require_key(raw, "povm", source, where), source, f"{where}/povm")}
    if builder == "preparative":
        povm = _povm_tree(_require_key(raw, "povm", source, where), source, f"{where}/povm")
        states_raw = _require_key(raw, "states", source, where)
        if not isinstance(states_raw, list):
            raise _fail("'states' must be a list of {label, state}", source, f"{where}/states")
        states = []
        for k, entry in enumerate(states_raw):
            entry = _require_dict(entry, source, f"{where}/states/{k}")
            label = label_from_json(_require_key(entry, "label", source, f"{where}/states/{k}"))
            state = _state_tree(_require_key(entry, "state", source, f"{where}/states/{k}"), source, f"{where}/states/{k}/state")
            states.append({"label": label, "state": state})
        return {"builder": "preparative", "povm": povm, "states": states}
    if builder == "mixture":
        t = _require_key(raw, "t", source, where)
        if not _is_number(t) or not cmath.isfinite(t):
            raise _fail(f"'t' must be a finite number, got {t!r}", source, f"{where}/t")
        return {
            "builder": "mixture",
            "first": _instrument_tree(_require_key(raw, "first", source, where), source, f"{where}/first"),
            "second": _instrument_tree(_require_key(raw, "second", source, where), source, f"{where}/second"),
            "t": float(t),
        }
    raise _fail(f"unknown builder {builder!r} (expected one of {', '.join(_BUILDERS)})", source, f"{where}/builder")


# ================== BUILD ==================

def _build_state(tree: Tree, tols: Tolerances) -> Union[StateVector, DensityMatrix]:
    if "vector" in tree:
        return state_vector(tree["vector"], tols)
    return density_matrix(tree["density"], tols)


def _as_density(state: Union[StateVector, DensityMatrix]) -> DensityMatrix:
    return DensityMatrix.from_vector(state) if isinstance(state, StateVector) else state


def build_povm(tree: Tree, tols: Tolerances = tolerances) -> Povm:
    if "spectral_of" in tree:
        return spectral_measure_of_effect(tree["spectral_of"], tols)
    return povm_from_effects(tree["labels"], tree["effects"], tols)


def build_instrument(tree: Tree, tols: Tolerances = tolerances) -> Instrument:
    builder = tree.get("builder")
    if builder is None:
        inst = Instrument(tuple(tree["labels"]), tuple(tuple(ops) for ops in tree["kraus"]))
    elif builder == "luders":
        inst = luders_binary(tree["effect"], tols)
    elif builder == "ladder":
        inst = ladder(tree["d"])
    elif builder == "repeatable":
        inst = repeatable(build_povm(tree["povm"], tols), tols)
    elif builder == "preparative":
        A = build_povm(tree["povm"], tols)
        states = {entry["label"]: _as_density(_build_state(entry["state"], tols)) for entry in tree["states"]}
        inst = preparative(A, states, tols)
    else:
        inst = mixture(build_instrument(tree["first"], tols), build_instrument(tree["second"], tols), tree["t"], tols)
    require_valid_instrument(inst, tols)
    return inst


# ================== ENTRY POINTS ==================

def parse_problem(raw: Any, source: Optional[str] = None, base: Tolerances = tolerances) -> Problem:
    """
    Validate a decoded JSON document and build its domain objects. Tolerance overrides in
    the document apply on top of `base` while building. Every failure is a
    ProblemParseError positioned at the offending node.
    """
    raw = _require_dict(raw, source, "")
    version = raw.get("version")
    if version != PROBLEM_VERSION:
        raise _fail(f"unsupported version {version!r} (expected {PROBLEM_VERSION})", source, "/version")

    overrides = raw.get("tolerances", {})
    if not isinstance(overrides, dict):
        raise _fail("'tolerances' must be an object", source, "/tolerances")
    try:
        tols = base.with_overrides(overrides)
    except ConfigError as e:
        raise _fail(str(e), source, "/tolerances") from None

    present = [k for k in _KINDS if k in raw]
    if len(present) != 1:
        raise _fail(f"need exactly one of {', '.join(_KINDS)}; found {present or 'none'}", source, "")
    kind = present[0]
    where = f"/{kind}"

    if kind == "effect":
        tree: Any = matrix_from_json(raw["effect"], source, where)
    elif kind == "povm":
        tree = _povm_tree(raw["povm"], source, where)
    else:
        tree = _instrument_tree(raw["instrument"], source, where)
    state_tree = _state_tree(raw["state"], source, "/state") if "state" in raw else None

    problem = Problem(kind=kind, tree=tree, state_tree=state_tree, tolerance_overrides=dict(overrides), source=source)
    try:
        if kind == "effect":
            problem.effect = require_effect(tree, tols)
        elif kind == "povm":
            problem.povm = build_povm(tree, tols)
        else:
            problem.instrument = build_instrument(tree, tols)
    except SatrepError as e:
        raise _fail(f"{type(e).__name__}: {e}", source, where) from None
    if state_tree is not None:
        try:
            state = _build_state(state_tree, tols)
        except SatrepError as e:
            raise _fail(f"{type(e).__name__}: {e}", source, "/state") from None
        problem.psi = state if isinstance(state, StateVector) else None
        problem.state = _as_density(state)

    logger.debug("parsed %s problem from %s", kind, source or "<memory>")
    return problem


def load_problem(path: str, base: Tolerances = tolerances) -> Problem:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ProblemParseError(f"cannot read file: {e.strerror}", path) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemParseError(f"invalid JSON: {e.msg}", path, f"{e.lineno}:{e.colno}") from None
    return parse_problem(raw, path, base)


def _tree_to_json(node: Any) -> Any:
    if isinstance(node, np.ndarray):
        return vector_to_json(node) if node.ndim == 1 else matrix_to_json(node)
    if isinstance(node, dict):
        return {k: _tree_to_json(v) for k, v in node.items()}
    if isinstance(node, list):
        return [_tree_to_json(v) for v in node]
    return node


def _labels_to_json(tree: Any) -> Any:
    """Tuple labels back to lists wherever a problem tree holds labels."""
    if isinstance(tree, dict):
        out = {}
        for k, v in tree.items():
            if k == "labels":
                out[k] = [label_to_json(x) for x in v]
            elif k == "label":
                out[k] = label_to_json(v)
            else:
                out[k] = _labels_to_json(v)
        return out
    if isinstance(tree, list):
        return [_labels_to_json(v) for v in tree]
    return tree


def serialize_problem(problem: Problem) -> Dict[str, Any]:
    """Canonical JSON document of a parsed problem: version 1, every complex entry as [re, im]."""
    out: Dict[str, Any] = {"version": PROBLEM_VERSION}
    out[problem.kind] = _tree_to_json(_labels_to_json(problem.tree))
    if problem.state_tree is not None:
        out["state"] = _tree_to_json(problem.state_tree)
    if problem.tolerance_overrides:
        out["tolerances"] = dict(problem.tolerance_overrides)
    return out


def parse_state_arg(text: str, dim: Optional[int] = None, tols: Tolerances = tolerances) -> StateVector:
    """State vector from a command-line JSON array such as '[1, 0]' or '[[0.7071, 0], [0, 0.7071]]'."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemParseError(f"invalid JSON state: {e.msg}", None, f"{e.lineno}:{e.colno}") from None
    try:
        psi = state_vector(vector_from_json(raw, None, ""), tols)
    except SatrepError as e:
        raise ProblemParseError(f"{type(e).__name__}: {e}") from None
    if dim is not None and psi.dim != dim:
        raise ProblemParseError(f"state has dimension {psi.dim}, expected {dim}")
    return psi
