"""Scenario files: JSON schema, loading with line-anchored errors, object builders."""
from __future__ import annotations

import copy
import hashlib
import json
import re
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .expr import as_values
from .domain import Domain1D, ReferencePotential, quadratic_reference, renormalize_reference
from .measures import GridMeasure, bump_mixture, from_lebesgue, m_gaussian
from .mcalc import MParam

TASKS = ("flow", "pde", "compare", "convexity", "ineq", "conc", "calculus")

_num = {"type": "number"}
_expr = {"type": ["string", "number"]}
_pos = {"type": "number", "exclusiveMinimum": 0}

_initial = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["reference", "m_gaussian", "barenblatt", "bumps", "density"]},
        "mean": _num, "variance": _pos, "t0": _pos, "x0": _num,
        "centers": {"type": "array", "items": _num, "minItems": 1},
        "widths": {"type": "array", "items": _pos, "minItems": 1},
        "weights": {"type": "array", "items": _pos, "minItems": 1},
        "floor": {"type": "number", "minimum": 0},
        "expr": _expr,
        "tail_tol": _pos,
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["name", "task", "m"],
    "properties": {
        "name": {"type": "string", "pattern": r"^[A-Za-z0-9_.\-]+$"},
        "description": {"type": "string"},
        "task": {"enum": list(TASKS)},
        "m": _pos,
        "n": {"type": "number", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "domain": {
            "type": "object",
            "required": ["kind", "a", "b", "M"],
            "properties": {
                "kind": {"enum": ["segment", "circle"]},
                "a": _num, "b": _num,
                "M": {"type": "integer", "minimum": 8},
                "psi": _expr,
            },
            "additionalProperties": False,
        },
        "reference": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["quadratic", "expr"]},
                "K": _num, "center": _num,
                "Psi": _expr,
                "normalize": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "initial": _initial,
        "initial_b": _initial,
        "params": {
            "type": "object",
            "properties": {
                "T": {"type": "number", "minimum": 0},
                "delta": _pos, "dt": _pos,
                "mode": {"enum": ["explicit", "semi-implicit"]},
                "J": {"type": "integer", "minimum": 4},
                "record_every": _pos,
                "with_I": {"type": "boolean"},
                "cases": {"type": "integer", "minimum": 1},
                "K": _num,
                "sharpness": _num,
                "expect": {"enum": ["convex", "counterexample"]},
                "r_grid": {"type": "array", "items": _pos, "minItems": 1},
                "thetas": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "grid": {"type": "integer", "minimum": 2},
                "eps": {"type": "array", "items": _pos},
                "checks": {"type": "array", "items": {"enum": [
                    "talagrand", "hwi_lsi", "poincare", "slope", "energy_dissipation",
                    "weak_residual", "contraction"]}},
            },
            "additionalProperties": False,
        },
        "tolerances": {"type": "object", "additionalProperties": _pos},
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"task": {"not": {"const": "calculus"}}}},
         "then": {"required": ["domain", "reference"]}},
        {"if": {"properties": {"task": {"enum": ["flow", "pde", "compare"]}}},
         "then": {"required": ["initial"]}},
    ],
}


class ScenarioError(ValueError):
    """Invalid scenario; the message starts with ``file:line:``."""


def _locate(text: str, path) -> int:
    """Line of the innermost key on ``path`` (1 if it cannot be found)."""
    pos, line = 0, 1
    for key in path:
        if not isinstance(key, str):
            continue
        mt = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if mt is None:
            break
        pos = mt.start()
        line = text.count("\n", 0, pos) + 1
    return line


def resolve(name_or_path) -> Path:
    """A file path, or the name of a bundled scenario (with or without ``.json``)."""
    p = Path(name_or_path)
    if p.exists():
        return p
    stem = p.name if p.suffix == ".json" else p.name + ".json"
    bundled = resources.files("wassflow") / "scenarios" / stem
    if bundled.is_file():
        return Path(str(bundled))
    raise ScenarioError(f"{name_or_path}:1: no such file or bundled scenario")


def validate(cfg: dict, text: str = "", label: str = "<scenario>") -> dict:
    """Raise ScenarioError listing every schema violation, one per line, by line number."""
    v = jsonschema.Draft202012Validator(SCHEMA)
    found = []
    for e in v.iter_errors(cfg):
        path = list(e.absolute_path)
        where = "/".join(map(str, path)) or "<root>"
        found.append((_locate(text, path), where, e.message))
    if found:
        found.sort()
        raise ScenarioError("\n".join(f"{label}:{ln}: {w}: {msg}" for ln, w, msg in found))
    return cfg


def load(name_or_path):
    """Read, parse and validate a scenario.  Returns ``(cfg, raw_bytes, path)``."""
    path = resolve(name_or_path)
    raw = path.read_bytes()
    text = raw.decode("utf-8", errors="replace")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ScenarioError(f"{path}:1: top level must be an object")
    validate(cfg, text, str(path))
    return cfg, raw, path


def canonical(cfg: dict) -> bytes:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical(cfg)).hexdigest()


def set_path(cfg: dict, dotted: str, value) -> dict:
    """Copy of ``cfg`` with ``a.b.c`` set to ``value``."""
    out = copy.deepcopy(cfg)
    keys = dotted.split(".")
    node = out
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ScenarioError(f"<sweep>:1: {dotted}: {k} is not an object")
    node[keys[-1]] = value
    return out


def params(cfg: dict) -> dict:
    return cfg.get("params", {})


def tol(cfg: dict, key: str, default: float, scale: float = 1.0) -> float:
    return scale * float(cfg.get("tolerances", {}).get(key, default))


# ---- builders ----

def build_p(cfg) -> MParam:
    return MParam(cfg["m"], cfg.get("n", 1))


def build_domain(cfg) -> Domain1D:
    dc = cfg["domain"]
    return Domain1D(dc["kind"], dc["a"], dc["b"], dc["M"], psi_src=dc.get("psi", 0.0))


def build_reference(cfg, d: Domain1D, p: MParam) -> ReferencePotential:
    """Quadratic Psi normalised by a constant shift, or an expression.

    ``{"type": "expr", "Psi": 0, "normalize": false}`` gives a flat
    potential, i.e. pure diffusion with no drift.
    """
    rc = cfg["reference"]
    if rc["type"] == "quadratic":
        return quadratic_reference(d, p, rc.get("K", 1.0), rc.get("center", 0.0),
                                   normalize=rc.get("normalize", True))
    ref = ReferencePotential.from_expr(d, p, rc["Psi"])
    if rc.get("normalize", True):
        ref, _ = renormalize_reference(ref)
    return ref


def build_initial(spec: dict, d: Domain1D, p: MParam, ref) -> GridMeasure:
    from .flow.pde import barenblatt_measure
    from .flow.trace import reference_measure

    kind = spec["type"]
    if kind == "reference":
        return reference_measure(ref)
    if kind == "m_gaussian":
        mu, _ = m_gaussian(p, spec.get("mean", 0.0), spec["variance"], d,
                           tail_tol=spec.get("tail_tol", 1e-8))
        return mu
    if kind == "barenblatt":
        return barenblatt_measure(d, p.m, spec["t0"], x0=spec.get("x0", 0.0))
    if kind == "bumps":
        k = len(spec["centers"])
        if not (len(spec["widths"]) == len(spec["weights"]) == k):
            raise ValueError("centers, widths and weights need equal lengths")
        return bump_mixture(d, spec["centers"], spec["widths"], spec["weights"],
                            floor=spec.get("floor", 0.0))
    return from_lebesgue(d, as_values(spec["expr"], d.x))


def rng(cfg) -> np.random.Generator:
    return np.random.default_rng(cfg.get("seed", 0))
