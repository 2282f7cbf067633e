"""The simulatee: wires, pairwise potentials, one-body fields.

A model is the continuous Hamiltonian ``H(t) = K + sum h_ij(x_i, x_j) +
sum g_k(x_k, t)`` before discretization. Kinetic energy is implied by the
wire masses. Units are hbar = 1 and dimensionless throughout.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Mapping

from . import dsl
from .errors import IsosimError, LexError, ParseError, ValidationError

_IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z_0-9]*\Z")

WIRE_KEYS = {"name", "mass", "length", "sites"}
PAIR_KEYS = {"i", "j", "expr"}
FIELD_KEYS = {"wire", "expr"}
MODEL_KEYS = {"wires", "pair_potentials", "one_body", "constants", "scale"}


@dataclass(frozen=True)
class WireSpec:
    name: str
    sites: int
    mass: float = 1.0
    length: float = 1.0


@dataclass(frozen=True)
class PairPotentialSpec:
    wire_i: str
    wire_j: str
    expr: dsl.Expr
    source: str = ""


@dataclass(frozen=True)
class OneBodyFieldSpec:
    wire: str
    expr: dsl.Expr
    source: str = ""

    @property
    def time_dependent(self) -> bool:
        return dsl.TIME_VARIABLE in dsl.free_variables(self.expr)


@dataclass(frozen=True)
class ModelSpec:
    wires: tuple[WireSpec, ...]
    pairs: tuple[PairPotentialSpec, ...] = ()
    fields: tuple[OneBodyFieldSpec, ...] = ()
    constants: Mapping[str, float] = field(default_factory=dict)
    scale: float = 1.0

    @property
    def num_wires(self) -> int:
        return len(self.wires)

    @property
    def dimension(self) -> int:
        return math.prod(w.sites for w in self.wires)

    @property
    def time_dependent(self) -> bool:
        return any(f.time_dependent for f in self.fields)

    def wire(self, name: str) -> WireSpec:
        for w in self.wires:
            if w.name == name:
                return w
        raise KeyError(name)

    def with_scale(self, scale: float) -> "ModelSpec":
        return validate(_replace_scale(self.to_dict(), scale))

    def to_dict(self) -> dict[str, Any]:
        """The model-file form of this model (round-trips through validate)."""
        return {
            "wires": [
                {"name": w.name, "mass": w.mass, "length": w.length, "sites": w.sites}
                for w in self.wires
            ],
            "pair_potentials": [
                {"i": p.wire_i, "j": p.wire_j, "expr": p.source or dsl.to_source(p.expr)}
                for p in self.pairs
            ],
            "one_body": [
                {"wire": f.wire, "expr": f.source or dsl.to_source(f.expr)}
                for f in self.fields
            ],
            "constants": dict(self.constants),
            "scale": self.scale,
        }


def _replace_scale(raw: dict, scale: float) -> dict:
    raw = dict(raw)
    raw["scale"] = scale
    return raw


# ---------------------------------------------------------------- validate

def _is_real(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _positive(v: Any) -> bool:
    return _is_real(v) and math.isfinite(v) and v > 0


def _unknown_keys(obj: Mapping, allowed: set[str], path: str, errors: list[str]) -> None:
    for key in obj:
        if key not in allowed:
            errors.append(f"{path}.{key}: unknown key" if path else f"{key}: unknown key")


def _reserved(name: str) -> bool:
    return (
        name == dsl.TIME_VARIABLE
        or name in dsl.IMPLICIT_CONSTANTS
        or name in dsl.FUNCTIONS
        or dsl.WIRE_VARIABLE.match(name) is not None
    )


def _parse_expr(src: Any, path: str, errors: list[str]):
    if not isinstance(src, str):
        errors.append(f"{path}: expression must be a string")
        return None
    try:
        return dsl.parse(src)
    except (LexError, ParseError) as exc:
        errors.append(f"{path}: {exc}")
        return None


def validate(raw: Mapping[str, Any] | ModelSpec) -> ModelSpec:
    """Check a model description and return the immutable :class:`ModelSpec`.

    ``raw`` follows the model-file schema (``wires``, ``pair_potentials``,
    ``one_body``, ``constants``, ``scale``). All violations are collected
    and raised together as one :class:`ValidationError`.
    """
    if isinstance(raw, ModelSpec):
        raw = raw.to_dict()
    if not isinstance(raw, Mapping):
        raise ValidationError(["model: expected a JSON object"])

    errors: list[str] = []
    _unknown_keys(raw, MODEL_KEYS, "", errors)

    constants: dict[str, float] = {}
    raw_constants = raw.get("constants", {})
    if not isinstance(raw_constants, Mapping):
        errors.append("constants: expected an object")
        raw_constants = {}
    for name, value in raw_constants.items():
        if not _IDENTIFIER.match(str(name)):
            errors.append(f"constants.{name}: not an identifier")
        elif _reserved(name):
            errors.append(f"constants.{name}: reserved name")
        elif not (_is_real(value) and math.isfinite(value)):
            errors.append(f"constants.{name}: must be a finite number")
        else:
            constants[name] = float(value)

    scale = raw.get("scale", 1.0)
    if not _positive(scale):
        errors.append(f"scale: must be a finite positive number, got {scale!r}")

    wires: list[WireSpec] = []
    raw_wires = raw.get("wires")
    if not isinstance(raw_wires, list) or not raw_wires:
        errors.append("wires: at least one wire is required")
        raw_wires = raw_wires if isinstance(raw_wires, list) else []
    seen: set[str] = set()
    for n, w in enumerate(raw_wires):
        path = f"wires[{n}]"
        if not isinstance(w, Mapping):
            errors.append(f"{path}: expected an object")
            continue
        _unknown_keys(w, WIRE_KEYS, path, errors)
        ok = True
        name = w.get("name")
        if not isinstance(name, str) or not dsl.WIRE_VARIABLE.match(name):
            errors.append(f"{path}.name: wire names must look like x<digits>, got {name!r}")
            ok = False
        elif name in seen:
            errors.append(f"{path}.name: duplicate wire name {name!r}")
            ok = False
        sites = w.get("sites")
        if not isinstance(sites, int) or isinstance(sites, bool) or sites < 2:
            errors.append(f"{path}.sites: must be an integer >= 2, got {sites!r}")
            ok = False
        mass = w.get("mass", 1.0)
        if not _positive(mass):
            errors.append(f"{path}.mass: must be finite and positive, got {mass!r}")
            ok = False
        length = w.get("length", 1.0)
        if not _positive(length):
            errors.append(f"{path}.length: must be finite and positive, got {length!r}")
            ok = False
        if isinstance(name, str):
            seen.add(name)
        if ok:
            wires.append(WireSpec(name, sites, float(mass), float(length)))

    allowed_const = set(constants) | set(dsl.IMPLICIT_CONSTANTS)

    pairs: list[PairPotentialSpec] = []
    pair_keys: set[frozenset[str]] = set()
    raw_pairs = raw.get("pair_potentials", [])
    if not isinstance(raw_pairs, list):
        errors.append("pair_potentials: expected an array")
        raw_pairs = []
    for n, p in enumerate(raw_pairs):
        path = f"pair_potentials[{n}]"
        if not isinstance(p, Mapping):
            errors.append(f"{path}: expected an object")
            continue
        _unknown_keys(p, PAIR_KEYS, path, errors)
        i, j = p.get("i"), p.get("j")
        ok = True
        for key, ref in (("i", i), ("j", j)):
            if ref not in seen:
                errors.append(f"{path}.{key}: dangling wire reference {ref!r}")
                ok = False
        if ok and i == j:
            errors.append(f"{path}: a pair potential needs two distinct wires")
            ok = False
        if ok:
            key = frozenset((i, j))
            if key in pair_keys:
                errors.append(f"{path}: second potential for pair ({i}, {j})")
                ok = False
            pair_keys.add(key)
        expr = _parse_expr(p.get("expr"), f"{path}.expr", errors)
        if expr is not None:
            extra = dsl.free_variables(expr) - {i, j} - allowed_const
            for name in sorted(extra):
                errors.append(f"{path}.expr: unbound variable {name!r}")
                ok = False
        if ok and expr is not None:
            pairs.append(PairPotentialSpec(i, j, expr, p["expr"]))

    fields: list[OneBodyFieldSpec] = []
    raw_fields = raw.get("one_body", [])
    if not isinstance(raw_fields, list):
        errors.append("one_body: expected an array")
        raw_fields = []
    for n, f in enumerate(raw_fields):
        path = f"one_body[{n}]"
        if not isinstance(f, Mapping):
            errors.append(f"{path}: expected an object")
            continue
        _unknown_keys(f, FIELD_KEYS, path, errors)
        wire = f.get("wire")
        ok = True
        if wire not in seen:
            errors.append(f"{path}.wire: dangling wire reference {wire!r}")
            ok = False
        expr = _parse_expr(f.get("expr"), f"{path}.expr", errors)
        if expr is not None:
            extra = dsl.free_variables(expr) - {wire, dsl.TIME_VARIABLE} - allowed_const
            for name in sorted(extra):
                errors.append(f"{path}.expr: unbound variable {name!r}")
                ok = False
        if ok and expr is not None:
            fields.append(OneBodyFieldSpec(wire, expr, f["expr"]))

    if errors:
        raise ValidationError(errors)
    return ModelSpec(tuple(wires), tuple(pairs), tuple(fields), constants, float(scale))


# ---------------------------------------------------------------- builtins

_ALIASES = {"ω": "omega", "κ": "kappa", "λ": "scale", "m": "mass", "L": "length"}

BUILTINS = {
    # name: (required params, optional params with defaults)
    "box": (("N",), {"mass": 1.0, "length": 1.0, "scale": 1.0}),
    "harmonic": (("N", "omega"), {"mass": 1.0, "length": 1.0, "scale": 1.0}),
    "coupled_harmonic": (
        ("N", "omega", "kappa"),
        {"mass": 1.0, "length": 1.0, "scale": 1.0},
    ),
    "double_well_chain": (
        ("M", "N"),
        {"barrier": 20.0, "width": 0.2, "kappa": 50.0, "mass": 1.0, "length": 1.0,
         "scale": 1.0},
    ),
}


def builtin(name: str, params: Mapping[str, Any] | None = None) -> ModelSpec:
    """Reference problems with known spectra, used as oracles and demos.

    ``box``: free particle between hard walls. ``harmonic``: one wire with
    ``0.5*m*omega^2*(x - L/2)^2``. ``coupled_harmonic``: two harmonic wires
    joined by ``0.5*kappa*(x1 - x2)^2``. ``double_well_chain``: ``M`` quartic
    double wells ``barrier*(((x - L/2)/width)^2 - 1)^2`` with
    nearest-neighbour quadratic coupling.

    For L = 1 keep ``omega >= 40`` so the oscillator states fit inside
    the walls.
    """
    if name not in BUILTINS:
        raise IsosimError(f"unknown builtin model {name!r}; choose from {sorted(BUILTINS)}")
    required, optional = BUILTINS[name]
    given = {_ALIASES.get(k, k): v for k, v in (params or {}).items()}
    missing = [k for k in required if k not in given]
    if missing:
        raise IsosimError(f"builtin {name!r} is missing parameter(s) {missing}")
    unknown = set(given) - set(required) - set(optional)
    if unknown:
        raise IsosimError(f"builtin {name!r} does not take {sorted(unknown)}")
    p = {**optional, **given}

    count = int(p["M"]) if name == "double_well_chain" else (2 if name == "coupled_harmonic" else 1)
    wires = [
        {"name": f"x{k + 1}", "mass": p["mass"], "length": p["length"], "sites": int(p["N"])}
        for k in range(count)
    ]
    constants: dict[str, float] = {}
    pairs: list[dict] = []
    fields: list[dict] = []
    if name in ("harmonic", "coupled_harmonic"):
        constants = {"omega": p["omega"], "mass": p["mass"], "center": p["length"] / 2}
        fields = [
            {"wire": w["name"], "expr": f"0.5*mass*omega^2*({w['name']} - center)^2"}
            for w in wires
        ]
    if name == "coupled_harmonic":
        constants["kappa"] = p["kappa"]
        pairs = [{"i": "x1", "j": "x2", "expr": "0.5*kappa*(x1 - x2)^2"}]
    if name == "double_well_chain":
        constants = {
            "barrier": p["barrier"], "width": p["width"], "kappa": p["kappa"],
            "center": p["length"] / 2,
        }
        fields = [
            {"wire": w["name"],
             "expr": f"barrier*((({w['name']} - center)/width)^2 - 1)^2"}
            for w in wires
        ]
        pairs = [
            {"i": a["name"], "j": b["name"], "expr": f"0.5*kappa*({a['name']} - {b['name']})^2"}
            for a, b in zip(wires, wires[1:])
        ]
    return validate({
        "wires": wires,
        "pair_potentials": pairs,
        "one_body": fields,
        "constants": constants,
        "scale": p["scale"],
    })
