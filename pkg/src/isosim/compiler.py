"""Discretize a model onto wires: grids, coupling tables, fields, stencils.

Each wire of length L carries N interior nodes ``x_k = k*L/(N+1)``,
k = 1..N, with hard walls at 0 and L. Grid node numbers in error messages
are 1-based to match ``x_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import dsl
from .errors import EvaluationError, TabulationError
from .model import ModelSpec, OneBodyFieldSpec, PairPotentialSpec, WireSpec


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    wire: str
    spacing: float
    positions: np.ndarray

    @property
    def sites(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class CouplingTable:
    wire_i: str
    wire_j: str
    values: np.ndarray  # shape (N_i, N_j); entry (a, b) = h(x_a, x_b)

    @property
    def connections(self) -> int:
        return int(np.count_nonzero(self.values))


@dataclass(frozen=True)
class FieldTable:
    """All external fields acting on one wire, kept symbolic in time."""

    wire: str
    expr: dsl.Expr
    grid: Grid
    constants: tuple[tuple[str, float], ...] = ()

    @property
    def time_dependent(self) -> bool:
        return dsl.TIME_VARIABLE in dsl.free_variables(self.expr)

    def sample(self, t: float) -> np.ndarray:
        return _sample_field(self.expr, self.wire, self.grid, t, dict(self.constants))


@dataclass(frozen=True)
class KineticStencil:
    wire: str
    hop: float
    onsite: float
    boundary: str = "dirichlet"


@dataclass(frozen=True)
class ResourceReport:
    M: int
    N: int
    connections_used: int
    connections_bound: int
    fields_used: int
    fields_bound: int
    hilbert_dim: int

    @property
    def within_bounds(self) -> bool:
        return (self.connections_used <= self.connections_bound
                and self.fields_used <= self.fields_bound)

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "N": self.N,
            "connections_used": self.connections_used,
            "connections_bound": self.connections_bound,
            "fields_used": self.fields_used,
            "fields_bound": self.fields_bound,
            "hilbert_dim": self.hilbert_dim,
        }


@dataclass(frozen=True)
class SimulatorLayout:
    wires: tuple[WireSpec, ...]
    grids: tuple[Grid, ...]
    stencils: tuple[KineticStencil, ...]
    couplings: tuple[CouplingTable, ...]
    fields: tuple[FieldTable, ...]
    scale: float

    @property
    def radices(self) -> tuple[int, ...]:
        return tuple(g.sites for g in self.grids)

    @property
    def dimension(self) -> int:
        return math.prod(self.radices)

    @property
    def time_dependent(self) -> bool:
        return any(f.time_dependent for f in self.fields)

    def wire_index(self, name: str) -> int:
        for k, g in enumerate(self.grids):
            if g.wire == name:
                return k
        raise KeyError(name)


def make_grid(w: WireSpec) -> Grid:
    spacing = w.length / (w.sites + 1)
    positions = np.arange(1, w.sites + 1, dtype=float) * spacing
    return Grid(w.name, spacing, _frozen(positions))


def make_stencil(w: WireSpec, g: Grid) -> KineticStencil:
    hop = -1.0 / (2.0 * w.mass * g.spacing**2)
    return KineticStencil(w.name, hop, -2.0 * hop)


def tabulate_pair(
    p: PairPotentialSpec, gi: Grid, gj: Grid, constants: dict[str, float] | None = None
) -> CouplingTable:
    """Sample ``h(x_i, x_j)`` at every pair of grid nodes: the N_i*N_j
    connections between two wires."""
    bindings = dict(constants or {})
    values = np.empty((gi.sites, gj.sites))
    for a, xa in enumerate(gi.positions):
        bindings[p.wire_i] = float(xa)
        for b, xb in enumerate(gj.positions):
            bindings[p.wire_j] = float(xb)
            try:
                values[a, b] = dsl.evaluate(p.expr, bindings)
            except EvaluationError as exc:
                raise TabulationError(exc, f"pair ({p.wire_i}, {p.wire_j})", (a + 1, b + 1)) from None
    return CouplingTable(p.wire_i, p.wire_j, _frozen(values))


def _sample_field(expr, wire, g: Grid, t: float, constants: dict[str, float]) -> np.ndarray:
    bindings = dict(constants)
    bindings[dsl.TIME_VARIABLE] = float(t)
    out = np.empty(g.sites)
    for a, x in enumerate(g.positions):
        bindings[wire] = float(x)
        try:
            out[a] = dsl.evaluate(expr, bindings)
        except EvaluationError as exc:
            raise TabulationError(exc, f"field on {wire} at t={t!r}", a + 1) from None
    return out


def tabulate_field(
    f: OneBodyFieldSpec, g: Grid, t: float, constants: dict[str, float] | None = None
) -> np.ndarray:
    return _sample_field(f.expr, f.wire, g, t, dict(constants or {}))


def compile_model(m: ModelSpec) -> SimulatorLayout:
    """Build the simulator layout for a validated model.

    Several fields on the same wire are summed into a single field table,
    one externally applied field per wire node.
    """
    grids = tuple(make_grid(w) for w in m.wires)
    by_name = {g.wire: g for g in grids}
    stencils = tuple(make_stencil(w, g) for w, g in zip(m.wires, grids))
    constants = dict(m.constants)

    couplings = tuple(
        tabulate_pair(p, by_name[p.wire_i], by_name[p.wire_j], constants) for p in m.pairs
    )

    fields = []
    const_items = tuple(sorted(constants.items()))
    for w in m.wires:
        exprs = [f.expr for f in m.fields if f.wire == w.name]
        if not exprs:
            continue
        expr = reduce(lambda acc, e: dsl.BinOp("+", acc, e), exprs)
        table = FieldTable(w.name, expr, by_name[w.name], const_items)
        table.sample(0.0)  # surface evaluation errors at compile time
        fields.append(table)

    return SimulatorLayout(m.wires, grids, stencils, couplings, tuple(fields), m.scale)


def resource_report(layout: SimulatorLayout) -> ResourceReport:
    M = len(layout.grids)
    N = max(layout.radices)
    return ResourceReport(
        M=M,
        N=N,
        connections_used=sum(c.connections for c in layout.couplings),
        connections_bound=M * (M - 1) * N * N // 2,
        fields_used=sum(f.grid.sites for f in layout.fields),
        fields_bound=M * N,
        hilbert_dim=layout.dimension,
    )
