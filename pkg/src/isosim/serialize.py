"""JSON and CSV forms of layouts, spectra, states and reports.

Output is deterministic: floats use Python's shortest round-trip repr and
key order is fixed, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Sequence

import numpy as np

from . import dsl
from .compiler import SimulatorLayout, resource_report
from .errors import IsosimError
from .hamiltonian import BASIS_CONVENTION


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def layout_to_dict(layout: SimulatorLayout) -> dict[str, Any]:
    return {
        "basis": BASIS_CONVENTION,
        "scale": layout.scale,
        "wires": [
            {
                "name": w.name,
                "mass": w.mass,
                "length": w.length,
                "sites": g.sites,
                "spacing": g.spacing,
                "positions": g.positions,
                "stencil": {"hop": s.hop, "onsite": s.onsite, "boundary": s.boundary},
            }
            for w, g, s in zip(layout.wires, layout.grids, layout.stencils)
        ],
        "coupling_tables": [
            {
                "i": c.wire_i,
                "j": c.wire_j,
                "shape": list(c.values.shape),
                "values": c.values.reshape(-1),
            }
            for c in layout.couplings
        ],
        "fields": [
            {
                "wire": f.wire,
                "expr": dsl.to_source(f.expr),
                "time_dependent": f.time_dependent,
                "constants": dict(f.constants),
            }
            for f in layout.fields
        ],
        "resources": resource_report(layout).to_dict(),
    }


def state_to_dict(psi: np.ndarray, radices: Sequence[int]) -> dict[str, Any]:
    psi = np.asarray(psi, dtype=complex)
    return {
        "kind": "state",
        "dimension": len(psi),
        "radices": list(radices),
        "basis": BASIS_CONVENTION,
        "real": psi.real,
        "imag": psi.imag,
    }


def density_to_dict(rho: np.ndarray, radices: Sequence[int]) -> dict[str, Any]:
    rho = np.asarray(rho, dtype=complex)
    return {
        "kind": "density_matrix",
        "dimension": rho.shape[0],
        "radices": list(radices),
        "basis": BASIS_CONVENTION,
        "real": rho.real.reshape(-1),
        "imag": rho.imag.reshape(-1),
    }


def array_from_dict(doc: dict[str, Any]) -> np.ndarray:
    """Inverse of :func:`state_to_dict` / :func:`density_to_dict`."""
    try:
        if doc.get("basis", BASIS_CONVENTION) != BASIS_CONVENTION:
            raise IsosimError(f"unsupported basis convention {doc['basis']!r}")
        D = int(doc["dimension"])
        data = np.asarray(doc["real"], dtype=float) + 1j * np.asarray(doc["imag"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise IsosimError(f"malformed state document: {exc}") from None
    if doc.get("kind") == "density_matrix":
        if data.size != D * D:
            raise IsosimError("density matrix data does not match its dimension")
        return data.reshape(D, D)
    if data.size != D:
        raise IsosimError("state data does not match its dimension")
    return data


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(x)) for x in row])
    return buf.getvalue()
