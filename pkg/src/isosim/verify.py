"""Executable checks that the compiled simulator behaves as an isomorphic
copy of the model: proportional spectra, time-rescaled dynamics, matching
ground states, discretization convergence and polynomial resources."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .compiler import compile_model, resource_report
from .dynamics import (
    BathSpec,
    PropagatorConfig,
    eigen_bath,
    lindblad_relax,
    propagate,
    random_state,
    relax_imaginary,
)
from .errors import IsosimError
from .hamiltonian import assemble, lowest_eigenpairs
from .model import ModelSpec, builtin

CHECKS = ("scaling", "time-scaling", "convergence", "ground", "resources")


@dataclass
class CheckReport:
    name: str
    measured: float
    tolerance: float
    passed: bool
    status: str = ""  # pass | fail | indeterminate | skipped
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = "pass" if self.passed else "fail"

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": self.name,
            "status": self.status,
            "passed": self.passed,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "details": self.details,
        }


@dataclass
class ConvergenceReport:
    problem: str
    sites: list[int]
    spacings: list[float]
    energies: list[float]
    reference: float
    errors: list[float]
    order: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem": self.problem,
            "sites": self.sites,
            "spacings": self.spacings,
            "energies": self.energies,
            "reference": self.reference,
            "errors": self.errors,
            "order": self.order,
        }


def _floats(a) -> list[float]:
    return [float(x) for x in a]


def check_spectrum_scaling(model: ModelSpec, scale: float, k: int = 6,
                           tol: float = 1e-10, seed: int = 42) -> CheckReport:
    """Eigenvalues at energy scale ``scale`` against ``scale`` times the
    unit-scale eigenvalues, compared relatively."""
    if not scale > 0:
        raise IsosimError(f"scale must be positive, got {scale!r}")
    base = assemble(compile_model(model.with_scale(1.0)))
    scaled = assemble(compile_model(model.with_scale(scale)))
    k = min(k, base.dimension)
    e1 = lowest_eigenpairs(base, k, seed=seed).eigenvalues
    el = lowest_eigenpairs(scaled, k, seed=seed).eigenvalues
    target = scale * e1
    rel = np.abs(el - target) / np.maximum(np.abs(target), np.finfo(float).tiny)
    worst = float(rel.max())
    return CheckReport(
        "scaling", worst, tol, worst <= tol,
        details={"scale": scale, "unit": _floats(e1), "scaled": _floats(el),
                 "relative_errors": _floats(rel)},
    )


def check_time_scaling(model: ModelSpec, scale: float, t: float = 1.0,
                       psi0: np.ndarray | None = None, tol: float = 1e-8,
                       cfg: PropagatorConfig | None = None, seed: int = 42) -> CheckReport:
    """Compare ``exp(-i scale*H t/scale) psi`` with ``exp(-i H t) psi``.

    Measured is the norm of the difference; the fidelity is reported too.
    Driven models are rejected, since rescaling time would also rescale
    the drive.
    """
    if model.time_dependent:
        raise IsosimError("time-scaling check needs time-independent fields")
    if not scale > 0:
        raise IsosimError(f"scale must be positive, got {scale!r}")
    cfg = cfg or PropagatorConfig(tol=1e-11)
    H1 = assemble(compile_model(model.with_scale(1.0)))
    Hl = assemble(compile_model(model.with_scale(scale)))
    psi = random_state(H1.dimension, seed) if psi0 is None else np.asarray(psi0, dtype=complex)
    a = propagate(H1, psi, t, cfg)
    b = propagate(Hl, psi, t / scale, cfg)
    diff = float(np.linalg.norm(a - b))
    fidelity = float(abs(np.vdot(b, a)))
    return CheckReport(
        "time-scaling", diff, tol, diff <= tol,
        details={"scale": scale, "t": t, "fidelity": fidelity, "dimension": H1.dimension},
    )


def _fit_order(spacings, errors) -> float:
    slope, _ = np.polyfit(np.log(spacings), np.log(errors), 1)
    return float(slope)


def convergence_study(problem: str = "box", sites: Sequence[int] = (8, 16, 32, 64),
                      params: dict | None = None) -> ConvergenceReport:
    """Ground-energy error against the continuum value for increasing N.

    ``box`` compares with pi^2/(2 m L^2), ``harmonic`` with omega/2. The
    latter holds only while the oscillator is narrow compared with the
    wire; the default omega = 100 keeps the wall shift near exp(-25).
    """
    sites = [int(n) for n in sites]
    if any(b <= a for a, b in zip(sites, sites[1:])):
        raise IsosimError("site counts must be strictly increasing")
    params = dict(params or {})
    energies, spacings = [], []
    for n in sites:
        if problem == "box":
            m = builtin("box", {**params, "N": n})
        elif problem == "harmonic":
            m = builtin("harmonic", {"omega": 100.0, **params, "N": n})
        else:
            raise IsosimError(f"no continuum reference for problem {problem!r}")
        layout = compile_model(m)
        energies.append(float(lowest_eigenpairs(assemble(layout), 1).eigenvalues[0]) / m.scale)
        spacings.append(layout.grids[0].spacing)
    w = m.wires[0]
    if problem == "box":
        reference = math.pi**2 / (2 * w.mass * w.length**2)
    else:
        reference = 0.5 * m.constants["omega"]
    errors = [abs(e - reference) for e in energies]
    if min(errors) <= 0:
        raise IsosimError("zero discretization error; cannot fit an order")
    return ConvergenceReport(problem, sites, spacings, energies, reference, errors,
                             _fit_order(spacings, errors))


def check_convergence(problem: str = "box", sites: Sequence[int] = (8, 16, 32, 64),
                      window: tuple[float, float] = (1.8, 2.2)) -> CheckReport:
    rep = convergence_study(problem, sites)
    ok = window[0] <= rep.order <= window[1]
    return CheckReport(
        "convergence", rep.order, (window[1] - window[0]) / 2, ok,
        details={**rep.to_dict(), "window": list(window)},
    )


def check_ground_state_correspondence(model: ModelSpec, seed: int = 42,
                                      energy_tol: float = 1e-8,
                                      population_floor: float = 0.999) -> CheckReport:
    """Eigensolver, imaginary-time relaxation and zero-temperature
    Lindblad relaxation must all land on the same ground state.

    The Lindblad leg runs only for dimension <= 128 and starts from a
    random mixed state restricted to the levels the bath connects to the
    ground state. If the ground state is isolated the check is
    indeterminate.
    """
    layout = compile_model(model)
    H = assemble(layout)
    spec = lowest_eigenpairs(H, 1, seed=seed)
    e0 = float(spec.eigenvalues[0])
    relax = relax_imaginary(layout, None, tol=energy_tol * 1e-2, seed=seed)
    imag_err = abs(relax.energy - e0)
    trace = np.array(relax.energies)
    monotone = bool(np.all(np.diff(trace) <= 1e-10 * max(1.0, abs(e0))))
    details: dict[str, Any] = {
        "ground_energy": e0,
        "imaginary_energy": relax.energy,
        "imaginary_error": imag_err,
        "imaginary_steps": relax.steps,
        "monotone": monotone,
    }
    ok = imag_err <= energy_tol and monotone
    status = None
    measured = imag_err

    if H.dimension <= 128:
        bath = BathSpec(0.0, 1.0)
        eb = eigen_bath(H, layout, bath)
        reach = eb.reachable(0)
        details["reachable_levels"] = int(reach.sum())
        if reach.sum() == 1 and H.dimension > 1:
            details["warning"] = "ground state is not coupled to any other level by the bath"
            status = "indeterminate"
        else:
            rng = np.random.default_rng(seed)
            G = rng.standard_normal((H.dimension,) * 2) + 1j * rng.standard_normal((H.dimension,) * 2)
            r = G @ G.conj().T
            r[~reach, :] = 0
            r[:, ~reach] = 0
            r /= np.trace(r).real
            res = lindblad_relax(layout, eb.from_eigenbasis(r), bath)
            pop = res.ground_population[-1]
            details["lindblad_ground_population"] = pop
            if res.warning:
                details["warning"] = res.warning
            ok = ok and pop >= population_floor
    else:
        details["lindblad"] = "skipped: dimension above 128"

    if status is None:
        status = "pass" if ok else "fail"
    return CheckReport("ground", measured, energy_tol, status == "pass", status, details)


def check_resource_bound(model: ModelSpec) -> CheckReport:
    rep = resource_report(compile_model(model))
    conn_ratio = rep.connections_used / rep.connections_bound if rep.connections_bound else 0.0
    field_ratio = rep.fields_used / rep.fields_bound
    return CheckReport(
        "resources", max(conn_ratio, field_ratio), 1.0, rep.within_bounds,
        details={**rep.to_dict(), "connections_ratio": conn_ratio, "fields_ratio": field_ratio},
    )


def run_checks(model: ModelSpec, checks: Sequence[str] = CHECKS, scale: float = 2.0,
               k: int = 6, t: float = 1.0, seed: int = 42, problem: str = "box",
               sites: Sequence[int] = (8, 16, 32, 64)) -> list[CheckReport]:
    """Run the selected checks in a fixed order."""
    reports = []
    for name in CHECKS:
        if name not in checks:
            continue
        if name == "scaling":
            reports.append(check_spectrum_scaling(model, scale, k, seed=seed))
        elif name == "time-scaling":
            if model.time_dependent:
                reports.append(CheckReport(
                    "time-scaling", float("nan"), 1e-8, False, "skipped",
                    {"reason": "driven model: the drive would need rescaling too"},
                ))
            else:
                reports.append(check_time_scaling(model, scale, t, seed=seed))
        elif name == "convergence":
            reports.append(check_convergence(problem, sites))
        elif name == "ground":
            reports.append(check_ground_state_correspondence(model, seed))
        elif name == "resources":
            reports.append(check_resource_bound(model))
    return reports
