"""Command-line entry point.

Usage::

    isosim compile model.json -o layout.json
    isosim spectrum model.json --num-eigs 6 --json spectrum.json
    isosim evolve model.json --t 1 --dt 0.01 --ground-start --csv traj.csv
    isosim relax model.json --mode lindblad --temperature 5 --json rho.json
    isosim verify builtin:coupled_harmonic:N=8,omega=40,kappa=200 --check all
    isosim resources model.json

A model argument is either a JSON model file or ``builtin:NAME[:k=v,...]``.

Exit codes: 0 ok, 1 I/O, 2 validation, 3 evaluation, 4 numerical
non-convergence, 5 check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .compiler import compile_model, resource_report
from .dynamics import (
    BathSpec,
    PropagatorConfig,
    check_density,
    density_from_state,
    evolve_real,
    lindblad_relax,
    random_state,
    relax_imaginary,
)
from .errors import ConvergenceError, EvaluationError, IsosimError, ValidationError
from .hamiltonian import assemble, lowest_eigenpairs
from .model import ModelSpec, builtin, validate
from .serialize import (
    array_from_dict,
    csv_text,
    density_to_dict,
    dumps,
    layout_to_dict,
    state_to_dict,
)
from .verify import CHECKS, run_checks

EXIT_IO, EXIT_VALIDATION, EXIT_EVALUATION, EXIT_NUMERICAL, EXIT_CHECK = 1, 2, 3, 4, 5

DEFAULTS = {
    "seed": 42,
    "dt": 1e-2,
    "krylov_dim": 24,
    "tol": 1e-9,
    "gamma0": 1.0,
    "temperature": 0.0,
    "dtau": 0.1,
    "relax_tol": 1e-10,
    "relax_max_steps": 100000,
    "eigen_tol": 1e-10,
    "num_eigs": 6,
    "verify_scale": 2.0,
    "verify_t": 1.0,
    "convergence_sites": [8, 16, 32, 64],
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ISOSIM_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"ISOSIM_SEED must be an integer, got {env!r}", EXIT_VALIDATION)
    return DEFAULTS["seed"]


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise CliError(f"parameter value {text!r} is not a number", EXIT_VALIDATION)


def load_model(ref: str) -> ModelSpec:
    if ref.startswith("builtin:"):
        _, _, rest = ref.partition(":")
        name, _, plist = rest.partition(":")
        params = {}
        for item in filter(None, plist.split(",")):
            key, eq, value = item.partition("=")
            if not eq:
                raise CliError(f"builtin parameter {item!r} must look like key=value", EXIT_VALIDATION)
            params[key.strip()] = _parse_value(value.strip())
        return builtin(name, params)
    try:
        text = Path(ref).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read model file {ref}: {exc.strerror or exc}", EXIT_IO)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{ref}: invalid JSON ({exc})", EXIT_VALIDATION)
    return validate(raw)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_IO)


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})", EXIT_VALIDATION)


def _cfg(args) -> PropagatorConfig:
    return PropagatorConfig(dt=args.dt, krylov_dim=args.krylov_dim, tol=args.tol)


# ------------------------------------------------------------------ commands

def cmd_compile(args) -> int:
    layout = compile_model(load_model(args.model))
    text = dumps(layout_to_dict(layout))
    if args.output:
        _write(args.output, text)
        rep = resource_report(layout)
        print(f"wrote {args.output}: M={rep.M} N={rep.N} "
              f"connections {rep.connections_used}/{rep.connections_bound} "
              f"fields {rep.fields_used}/{rep.fields_bound} dim={rep.hilbert_dim}")
    else:
        _write(None, text)
    return 0


def cmd_spectrum(args) -> int:
    layout = compile_model(load_model(args.model))
    H = assemble(layout)
    res = lowest_eigenpairs(H, args.num_eigs, tol=args.eigen_tol, method=args.method,
                            seed=_seed(args))
    doc = res.to_dict(H)
    doc["seed"] = _seed(args)
    if args.json:
        _write(args.json, dumps(doc))
    if args.json != "-":
        for n, (e, r) in enumerate(zip(res.eigenvalues, res.residuals)):
            print(f"{n:4d}  {float(e)!r:>24}  residual {r:.2e}")
    return 0


def cmd_evolve(args) -> int:
    layout = compile_model(load_model(args.model))
    if args.state:
        psi = array_from_dict(_read_json(args.state))
    elif args.ground_start:
        psi = lowest_eigenpairs(assemble(layout), 1, seed=_seed(args)).eigenvectors[:, 0]
    else:
        psi = random_state(layout.dimension, _seed(args))
    psi = np.asarray(psi, dtype=complex)
    rec, final = evolve_real(layout, psi, args.t, _cfg(args), sample_every=args.sample_every)
    observables = tuple(o.strip() for o in args.observables.split(",") if o.strip())
    bad = set(observables) - {"mean", "var"}
    if bad:
        raise CliError(f"unknown observables {sorted(bad)}; use mean,var", EXIT_VALIDATION)
    table = csv_text(rec.columns(observables), rec.rows(observables))
    _write(args.csv, table)
    if args.json:
        _write(args.json, dumps(state_to_dict(final, layout.radices)))
    return 0


def cmd_relax(args) -> int:
    layout = compile_model(load_model(args.model))
    seed = _seed(args)
    if args.mode == "imaginary":
        psi0 = array_from_dict(_read_json(args.state)) if args.state else None
        res = relax_imaginary(layout, psi0, dtau=args.dtau, tol=args.relax_tol,
                              max_steps=args.max_steps, cfg=_cfg(args), seed=seed)
        rows = ([float(n), e] for n, e in enumerate(res.energies))
        if args.csv:
            _write(args.csv, csv_text(["step", "energy"], rows))
        if args.json:
            _write(args.json, dumps(state_to_dict(res.state, layout.radices)))
        print(f"ground energy {float(res.energy)!r} after {res.steps} steps")
        return 0

    if args.state:
        arr = array_from_dict(_read_json(args.state))
        rho0 = density_from_state(arr) if arr.ndim == 1 else arr
    else:
        rng = np.random.default_rng(seed)
        D = layout.dimension
        G = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
        rho0 = G @ G.conj().T
        rho0 /= np.trace(rho0).real
    rho0 = check_density(rho0, layout.dimension)
    bath = BathSpec(args.temperature, args.gamma0)
    res = lindblad_relax(layout, rho0, bath, t_final=args.t, dt=args.dt_bath,
                         sample_every=args.sample_every)
    if res.warning:
        print(f"warning: {res.warning}", file=sys.stderr)
    if args.csv:
        rows = zip(res.times, res.energies, res.ground_population)
        _write(args.csv, csv_text(["time", "energy", "ground_population"], rows))
    if args.json:
        _write(args.json, dumps(density_to_dict(res.rho, layout.radices)))
    print(f"final energy {float(res.energies[-1])!r}, ground population {float(res.ground_population[-1])!r}")
    return 0


def cmd_verify(args) -> int:
    model = load_model(args.model)
    checks = set(args.check or ["all"])
    if "all" in checks:
        checks = set(CHECKS)
    sites = [int(s) for s in args.sites.split(",")]
    reports = run_checks(model, checks, scale=args.scale, k=args.num_eigs, t=args.t,
                         seed=_seed(args), problem=args.problem, sites=sites)
    if args.json:
        _write(args.json, dumps([r.to_dict() for r in reports]))
    if args.json != "-":
        print(f"{'check':<14}{'status':<15}{'measured':>14}{'tolerance':>12}")
        for r in reports:
            print(f"{r.name:<14}{r.status:<15}{r.measured:>14.3e}{r.tolerance:>12.1e}")
    failed = [r for r in reports if r.status not in ("pass", "skipped")]
    return EXIT_CHECK if failed else 0


def cmd_resources(args) -> int:
    rep = resource_report(compile_model(load_model(args.model)))
    if args.json:
        _write(args.json, dumps(rep.to_dict()))
    if args.json != "-":
        print(f"wires M={rep.M}, sites N={rep.N}, hilbert dimension {rep.hilbert_dim}")
        print(f"connections {rep.connections_used} <= {rep.connections_bound}")
        print(f"fields      {rep.fields_used} <= {rep.fields_bound}")
    return 0 if rep.within_bounds else EXIT_CHECK


def cmd_builtin(args) -> int:
    params = {}
    for item in args.params:
        key, eq, value = item.partition("=")
        if not eq:
            raise CliError(f"parameter {item!r} must look like key=value", EXIT_VALIDATION)
        params[key] = _parse_value(value)
    _write(args.output, dumps(builtin(args.name, params).to_dict()))
    return 0


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isosim", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"isosim {__version__}")
    p.add_argument("--show-config", action="store_true", help="print defaults and exit")
    p.add_argument("--seed", type=int, default=None,
                   help="random seed (default: $ISOSIM_SEED or 42)")
    sub = p.add_subparsers(dest="command")

    def model_cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("model", help="model JSON file or builtin:NAME[:k=v,...]")
        sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        return sp

    def propagation(sp):
        sp.add_argument("--dt", type=float, default=DEFAULTS["dt"])
        sp.add_argument("--krylov-dim", type=int, default=DEFAULTS["krylov_dim"])
        sp.add_argument("--tol", type=float, default=DEFAULTS["tol"])

    sp = model_cmd("compile", "discretize a model and write the layout")
    sp.add_argument("-o", "--output", help="layout JSON path (default: stdout)")
    sp.set_defaults(func=cmd_compile)

    sp = model_cmd("spectrum", "lowest eigenvalues of the simulator")
    sp.add_argument("-k", "--num-eigs", type=int, default=DEFAULTS["num_eigs"])
    sp.add_argument("--eigen-tol", type=float, default=DEFAULTS["eigen_tol"])
    sp.add_argument("--method", choices=["auto", "dense", "lanczos"], default="auto")
    sp.add_argument("--json", help="write the spectrum JSON here ('-' for stdout)")
    sp.set_defaults(func=cmd_spectrum)

    sp = model_cmd("evolve", "real-time evolution, trajectory to CSV")
    sp.add_argument("--t", type=float, required=True, help="final time")
    propagation(sp)
    start = sp.add_mutually_exclusive_group()
    start.add_argument("--state", help="initial state JSON")
    start.add_argument("--ground-start", action="store_true")
    sp.add_argument("--observables", default="mean,var")
    sp.add_argument("--sample-every", type=int, default=1)
    sp.add_argument("--csv", help="trajectory CSV path (default: stdout)")
    sp.add_argument("--json", help="final state JSON path")
    sp.set_defaults(func=cmd_evolve)

    sp = model_cmd("relax", "relax to the ground or thermal state")
    sp.add_argument("--mode", choices=["imaginary", "lindblad"], default="imaginary")
    sp.add_argument("--temperature", type=float, default=DEFAULTS["temperature"])
    sp.add_argument("--gamma0", type=float, default=DEFAULTS["gamma0"])
    sp.add_argument("--t", type=float, default=None, help="Lindblad final time (default: automatic)")
    sp.add_argument("--dt-bath", type=float, default=None, help="Lindblad RK4 step (default: automatic)")
    sp.add_argument("--dtau", type=float, default=DEFAULTS["dtau"])
    sp.add_argument("--relax-tol", type=float, default=DEFAULTS["relax_tol"])
    sp.add_argument("--max-steps", type=int, default=DEFAULTS["relax_max_steps"],
                    help="imaginary-time step limit")
    sp.add_argument("--sample-every", type=int, default=100)
    propagation(sp)
    sp.add_argument("--state", help="initial state or density matrix JSON")
    sp.add_argument("--csv", help="energy trace CSV path")
    sp.add_argument("--json", help="final state / density matrix JSON path")
    sp.set_defaults(func=cmd_relax)

    sp = model_cmd("verify", "run isomorphism checks")
    sp.add_argument("--check", action="append", choices=list(CHECKS) + ["all"])
    sp.add_argument("--scale", type=float, default=DEFAULTS["verify_scale"])
    sp.add_argument("-k", "--num-eigs", type=int, default=DEFAULTS["num_eigs"])
    sp.add_argument("--t", type=float, default=DEFAULTS["verify_t"])
    sp.add_argument("--problem", choices=["box", "harmonic"], default="box")
    sp.add_argument("--sites", default=",".join(map(str, DEFAULTS["convergence_sites"])))
    sp.add_argument("--json", help="write the report array here ('-' for stdout)")
    sp.set_defaults(func=cmd_verify)

    sp = model_cmd("resources", "connection and field counts against their bounds")
    sp.add_argument("--json", help="write the report here ('-' for stdout)")
    sp.set_defaults(func=cmd_resources)

    sp = sub.add_parser("builtin", help="write a reference model file")
    sp.add_argument("name")
    sp.add_argument("params", nargs="*", help="key=value")
    sp.add_argument("-o", "--output", help="model JSON path (default: stdout)")
    sp.set_defaults(func=cmd_builtin)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.show_config:
        sys.stdout.write(dumps(DEFAULTS))
        return 0
    if args.command is None:
        parser.print_help()
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ValidationError as exc:
        print("error: invalid model", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except EvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVALUATION
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except IsosimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
