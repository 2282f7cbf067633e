import math

import numpy as np
import pytest

from isosim import builtin, compile_model, validate

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def box_levels(N, n, mass=1.0, length=1.0):
    """Closed-form eigenvalues of the Dirichlet second-difference operator."""
    d = length / (N + 1)
    return np.array([(1 - math.cos(k * math.pi * d / length)) / (mass * d * d) for k in n])


def small_model(sites, seed):
    """Random-ish multi-wire model with couplings and fields."""
    rng = np.random.default_rng(seed)
    wires = [
        {"name": f"x{k + 1}", "sites": n, "mass": float(rng.uniform(0.5, 2)),
         "length": float(rng.uniform(0.5, 2))}
        for k, n in enumerate(sites)
    ]
    pairs = [
        {"i": f"x{a + 1}", "j": f"x{b + 1}", "expr": f"{rng.uniform(-5, 5):.3f}*x{a + 1}*x{b + 1}"}
        for a in range(len(sites)) for b in range(a + 1, len(sites))
    ]
    fields = [
        {"wire": w["name"], "expr": f"{rng.uniform(0, 30):.3f}*({w['name']} - 0.4)^2"} for w in wires
    ]
    return validate({"wires": wires, "pair_potentials": pairs, "one_body": fields})


@pytest.fixture
def box16():
    return compile_model(builtin("box", {"N": 16}))


@pytest.fixture
def coupled8():
    return compile_model(builtin("coupled_harmonic", {"omega": 40, "kappa": 200, "N": 8}))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
