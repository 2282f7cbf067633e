"""Compile continuous-variable many-body Hamiltonians onto discretized
wires and check that the result is the same Hamiltonian up to an energy
scale."""

from .compiler import compile_model, resource_report
from .dsl import evaluate, free_variables, parse, tokenize
from .hamiltonian import assemble, apply, dense_matrix, expectation, lowest_eigenpairs
from .model import ModelSpec, builtin, validate

__all__ = [
    "apply",
    "assemble",
    "builtin",
    "compile_model",
    "dense_matrix",
    "evaluate",
    "expectation",
    "free_variables",
    "lowest_eigenpairs",
    "ModelSpec",
    "parse",
    "resource_report",
    "tokenize",
    "validate",
]
__version__ = "0.1.0"
