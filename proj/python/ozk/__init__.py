"""Kernel language interpreter with search, dataflow threads and a Prolog front end."""

from ._core import (
    CompileError,
    DistError,
    PrologError,
    Runtime,
    SyntaxError,
    dist_run,
    run,
    run_prolog,
    translate,
)

__all__ = [
    "CompileError",
    "DistError",
    "PrologError",
    "Runtime",
    "SyntaxError",
    "dist_run",
    "run",
    "run_prolog",
    "translate",
]
