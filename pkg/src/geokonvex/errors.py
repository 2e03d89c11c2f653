"""Error taxonomy shared by the library, CLI and service.

ValidationError: the inputs are ill-formed or geometrically incompatible
(bad annotation, bad parameters).  SolverError: the inputs were accepted but
the numerical pipeline could not produce a result (blocked seed, unreachable
target, stalled backtracking, non-convergent linear solve).  Both carry a
stable machine-readable ``code``.
"""

from __future__ import annotations


class GeokonvexError(Exception):
    code = "error"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ValidationError(GeokonvexError):
    code = "validation"


class SolverError(GeokonvexError):
    code = "solver"


class ConfigurationError(SolverError):
    code = "solver.configuration"
