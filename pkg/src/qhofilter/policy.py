"""Numeric tolerances shared by all modules."""

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class NumericPolicy:
    eig_tol: float = 1e-12
    psd_tol: float = 1e-10
    hamiltonian_tol: float = 1e-10
    singular_tol: float = 1e-12
    defect_cond: float = 1e10
    resonance_tol: float = 1e-9
    quad_tol: float = 1e-9
    max_moment_terms: int = 10**6

    def updated(self, **overrides):
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **overrides)


DEFAULT_POLICY = NumericPolicy()
