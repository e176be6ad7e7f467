"""Back-action constraint and the multiplier that saturates it.

Minimizing ``error + lam * backaction`` over observers is the Lagrangian
relaxation of minimizing the error subject to ``backaction <= r``.  The
driver below searches ``lam`` on a log grid, then bisects in ``log lam``,
re-running the optimizer warm-started from the neighbouring solution.
"""

import math
from dataclasses import dataclass
from typing import Optional

from ..errors import NoBracket
from .optimize import initial_observer, optimize

DEFAULT_GRID = tuple(10.0 ** k for k in range(-6, 7))


@dataclass(frozen=True)
class LagrangianCheck:
    lam: float
    constraint_value: float
    threshold: float

    @property
    def gap(self):
        """Signed ``constraint - r``; positive means the constraint is violated."""
        return self.constraint_value - self.threshold

    @property
    def relative_gap(self):
        return abs(self.gap) / self.threshold

    def saturated(self, rtol=1e-4):
        return self.relative_gap <= rtol


def lagrangian_check(result, r):
    """Constraint value of a synthesis result against the threshold ``r``."""
    if not r > 0:
        raise ValueError(f"threshold must be positive, got {r}")
    return LagrangianCheck(result.cost.lam, result.cost.constraint_value, float(r))


@dataclass(frozen=True)
class MultiplierSolution:
    """Outcome of :func:`solve_multiplier`.

    ``status`` is ``"inactive"`` (the constraint holds even with the
    smallest grid weight, so ``lam`` is reported as 0), ``"grid"`` or
    ``"bisection"``.  ``scan`` lists every ``(lam, constraint)`` evaluated,
    in evaluation order.
    """

    lam: float
    constraint_value: float
    threshold: float
    status: str
    scan: tuple
    result: Optional[object] = None

    @property
    def check(self):
        return LagrangianCheck(self.lam, self.constraint_value, self.threshold)


def _run(plant, cost, lam, init, options):
    return optimize(plant, cost.with_lam(lam), init, options)


def solve_multiplier(plant, cost, template, r, options=None, grid=DEFAULT_GRID,
                     rtol=1e-4, max_bisect=80, seed=0, start=None):
    """Find ``lam`` with ``|constraint(lam) - r| <= rtol * r``.

    Raises
    ------
    NoBracket
        If the scanned constraint values are not nonincreasing in ``lam``,
        or never drop to ``r``; ``exc.scan`` holds the evaluated pairs.
    """
    if not r > 0:
        raise ValueError(f"threshold must be positive, got {r}")
    grid = sorted(float(x) for x in grid)
    init = start if start is not None else initial_observer(plant, template, seed)
    scan = []

    def record(lam, res):
        c = res.cost.constraint_value
        scan.append((lam, c))
        return c

    res = _run(plant, cost, grid[0], init, options)
    c = record(grid[0], res)
    if c <= r:
        return MultiplierSolution(0.0, c, float(r), "inactive", tuple(scan), res)

    prev_lam, prev_c, prev_res = grid[0], c, res
    for lam in grid[1:]:
        res = _run(plant, cost, lam, prev_res.observer, options)
        c = record(lam, res)
        if abs(c - r) <= rtol * r:
            return MultiplierSolution(lam, c, float(r), "grid", tuple(scan), res)
        if c > prev_c * (1.0 + 1e-9) + 1e-300:
            raise NoBracket(
                f"constraint increased from {prev_c:.6g} to {c:.6g} "
                f"between lam={prev_lam:g} and lam={lam:g}", scan=tuple(scan))
        if c < r:
            return _bisect(plant, cost, r, options, rtol, max_bisect, scan,
                           (prev_lam, prev_c, prev_res), (lam, c, res))
        prev_lam, prev_c, prev_res = lam, c, res
    raise NoBracket(
        f"constraint {prev_c:.6g} still above r={r:.6g} at lam={prev_lam:g}",
        scan=tuple(scan))


def _bisect(plant, cost, r, options, rtol, max_bisect, scan, lo, hi):
    # lo has constraint above r, hi below; the warm start comes from lo.
    for _ in range(max_bisect):
        lam = math.sqrt(lo[0] * hi[0])
        res = _run(plant, cost, lam, lo[2].observer, options)
        c = res.cost.constraint_value
        scan.append((lam, c))
        if abs(c - r) <= rtol * r:
            return MultiplierSolution(lam, c, float(r), "bisection", tuple(scan), res)
        if not hi[1] <= c <= lo[1]:
            raise NoBracket(
                f"constraint {c:.6g} at lam={lam:g} leaves the bracket "
                f"[{hi[1]:.6g}, {lo[1]:.6g}]", scan=tuple(scan))
        if c > r:
            lo = (lam, c, res)
        else:
            hi = (lam, c, res)
    raise NoBracket(f"bisection did not reach rtol={rtol:g} in {max_bisect} steps",
                    scan=tuple(scan))


__all__ = ["LagrangianCheck", "MultiplierSolution", "DEFAULT_GRID",
           "lagrangian_check", "solve_multiplier"]
