"""Projected gradient descent over the observer parameters ``(L, M)``.

Only stationary points are sought: the optimality conditions are
first-order and nothing here certifies a global minimum.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..coupled import ObserverSpec, admissibility, assemble, gramians, psd_sqrt
from ..errors import InitNotAdmissible, InvalidSpec, NoDescentDirection
from .conditions import stationarity
from .cost import evaluate_cost, gradients

WORKERS_ENV = "QHOFILTER_MAX_WORKERS"

TRACE_COLUMNS = ("iter", "cost", "grad_L_norm", "grad_M_norm", "step", "margin")


@dataclass(frozen=True)
class OptimizerOptions:
    """Stopping and line-search parameters.

    ``gtol=None`` means ``gtol_rel * (1 + |cost|)``, re-evaluated at every
    iterate; ``margin_floor=None`` means ``1e-3 / tau``.
    """

    gtol: Optional[float] = None
    gtol_rel: float = 1e-7
    max_iter: int = 5000
    margin_floor: Optional[float] = None
    armijo: float = 1e-4
    contraction: float = 0.5
    min_step: float = 1e-20
    initial_step: float = 1.0
    max_step: float = 1e6

    def gradient_tolerance(self, cost):
        if self.gtol is not None:
            return self.gtol
        return self.gtol_rel * (1.0 + abs(cost))

    def floor(self, tau):
        return 1e-3 / tau if self.margin_floor is None else self.margin_floor


@dataclass(frozen=True)
class TraceRow:
    iter: int
    cost: float
    grad_L_norm: float
    grad_M_norm: float
    step: float
    margin: float

    def as_tuple(self):
        return tuple(getattr(self, c) for c in TRACE_COLUMNS)


@dataclass(frozen=True)
class SynthesisResult:
    observer: ObserverSpec
    cost: object
    gradient: object
    report: object
    trace: tuple
    status: str
    seed: Optional[int] = None
    initial_cost: float = math.nan
    system: object = field(default=None, repr=False)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def iterations(self):
        return len(self.trace) - 1

    @property
    def monotone(self):
        costs = [row.cost for row in self.trace]
        return all(b <= a for a, b in zip(costs, costs[1:]))


def initial_observer(plant, template, seed=0, scale=0.1):
    """Member of the ``L = sqrt(K) Lambda sqrt(M)`` family with ``M = I``.

    ``Lambda`` is ``scale`` times a seeded matrix with all singular values
    equal to one, so ``||Lambda|| = scale <= 1`` and the composite energy
    matrix is positive semidefinite; such an observer is admissible for
    every horizon.
    """
    n, nu = plant.n, template.nu
    rng = np.random.default_rng(seed)
    u, _, vt = np.linalg.svd(rng.standard_normal((n, nu)), full_matrices=False)
    lam_mat = scale * (u @ vt)
    m_energy = np.eye(nu)
    coupling = psd_sqrt(plant.k_energy) @ lam_mat @ psd_sqrt(m_energy)
    return template.with_parameters(coupling, m_energy)


class _Point:
    __slots__ = ("system", "pair", "cost", "grad", "margin")

    def __init__(self, system, pair, margin):
        self.system = system
        self.pair = pair
        self.margin = margin
        self.cost = evaluate_cost(system, pair)
        self.grad = gradients(system, pair)


def _result(point, trace, status, seed, initial_cost):
    return SynthesisResult(
        observer=point.system.observer,
        cost=point.cost,
        gradient=point.grad,
        report=stationarity(point.system, point.pair),
        trace=tuple(trace),
        status=status,
        seed=seed,
        initial_cost=initial_cost,
        system=point.system,
    )


def optimize(plant, cost, init, options=None, seed=None, callback=None):
    """Descend the discounted cost from ``init`` to a stationary point.

    Each iteration takes ``x <- x - s grad`` with ``M`` re-symmetrized.
    The trial ``s`` is a Barzilai-Borwein estimate (long and short forms
    alternating), halved until the Armijo condition holds and the
    admissibility margin stays above the floor.  The recorded cost
    therefore never increases.

    Returns
    -------
    SynthesisResult
        ``status`` is ``"converged"`` or ``"iteration_cap"`` (best iterate).

    Raises
    ------
    InitNotAdmissible
        If ``init`` violates the horizon bound.
    NoDescentDirection
        If backtracking reaches ``min_step``; ``exc.result`` holds the
        last iterate.
    """
    options = OptimizerOptions() if options is None else options
    if not plant.k_is_psd():
        raise InvalidSpec("synthesis requires a positive semidefinite plant energy matrix",
                          "plant.k_energy")
    system = assemble(plant, init, cost)
    adm = admissibility(system)
    if not adm.ok:
        raise InitNotAdmissible(
            f"initial observer is not {cost.tau:g}-admissible (bound {adm.bound:.6g})",
            bound=adm.bound)
    floor = options.floor(cost.tau)
    point = _Point(system, gramians(system), adm.margin)
    initial_cost = point.cost.total
    trace = [TraceRow(0, point.cost.total, *point.grad.norms, 0.0, point.margin)]
    prev_step = None
    prev_x = prev_g = None

    for it in range(1, options.max_iter + 2):
        if point.grad.max_norm <= options.gradient_tolerance(point.cost.total):
            return _result(point, trace, "converged", seed, initial_cost)
        if it > options.max_iter:
            return _result(point, trace, "iteration_cap", seed, initial_cost)

        L, M = point.system.L, point.system.M
        dL, dM = point.grad.dL, point.grad.dM
        x = np.concatenate([L.ravel(), M.ravel()])
        g = np.concatenate([dL.ravel(), dM.ravel()])
        slope = float(g @ g)
        step = options.initial_step / max(1.0, math.sqrt(slope))
        if prev_x is not None:
            sx, sg = x - prev_x, g - prev_g
            curv = float(sx @ sg)
            if curv > 0:
                # Alternating the long and short BB steps avoids the zigzag
                # either one shows alone in the flat valleys at small lam.
                step = float(sx @ sx) / curv if it % 2 else curv / float(sg @ sg)
            elif prev_step is not None:
                step = 2.0 * prev_step
        step = min(step, options.max_step)

        while True:
            M_new = M - step * dM
            cand = point.system.with_parameters(L - step * dL, 0.5 * (M_new + M_new.T))
            adm = admissibility(cand)
            if adm.margin >= floor:
                pair = gramians(cand)
                z = evaluate_cost(cand, pair).total
                if z <= point.cost.total - options.armijo * step * slope:
                    break
            step *= options.contraction
            if step < options.min_step:
                raise NoDescentDirection(
                    f"line search failed at iteration {it} "
                    f"(gradient norm {math.sqrt(slope):.3g})",
                    result=_result(point, trace, "no_descent", seed, initial_cost))

        prev_x, prev_g, prev_step = x, g, step
        point = _Point(cand, pair, adm.margin)
        row = TraceRow(it, point.cost.total, *point.grad.norms, step, point.margin)
        trace.append(row)
        if callback is not None:
            callback(row)


@dataclass(frozen=True)
class MultiStartResult:
    results: tuple
    failures: tuple
    rtol: float = 1e-4

    @property
    def converged(self):
        return tuple(r for r in self.results if r.converged)

    @property
    def best(self):
        pool = self.converged or self.results
        if not pool:
            return None
        return min(pool, key=lambda r: (r.cost.total, r.seed))

    @property
    def multiple_stationary_values(self):
        """True when converged costs differ by more than ``rtol`` (relative)."""
        costs = [r.cost.total for r in self.converged]
        if len(costs) < 2:
            return False
        lo, hi = min(costs), max(costs)
        return (hi - lo) > self.rtol * max(abs(lo), abs(hi), 1e-300)


def _run_seed(args):
    plant, cost, template, seed, options, start = args
    init = start if start is not None else initial_observer(plant, template, seed)
    try:
        return optimize(plant, cost, init, options, seed=seed), None
    except NoDescentDirection as exc:
        return exc.result, (seed, str(exc))


def max_workers():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def multistart(plant, cost, template, seeds, options=None, start=None, workers=None):
    """Run :func:`optimize` from the seeded initial family, one run per seed.

    ``start``, if given, replaces the initial observer of the first seed.
    Runs are independent, so they may go to a process pool; results are
    ordered by seed position regardless.
    """
    seeds = list(seeds)
    jobs = [(plant, cost, template, s, options, start if i == 0 else None)
            for i, s in enumerate(seeds)]
    workers = max_workers() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            outcomes = list(pool.map(_run_seed, jobs))
    else:
        outcomes = [_run_seed(job) for job in jobs]
    results = tuple(r for r, _ in outcomes if r is not None)
    failures = tuple(f for _, f in outcomes if f is not None)
    return MultiStartResult(results, failures)


__all__ = [
    "OptimizerOptions",
    "TraceRow",
    "TRACE_COLUMNS",
    "SynthesisResult",
    "MultiStartResult",
    "initial_observer",
    "optimize",
    "multistart",
    "max_workers",
]
