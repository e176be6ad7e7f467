"""Discounted cost and its Frechet derivatives in ``(L, M)``."""

from dataclasses import dataclass

import numpy as np

from ..coupled import gramians


@dataclass(frozen=True)
class CostBreakdown:
    """Primal cost ``<calC^T calC, calP>`` split into its two parts, plus
    the dual value ``<calQ, Sigma>/tau``."""

    total: float
    error_part: float
    backaction_part: float
    dual_total: float
    lam: float

    @property
    def constraint_value(self):
        """Discounted mean square ``E_tau(eta^T Pi eta)`` of the back-action."""
        return self.backaction_part / self.lam

    @property
    def duality_gap(self):
        return abs(self.total - self.dual_total) / max(abs(self.total), 1e-300)


def _weighted(rows, calP):
    return float(np.sum((rows.T @ rows) * calP))


def evaluate_cost(system, pair=None):
    pair = gramians(system) if pair is None else pair
    calC = system.calC
    p = system.plant.p
    err_rows = calC[:p]
    act_rows = calC[p:]
    total = _weighted(calC, pair.calP)
    dual = float(np.sum(pair.calQ * system.sigma)) / pair.tau
    return CostBreakdown(
        total=total,
        error_part=_weighted(err_rows, pair.calP),
        backaction_part=_weighted(act_rows, pair.calP),
        dual_total=dual,
        lam=system.cost.lam,
    )


@dataclass(frozen=True)
class GradientPair:
    dL: np.ndarray
    dM: np.ndarray

    @property
    def norms(self):
        return float(np.linalg.norm(self.dL)), float(np.linalg.norm(self.dM))

    @property
    def max_norm(self):
        return max(self.norms)

    def inner(self, dL, dM):
        return float(np.sum(self.dL * dL) + np.sum(self.dM * dM))


def coupling_bracket(system, pair):
    """``Theta1 E12 - E21^T Theta2``, the coupling block of ``Theta E - E^T Theta``."""
    E = pair.hankelian
    _, E12, E21, _ = system.blocks(E)
    th1 = system.plant.theta1.matrix
    th2 = system.observer.theta2.matrix
    return th1 @ E12 - E21.T @ th2


def energy_bracket(system, pair):
    """``Theta2 E22 - E22^T Theta2``; vanishes at stationary points."""
    E22 = system.blocks(pair.hankelian)[3]
    th2 = system.observer.theta2.matrix
    return th2 @ E22 - E22.T @ th2


def gradients(system, pair=None):
    """Partial derivatives of the cost on ``R^{n x nu}`` and on symmetric ``nu x nu``.

    ``dL = 2 (lam Pi L P22 - 2 (Theta1 E12 - E21^T Theta2))`` and
    ``dM = -2 (Theta2 E22 - E22^T Theta2)``, where ``E = calQ calP``.
    """
    pair = gramians(system) if pair is None else pair
    cost = system.cost
    P22 = pair.block("P", 2, 2)
    dL = 2.0 * (cost.lam * cost.pi_weight @ system.L @ P22
                - 2.0 * coupling_bracket(system, pair))
    dM = -2.0 * energy_bracket(system, pair)
    return GradientPair(dL, 0.5 * (dM + dM.T))


__all__ = ["CostBreakdown", "GradientPair", "evaluate_cost", "gradients",
           "coupling_bracket", "energy_bracket"]
