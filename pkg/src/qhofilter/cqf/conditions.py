"""First-order optimality conditions and the identities behind them.

With ``P = calP Theta^{-1}`` and ``Q = Theta calQ`` (both Hamiltonian),
the Gramian equations and the stationarity conditions become commutator
equations:

    [calA, P] = (P - Sigma Theta^{-1}) / tau
    [calA, Q] = Theta calC^T calC - Q / tau
    [Q, P]_12 = (lam/2) Pi L P_22
    [Q, P]_22 = 0

The first two hold for every admissible observer, the last two only at
stationary points.  The Jacobi identity applied to ``calA, P, Q`` gives a
further relation that holds everywhere and, at a stationary point with
``nu = n``, can be solved for ``M``.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ..coupled import gramians, hamiltonianize
from ..errors import DimensionMismatch, SingularCommutatorBlock, SingularP22
from ..matcore import commutator, frob
from .cost import coupling_bracket, energy_bracket, evaluate_cost

NONDEGENERACY_TOL = 1e-6
P22_TOL = 1e-10


class LieResiduals(NamedTuple):
    """Frobenius residuals of the four commutator equations, and their scale."""

    controllability: float
    observability: float
    coupling: float
    energy: float
    scale: float


class ClosedFormM(NamedTuple):
    m: np.ndarray
    asymmetry: float


def _lie_parts(system, pair):
    P, Q = hamiltonianize(pair, system.theta)
    return P, Q, commutator(Q, P)


def commutator_scale(system, pair):
    """Magnitude of the products entering the commutator identities."""
    P, Q = hamiltonianize(pair, system.theta)
    th_inv = system.theta.inverse()
    tau = pair.tau
    terms = (
        frob(system.sigma @ th_inv) * frob(Q) / tau,
        frob(system.theta.matrix @ system.calC.T @ system.calC) * frob(P),
        frob(Q) * frob(P) * frob(system.calA),
        frob(Q) * frob(P),
    )
    return 1.0 + sum(terms)


def lie_forms(system, pair=None):
    pair = gramians(system) if pair is None else pair
    P, Q, QP = _lie_parts(system, pair)
    tau = pair.tau
    th = system.theta.matrix
    th_inv = system.theta.inverse()
    calA = system.calA
    n = system.n
    r_ctrl = commutator(calA, P) - (P - system.sigma @ th_inv) / tau
    r_obs = commutator(calA, Q) - th @ system.calC.T @ system.calC + Q / tau
    lam, Pi = system.cost.lam, system.cost.pi_weight
    r_cpl = QP[:n, n:] - 0.5 * lam * Pi @ system.L @ P[n:, n:]
    r_eng = QP[n:, n:]
    return LieResiduals(frob(r_ctrl), frob(r_obs), frob(r_cpl), frob(r_eng),
                        commutator_scale(system, pair))


def hankelian_identity_residual(system, pair=None):
    """``||(Theta E - E^T Theta) - [Q, P] Theta||_F``, zero for any admissible observer."""
    pair = gramians(system) if pair is None else pair
    _, _, QP = _lie_parts(system, pair)
    th = system.theta.matrix
    E = pair.hankelian
    return frob(th @ E - E.T @ th - QP @ th)


def jacobi_matrix(system, pair=None):
    """``(1/tau)[Sigma Theta^{-1}, Q] + [Theta calC^T calC, P] + [[Q, P], calA]``."""
    pair = gramians(system) if pair is None else pair
    P, Q, QP = _lie_parts(system, pair)
    th = system.theta.matrix
    th_inv = system.theta.inverse()
    return (commutator(system.sigma @ th_inv, Q) / pair.tau
            + commutator(th @ system.calC.T @ system.calC, P)
            + commutator(QP, system.calA))


def jacobi_residual(system, pair=None):
    return frob(jacobi_matrix(system, pair))


def closed_form_L(P, Q, pi_weight, lam, n):
    """Coupling ``(2/lam) Pi^{-1} [Q, P]_12 P_22^{-1}`` implied by stationarity.

    Raises
    ------
    SingularP22
        If ``P_22`` is numerically singular.
    """
    QP = commutator(Q, P)
    P22 = P[n:, n:]
    sv = np.linalg.svd(P22, compute_uv=False)
    if sv[-1] <= P22_TOL * sv[0]:
        raise SingularP22("P22 is singular; the coupling formula does not apply")
    return (2.0 / lam) * np.linalg.solve(pi_weight, QP[:n, n:]) @ np.linalg.inv(P22)


def _nondegenerate_block(QP12, scale, tol=NONDEGENERACY_TOL):
    sv = np.linalg.svd(QP12, compute_uv=False)
    return bool(sv[-1] > tol * scale), float(sv[-1])


def closed_form_M(P, Q, system, tau=None, coupling=None):
    """Observer energy matrix solving the Jacobi (1,2)-block equation.

    Requires ``n == nu`` and a well-conditioned ``[Q, P]_12``.  The raw
    solution is returned symmetrized, together with its relative
    asymmetry, which is small only near genuine stationary points.
    """
    n, nu = system.n, system.nu
    if n != nu:
        raise DimensionMismatch(f"closed-form M needs n == nu, got n={n}, nu={nu}")
    tau = system.tau if tau is None else tau
    L = system.L if coupling is None else coupling
    th = system.theta.matrix
    th1 = system.plant.theta1.matrix
    th2 = system.observer.theta2.matrix
    K = system.plant.k_energy
    QP = commutator(Q, P)
    QP11, QP12 = QP[:n, :n], QP[:n, n:]
    ok, smin = _nondegenerate_block(QP12, frob(Q) * frob(P))
    if not ok:
        raise SingularCommutatorBlock(
            f"[Q,P]_12 is numerically singular (smallest singular value {smin:.3g})")
    sig_th = system.sigma @ system.theta.inverse()
    forcing = (commutator(sig_th, Q)[:n, n:] / tau
               + commutator(th @ system.calC.T @ system.calC, P)[:n, n:])
    rhs = th1 @ K @ QP12 - QP11 @ th1 @ L - 0.5 * forcing
    raw = np.linalg.solve(th2, np.linalg.solve(QP12, rhs))
    sym = 0.5 * (raw + raw.T)
    asym = frob(raw - raw.T) / max(frob(raw), 1e-300)
    return ClosedFormM(sym, asym)


@dataclass(frozen=True)
class StationarityReport:
    """Residuals of the stationarity conditions at one observer.

    ``res_L`` and ``res_M`` are the raw Hankelian conditions, ``lie_res_*``
    the commutator versions.  ``l_formula_gap`` and ``m_formula_gap`` are
    relative distances to the closed forms, or ``None`` when a closed form
    is not applicable.  ``N`` is the unconstrained (1,1) block of
    ``2 (Theta E - E^T Theta)``.
    """

    cost: float
    res_L: float
    res_M: float
    lie_res_L: float
    lie_res_M: float
    lie_res_ctrl: float
    lie_res_obs: float
    identity_res: float
    jacobi_res: float
    scale: float
    l_formula_gap: Optional[float]
    m_formula_gap: Optional[float]
    m_formula_asymmetry: Optional[float]
    p22_min_eig: float
    qp12_min_sv: Optional[float]
    nondegenerate: bool
    N: np.ndarray

    def is_stationary(self, rtol=1e-6):
        bound = rtol * (1.0 + abs(self.cost))
        return self.res_L <= bound and self.res_M <= bound

    def as_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "N"}
        out["N"] = self.N.tolist()
        return out


def stationarity(system, pair=None):
    pair = gramians(system) if pair is None else pair
    n = system.n
    cost = evaluate_cost(system, pair)
    lam, Pi = system.cost.lam, system.cost.pi_weight
    P22 = pair.block("P", 2, 2)

    res_L = frob(coupling_bracket(system, pair) - 0.5 * lam * Pi @ system.L @ P22)
    e_br = energy_bracket(system, pair)
    res_M = frob(e_br)
    lie = lie_forms(system, pair)
    th = system.theta.matrix
    E = pair.hankelian
    N = 2.0 * (th @ E - E.T @ th)[:n, :n]

    P, Q = hamiltonianize(pair, system.theta)
    p22_min = float(np.linalg.eigvalsh(P22)[0])
    qp12_min = None
    nondeg = p22_min > P22_TOL
    if system.n == system.nu:
        ok, qp12_min = _nondegenerate_block(commutator(Q, P)[:n, n:], frob(Q) * frob(P))
        nondeg = nondeg and ok

    l_gap = m_gap = m_asym = None
    L = system.L
    try:
        L_cf = closed_form_L(P, Q, Pi, lam, n)
        l_gap = frob(L_cf - L) / max(frob(L), 1e-300)
    except SingularP22:
        pass
    if system.n == system.nu:
        try:
            M_cf = closed_form_M(P, Q, system, pair.tau)
            m_gap = frob(M_cf.m - system.M) / max(frob(system.M), 1e-300)
            m_asym = M_cf.asymmetry
        except SingularCommutatorBlock:
            pass

    return StationarityReport(
        cost=cost.total,
        res_L=res_L,
        res_M=res_M,
        lie_res_L=lie.coupling,
        lie_res_M=lie.energy,
        lie_res_ctrl=lie.controllability,
        lie_res_obs=lie.observability,
        identity_res=hankelian_identity_residual(system, pair),
        jacobi_res=jacobi_residual(system, pair),
        scale=lie.scale,
        l_formula_gap=l_gap,
        m_formula_gap=m_gap,
        m_formula_asymmetry=m_asym,
        p22_min_eig=p22_min,
        qp12_min_sv=qp12_min,
        nondegenerate=bool(nondeg),
        N=N,
    )


__all__ = [
    "LieResiduals",
    "ClosedFormM",
    "StationarityReport",
    "lie_forms",
    "hankelian_identity_residual",
    "jacobi_matrix",
    "jacobi_residual",
    "closed_form_L",
    "closed_form_M",
    "commutator_scale",
    "stationarity",
]
