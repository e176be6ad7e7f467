"""Plant-observer composite oscillator and its discounted Gramians.

A plant with ``n`` variables and an observer with ``nu`` variables share
the energy matrix ``R = [[K, L], [L^T, M]]`` and the block-diagonal CCR
matrix ``diag(Theta1, Theta2)``.  Everything downstream (cost, gradients,
optimality conditions) is expressed through the composite dynamics
matrix ``calA = 2 Theta R``, the cost matrix ``calC`` and the two
Gramians of the shifted pair ``(calA - I/(2 tau), calC)``.
"""

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, InvalidSpec, NotAdmissible, SingularTheta
from .matcore import frob, solve_lyapunov, stability_margin
from .policy import DEFAULT_POLICY
from .qho import CcrMatrix

__all__ = [
    "PlantSpec",
    "ObserverSpec",
    "CostSpec",
    "CompositeSystem",
    "GramianPair",
    "Admissibility",
    "assemble",
    "admissibility",
    "gramians",
    "hamiltonianize",
    "psd_sqrt",
    "split_blocks",
]


def _matrix(value, name, shape=None):
    a = np.array(value, dtype=float, ndmin=2)
    if a.ndim != 2:
        raise InvalidSpec(f"expected a 2-D array, got ndim={a.ndim}", name)
    if not np.all(np.isfinite(a)):
        raise InvalidSpec("entries must be finite", name)
    if shape is not None and a.shape != shape:
        raise DimensionMismatch(f"{name}: expected shape {shape}, got {a.shape}")
    a.flags.writeable = False
    return a


def _symmetric(value, name, order):
    a = _matrix(value, name, (order, order))
    if frob(a - a.T) > 1e-12 * max(1.0, frob(a)):
        raise InvalidSpec("matrix must be symmetric", name)
    a = 0.5 * (a + a.T)
    a.flags.writeable = False
    return a


def _ccr(value, name):
    if isinstance(value, CcrMatrix):
        return value
    return CcrMatrix(value, name=name)


def _check_uncertainty(sigma, theta, name, tol):
    lo = np.linalg.eigvalsh(sigma + 1j * theta.matrix)[0]
    if lo < -tol:
        raise InvalidSpec(
            f"sigma + i*theta has eigenvalue {lo:.3g} < 0", name)


def psd_sqrt(a):
    """Symmetric square root of a positive semidefinite matrix."""
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


@dataclass(frozen=True)
class PlantSpec:
    """Fixed plant data: CCR matrix, energy ``K``, initial ``Sigma1``, output ``S1``."""

    theta1: CcrMatrix
    k_energy: np.ndarray
    sigma1: np.ndarray
    s1: np.ndarray

    def __post_init__(self):
        theta = _ccr(self.theta1, "plant.theta1")
        n = theta.order
        object.__setattr__(self, "theta1", theta)
        object.__setattr__(self, "k_energy", _symmetric(self.k_energy, "plant.k_energy", n))
        object.__setattr__(self, "sigma1", _symmetric(self.sigma1, "plant.sigma1", n))
        s1 = _matrix(self.s1, "plant.s1")
        if s1.shape[1] != n:
            raise DimensionMismatch(f"plant.s1 must have {n} columns, got {s1.shape}")
        object.__setattr__(self, "s1", s1)
        _check_uncertainty(self.sigma1, theta, "plant.sigma1", DEFAULT_POLICY.psd_tol)

    @property
    def n(self):
        return self.theta1.order

    @property
    def p(self):
        return self.s1.shape[0]

    def k_is_psd(self, tol=1e-12):
        w = np.linalg.eigvalsh(self.k_energy)
        return bool(w[0] >= -tol * max(1.0, abs(w[-1])))


@dataclass(frozen=True)
class ObserverSpec:
    """Observer data; ``coupling`` (L) and ``m_energy`` (M) are the decision variables."""

    theta2: CcrMatrix
    sigma2: np.ndarray
    s2: np.ndarray
    coupling: np.ndarray
    m_energy: np.ndarray

    def __post_init__(self):
        theta = _ccr(self.theta2, "observer.theta2")
        nu = theta.order
        object.__setattr__(self, "theta2", theta)
        object.__setattr__(self, "sigma2", _symmetric(self.sigma2, "observer.sigma2", nu))
        s2 = _matrix(self.s2, "observer.s2")
        if s2.shape[1] != nu:
            raise DimensionMismatch(f"observer.s2 must have {nu} columns, got {s2.shape}")
        object.__setattr__(self, "s2", s2)
        L = _matrix(self.coupling, "observer.coupling")
        if L.shape[1] != nu:
            raise DimensionMismatch(f"observer.coupling must have {nu} columns, got {L.shape}")
        object.__setattr__(self, "coupling", L)
        object.__setattr__(self, "m_energy", _symmetric(self.m_energy, "observer.m_energy", nu))
        _check_uncertainty(self.sigma2, theta, "observer.sigma2", DEFAULT_POLICY.psd_tol)

    @property
    def nu(self):
        return self.theta2.order

    def with_parameters(self, coupling, m_energy):
        return replace(self, coupling=coupling, m_energy=m_energy)


@dataclass(frozen=True)
class CostSpec:
    """Back-action weight ``Pi > 0``, its multiplier ``lam > 0`` and horizon ``tau``."""

    pi_weight: np.ndarray
    lam: float
    tau: float

    def __post_init__(self):
        pi = _matrix(self.pi_weight, "cost.pi_weight")
        if pi.shape[0] != pi.shape[1]:
            raise DimensionMismatch(f"cost.pi_weight must be square, got {pi.shape}")
        pi = _symmetric(pi, "cost.pi_weight", pi.shape[0])
        w = np.linalg.eigvalsh(pi)
        if not w[0] > 1e-12 * w[-1] or w[-1] <= 0:
            raise InvalidSpec("weight must be positive definite", "cost.pi_weight")
        object.__setattr__(self, "pi_weight", pi)
        lam = float(self.lam)
        tau = float(self.tau)
        if not (lam > 0 and math.isfinite(lam)):
            raise InvalidSpec(f"must be positive, got {self.lam}", "cost.lam")
        if not (tau > 0 and math.isfinite(tau)):
            raise InvalidSpec(f"must be positive, got {self.tau}", "cost.tau")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "tau", tau)

    def with_lam(self, lam):
        return replace(self, lam=lam)


def split_blocks(mat, n):
    """``(M11, M12, M21, M22)`` for a split after row/column ``n``."""
    return mat[:n, :n], mat[:n, n:], mat[n:, :n], mat[n:, n:]


@dataclass(frozen=True)
class CompositeSystem:
    plant: PlantSpec
    observer: ObserverSpec
    cost: CostSpec
    calA: np.ndarray
    theta: CcrMatrix
    sigma: np.ndarray
    calC: np.ndarray
    energy: np.ndarray

    @property
    def n(self):
        return self.plant.n

    @property
    def nu(self):
        return self.observer.nu

    @property
    def tau(self):
        return self.cost.tau

    # blocks of calA as they drive the split ODEs
    @property
    def A(self):
        return 2.0 * self.plant.theta1.matrix @ self.plant.k_energy

    @property
    def B(self):
        return 2.0 * self.plant.theta1.matrix

    @property
    def alpha(self):
        return 2.0 * self.observer.theta2.matrix @ self.observer.m_energy

    @property
    def beta(self):
        return 2.0 * self.observer.theta2.matrix

    @property
    def L(self):
        return self.observer.coupling

    @property
    def M(self):
        return self.observer.m_energy

    def blocks(self, mat):
        return split_blocks(mat, self.n)

    def with_parameters(self, coupling, m_energy):
        return assemble(self.plant, self.observer.with_parameters(coupling, m_energy), self.cost)


def assemble(plant, observer, cost):
    """Build ``calA``, ``Theta``, ``Sigma`` and ``calC`` for a plant-observer pair."""
    n, nu = plant.n, observer.nu
    L = observer.coupling
    if L.shape != (n, nu):
        raise DimensionMismatch(f"observer.coupling must be {n}x{nu}, got {L.shape}")
    if observer.s2.shape[0] != plant.p:
        raise DimensionMismatch(
            f"plant.s1 has {plant.p} rows but observer.s2 has {observer.s2.shape[0]}")
    if cost.pi_weight.shape != (n, n):
        raise DimensionMismatch(f"cost.pi_weight must be {n}x{n}, got {cost.pi_weight.shape}")
    theta = CcrMatrix.block_diag(plant.theta1, observer.theta2)
    energy = np.block([[plant.k_energy, L], [L.T, observer.m_energy]])
    calA = 2.0 * theta.matrix @ energy
    sigma = scipy.linalg.block_diag(plant.sigma1, observer.sigma2)
    root = psd_sqrt(cost.lam * cost.pi_weight)
    calC = np.block([[plant.s1, -observer.s2],
                     [np.zeros((n, n)), root @ L]])
    return CompositeSystem(plant, observer, cost, calA, theta, sigma, calC, energy)


class Admissibility(NamedTuple):
    """``margin`` is ``bound - tau``: negative when inadmissible, inf when unbounded."""

    ok: bool
    margin: float
    bound: float


def admissibility(system, tau=None):
    """Strict test ``tau < 1/(2 max(0, abscissa(calA)))``."""
    tau = system.tau if tau is None else float(tau)
    bound = stability_margin(system.calA).tau_bound
    margin = bound - tau
    return Admissibility(margin > 0, margin, bound)


@dataclass(frozen=True)
class GramianPair:
    """Controllability ``calP``, observability ``calQ`` and Hankelian ``calQ calP``."""

    calP: np.ndarray
    calQ: np.ndarray
    n: int
    tau: float

    @property
    def hankelian(self):
        return self.calQ @ self.calP

    def block(self, which, i, j):
        mat = {"P": self.calP, "Q": self.calQ, "E": self.hankelian}[which]
        rows = slice(None, self.n) if i == 1 else slice(self.n, None)
        cols = slice(None, self.n) if j == 1 else slice(self.n, None)
        return mat[rows, cols]


def gramians(system, tau=None, policy=DEFAULT_POLICY):
    """Solve the two discounted Lyapunov equations.

    ``A_tau calP + calP A_tau^T + Sigma/tau = 0`` and
    ``A_tau^T calQ + calQ A_tau + calC^T calC = 0`` with
    ``A_tau = calA - I/(2 tau)``.

    Raises
    ------
    NotAdmissible
        If the observer is not tau-admissible.
    """
    tau = system.tau if tau is None else float(tau)
    adm = admissibility(system, tau)
    if not adm.ok:
        raise NotAdmissible(
            f"observer is not {tau:g}-admissible: need tau < {adm.bound:.17g}",
            bound=adm.bound)
    a_tau = system.calA - np.eye(system.calA.shape[0]) / (2.0 * tau)
    calP = solve_lyapunov(a_tau, system.sigma / tau, policy)
    calQ = solve_lyapunov(a_tau.T, system.calC.T @ system.calC, policy)
    return GramianPair(calP, calQ, system.n, tau)


def hamiltonianize(pair, theta):
    """``(calP Theta^{-1}, Theta calQ)``: both Hamiltonian w.r.t. ``Theta``."""
    th = theta.matrix if isinstance(theta, CcrMatrix) else np.asarray(theta, dtype=float)
    sv = np.linalg.svd(th, compute_uv=False)
    if sv[-1] <= DEFAULT_POLICY.singular_tol * sv[0]:
        raise SingularTheta("CCR matrix is singular")
    th_inv = np.linalg.inv(th)
    return pair.calP @ th_inv, th @ pair.calQ
