"""Closed quantum harmonic oscillators ``(Theta, R)``.

The Heisenberg dynamics of an oscillator with CCR matrix ``Theta`` and
quadratic Hamiltonian ``X^T R X / 2`` are ``dX/dt = A X`` with
``A = 2 Theta R``.  For ``R >= 0`` the spectrum of ``A`` is purely
imaginary and ``A = i V Omega V^{-1}``, which gives the mode matrices
``C_k`` used by the trigonometric moment formulas.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DefectiveMatrix, DimensionMismatch, InvalidSpec, NotPositiveSemidefinite
from .matcore import as_square, frob
from .policy import DEFAULT_POLICY

__all__ = [
    "CcrMatrix",
    "QhoModel",
    "ModeDecomposition",
    "HamiltonianCheck",
    "dynamics_matrix",
    "check_hamiltonian",
    "diagonalize_modes",
    "standard_ccr",
]

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


class CcrMatrix:
    """Nonsingular real antisymmetric matrix of even order.

    Only the strict upper triangle is kept, so ``matrix`` is exactly
    antisymmetric whatever rounding the input carried.
    """

    __slots__ = ("_upper", "_n")

    def __init__(self, theta, policy=DEFAULT_POLICY, name="theta"):
        theta = as_square(np.asarray(theta, dtype=float), name)
        n = theta.shape[0]
        if n % 2:
            raise InvalidSpec(f"CCR matrix must have even order, got {n}", name)
        scale = max(1.0, frob(theta))
        if frob(theta + theta.T) > policy.hamiltonian_tol * scale:
            raise InvalidSpec("CCR matrix must be antisymmetric", name)
        sv = np.linalg.svd(theta, compute_uv=False)
        if sv[-1] <= policy.singular_tol * sv[0]:
            raise InvalidSpec("CCR matrix must be nonsingular", name)
        self._n = n
        self._upper = theta[np.triu_indices(n, 1)].copy()
        self._upper.flags.writeable = False

    @property
    def order(self):
        return self._n

    @property
    def matrix(self):
        n = self._n
        theta = np.zeros((n, n))
        theta[np.triu_indices(n, 1)] = self._upper
        return theta - theta.T

    def inverse(self):
        return np.linalg.inv(self.matrix)

    def __array__(self, dtype=None, copy=None):
        m = self.matrix
        return m if dtype is None else m.astype(dtype)

    def __eq__(self, other):
        return (isinstance(other, CcrMatrix) and self._n == other._n
                and np.array_equal(self._upper, other._upper))

    def __hash__(self):
        return hash((self._n, self._upper.tobytes()))

    def __repr__(self):
        return f"CcrMatrix({self.matrix.tolist()!r})"

    @classmethod
    def block_diag(cls, *parts):
        return cls(scipy.linalg.block_diag(*(p.matrix for p in parts)))


def standard_ccr(n, scale=0.5):
    """Block-diagonal ``scale * J`` for ``n/2`` position-momentum pairs."""
    if n % 2:
        raise InvalidSpec(f"order must be even, got {n}")
    return CcrMatrix(np.kron(np.eye(n // 2), scale * J2))


@dataclass(frozen=True)
class QhoModel:
    theta: CcrMatrix
    energy: np.ndarray

    def __post_init__(self):
        energy = as_square(np.asarray(self.energy, dtype=float), "energy")
        if energy.shape[0] != self.theta.order:
            raise DimensionMismatch(
                f"energy has order {energy.shape[0]}, theta has {self.theta.order}")
        if frob(energy - energy.T) > 1e-12 * max(1.0, frob(energy)):
            raise InvalidSpec("energy matrix must be symmetric", "energy")
        object.__setattr__(self, "energy", 0.5 * (energy + energy.T))

    @property
    def n(self):
        return self.theta.order


def dynamics_matrix(model):
    return 2.0 * model.theta.matrix @ model.energy


class HamiltonianCheck(NamedTuple):
    ok: bool
    residual: float


def check_hamiltonian(a, theta, policy=DEFAULT_POLICY):
    """Test ``a Theta + Theta a^T = 0`` (the infinitesimal symplectic property)."""
    a = as_square(a, "a")
    th = theta.matrix if isinstance(theta, CcrMatrix) else as_square(theta, "theta")
    if a.shape != th.shape:
        raise DimensionMismatch(f"a is {a.shape}, theta is {th.shape}")
    residual = frob(a @ th + th @ a.T)
    bound = policy.hamiltonian_tol * (1.0 + frob(a) * frob(th))
    return HamiltonianCheck(residual <= bound, residual)


@dataclass(frozen=True)
class ModeDecomposition:
    """``A = i V diag(omega) W`` with ``W = V^{-1}`` and ``C_k = V_k W_k``.

    The first half of ``omega`` is nonincreasing and nonnegative; entry
    ``k + n/2`` is its negative, with eigenvector ``conj(V_k)``.
    """

    v: np.ndarray
    w: np.ndarray
    omega: np.ndarray
    mode_matrices: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.v.shape[0]

    def evolution(self, t):
        """``exp(tA)`` rebuilt from the modes (complex sum)."""
        phases = np.exp(1j * self.omega * t)
        return np.einsum("k,kjl->jl", phases, self.mode_matrices)

    def evolution_real(self, t):
        half = self.n // 2
        phases = np.exp(1j * self.omega[:half] * t)
        return 2.0 * np.einsum("k,kjl->jl", phases, self.mode_matrices[:half]).real


def _normalize_columns(vecs, tol=1e-12):
    out = []
    for v in vecs.T:
        v = v / np.linalg.norm(v)
        idx = np.flatnonzero(np.abs(v) > tol)[0]
        v = v * (abs(v[idx]) / v[idx])
        out.append(v)
    return np.array(out).T if out else vecs


def _sort_positive_modes(omega, vecs):
    """Descending frequency, ties broken by real parts of the eigenvectors."""
    keys = [(-round(float(om), 12), tuple(np.round(vecs[:, i].real, 12)))
            for i, om in enumerate(omega)]
    order = sorted(range(len(omega)), key=lambda i: keys[i])
    return omega[order], vecs[:, order]


def diagonalize_modes(model, policy=DEFAULT_POLICY):
    """Mode decomposition of ``A = 2 Theta R`` for ``R >= 0``.

    For ``R > 0`` the eigenvectors come from the Hermitian matrix
    ``-2i sqrt(R) Theta sqrt(R)``, which keeps degenerate frequencies
    well conditioned.  A singular ``R`` falls back to a general
    eigensolver, with zero modes built from a real basis of ``ker A``.

    Raises
    ------
    NotPositiveSemidefinite
        If ``R`` has an eigenvalue below ``-policy.eig_tol``.
    DefectiveMatrix
        If the eigenvector matrix is numerically singular.
    """
    R = model.energy
    n = model.n
    half = n // 2
    r_eig, r_vec = np.linalg.eigh(R)
    if r_eig[0] < -policy.eig_tol * max(1.0, abs(r_eig[-1])):
        raise NotPositiveSemidefinite(
            f"energy matrix has eigenvalue {r_eig[0]:.3g} < 0")
    theta = model.theta.matrix

    if r_eig[0] > policy.eig_tol * max(1.0, r_eig[-1]) * 1e2:
        sqrt_r = (r_vec * np.sqrt(r_eig)) @ r_vec.T
        inv_sqrt_r = (r_vec / np.sqrt(r_eig)) @ r_vec.T
        herm = -2j * sqrt_r @ theta @ sqrt_r
        freq, u = np.linalg.eigh(0.5 * (herm + herm.conj().T))
        pos_omega = freq[half:][::-1]
        pos_vecs = inv_sqrt_r @ u[:, half:][:, ::-1]
    else:
        pos_omega, pos_vecs = _singular_energy_modes(model, policy)

    pos_vecs = _normalize_columns(pos_vecs)
    pos_omega, pos_vecs = _sort_positive_modes(pos_omega, pos_vecs)
    v = np.hstack([pos_vecs, pos_vecs.conj()])
    omega = np.concatenate([pos_omega, -pos_omega])
    if np.linalg.cond(v) > policy.defect_cond:
        raise DefectiveMatrix("dynamics matrix is not diagonalizable")
    w = np.linalg.inv(v)
    # Exact conjugate symmetry of W rows follows from V's column pairing.
    w = np.vstack([w[:half], w[:half].conj()])
    mode_matrices = np.einsum("jk,kl->kjl", v, w)
    return ModeDecomposition(v, w, omega, mode_matrices)


def _singular_energy_modes(model, policy):
    A = dynamics_matrix(model)
    n = model.n
    half = n // 2
    scale = max(1.0, np.linalg.norm(A, 2))
    zero_tol = 1e-7 * scale
    lam, vecs = np.linalg.eig(A)
    if np.max(np.abs(lam.real)) > zero_tol:
        raise DefectiveMatrix("spectrum of A is not purely imaginary")
    positive = lam.imag > zero_tol
    pos_omega = lam.imag[positive]
    pos_vecs = vecs[:, positive]
    n_zero = n - 2 * pos_omega.size
    if n_zero:
        _, s, vh = np.linalg.svd(A)
        if s[n - n_zero] > zero_tol:
            raise DefectiveMatrix("zero frequency is not semisimple")
        kernel = vh[n - n_zero:].conj().T.real
        pairs = (kernel[:, 0::2] + 1j * kernel[:, 1::2]) / np.sqrt(2.0)
        pos_omega = np.concatenate([pos_omega, np.zeros(pairs.shape[1])])
        pos_vecs = np.hstack([pos_vecs, pairs])
    if pos_vecs.shape[1] != half:
        raise DefectiveMatrix("could not pair the spectrum into conjugate modes")
    return pos_omega, pos_vecs
