"""Dense matrix kernel: Lyapunov solves, spectra, exponentials, brackets."""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, EigenFailure, NotHurwitz
from .policy import DEFAULT_POLICY

__all__ = [
    "as_square",
    "solve_lyapunov",
    "lyapunov_residual",
    "commutator",
    "symmetrizer",
    "StabilityMargin",
    "stability_margin",
    "matrix_exponential",
    "frob",
]


def as_square(a, name="matrix", dtype=None):
    """Return ``a`` as a finite square 2-D array, or raise."""
    a = np.asarray(a, dtype=dtype)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] == 0:
        raise DimensionMismatch(f"{name} must have positive order")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def frob(a):
    return float(np.linalg.norm(a, "fro"))


def solve_lyapunov(alpha, beta, policy=DEFAULT_POLICY):
    """Solve ``alpha @ g + g @ alpha.T + beta = 0`` for ``g``.

    Bartels-Stewart on the complex Schur form of ``alpha``: with
    ``alpha = U T U*`` the equation becomes ``T Y + Y T* = -U* beta U``,
    which is solved one column at a time from the right since ``T*`` is
    lower triangular.

    Parameters
    ----------
    alpha : (m, m) array_like
        Real Hurwitz matrix.
    beta : (m, m) array_like
        Right-hand side; real or complex.

    Returns
    -------
    g : (m, m) ndarray
        Real when ``beta`` is real, and exactly symmetric when ``beta`` is.

    Raises
    ------
    NotHurwitz
        If the spectral abscissa of ``alpha`` is not negative.
    DimensionMismatch
        On non-square or differently sized inputs.
    """
    alpha = as_square(alpha, "alpha")
    beta = as_square(beta, "beta")
    if alpha.shape != beta.shape:
        raise DimensionMismatch(
            f"alpha is {alpha.shape} but beta is {beta.shape}")
    if np.iscomplexobj(alpha):
        raise TypeError("alpha must be real")
    m = alpha.shape[0]

    T, U = scipy.linalg.schur(alpha.astype(float), output="complex")
    diag = np.diag(T)
    abscissa = float(np.max(diag.real))
    if abscissa >= 0.0:
        raise NotHurwitz(
            f"spectral abscissa {abscissa:.6g} >= 0; Lyapunov operator undefined")

    F = -(U.conj().T @ beta @ U)
    Y = np.zeros((m, m), dtype=complex)
    Tc = T.conj()
    for j in range(m - 1, -1, -1):
        rhs = F[:, j] - Y[:, j + 1:] @ Tc[j, j + 1:]
        coef = T + Tc[j, j] * np.eye(m)
        Y[:, j] = scipy.linalg.solve_triangular(coef, rhs, check_finite=False)
    g = U @ Y @ U.conj().T

    if not np.iscomplexobj(beta):
        g = g.real
    if np.array_equal(beta, beta.T.conj()):
        g = 0.5 * (g + g.T.conj())
    return g


def lyapunov_residual(alpha, beta, gamma):
    """Relative residual of ``alpha g + g alpha^T + beta = 0``."""
    r = alpha @ gamma + gamma @ alpha.T + beta
    scale = 1.0 + frob(alpha) * frob(gamma) + frob(beta)
    return frob(r) / scale


def commutator(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(
            f"commutator needs equal square shapes, got {a.shape} and {b.shape}")
    return a @ b - b @ a


def symmetrizer(n):
    n = as_square(n, "n")
    return 0.5 * (n + n.T)


@dataclass(frozen=True)
class StabilityMargin:
    """Spectral abscissa of a matrix and the horizon bound it implies.

    ``tau_bound`` is the supremum of discount horizons for which the
    shifted matrix ``a - I/(2 tau)`` is Hurwitz.
    """

    abscissa: float
    tau_bound: float

    @classmethod
    def from_abscissa(cls, abscissa):
        abscissa = float(abscissa)
        if abscissa <= 0.0:
            return cls(abscissa, math.inf)
        return cls(abscissa, 1.0 / (2.0 * abscissa))


def stability_margin(a, policy=DEFAULT_POLICY):
    """Spectral abscissa of ``a`` and the implied horizon bound.

    An abscissa within ``policy.eig_tol * max(1, ||a||)`` of zero is
    rounding noise on a purely imaginary spectrum and counts as zero, so
    Hamiltonian matrices with ``R >= 0`` get an infinite bound.
    """
    a = as_square(a, "a")
    try:
        eig = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    abscissa = float(np.max(eig.real))
    if abs(abscissa) <= policy.eig_tol * max(1.0, float(np.linalg.norm(a, 2))):
        abscissa = 0.0
    return StabilityMargin.from_abscissa(abscissa)


def matrix_exponential(a, t=1.0):
    """``exp(t a)`` by scaling and squaring with a degree-13 Pade approximant."""
    a = as_square(a, "a")
    t = float(t)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    return scipy.linalg.expm(t * a)
