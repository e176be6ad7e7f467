"""Discounted time averages of oscillator moments.

The discounted average of a moment is its exponentially weighted mean
``(1/tau) int_0^inf exp(-t/tau) E[sigma(t)] dt``.  Second moments are
computed three independent ways:

* state space: a Lyapunov equation with the shifted matrix
  ``A - I/(2 tau)``;
* frequency domain: a Fourier integral of ``F(s) Gamma F(s)^*`` along
  ``Re s = 1/(2 tau)`` with ``F(s) = (sI - A)^{-1}``;
* mode sums: trigonometric expansion of the flow, valid for any
  monomial degree when the energy matrix is positive semidefinite.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from .errors import (DegreeMismatch, DimensionMismatch, InvalidSpec,
                     QuadratureNotConverged, TauTooLarge)
from .matcore import as_square, solve_lyapunov, stability_margin
from .policy import DEFAULT_POLICY
from .qho import CcrMatrix

__all__ = [
    "exp_char",
    "InitialSecondMoments",
    "MomentTensor",
    "QuadPolicy",
    "check_tau",
    "discounted_second_moments",
    "discounted_second_moments_freq",
    "discounted_monomial_average",
    "infinite_horizon_monomial_average",
    "discounted_moment_tensor",
    "infinite_horizon_moment_tensor",
]


def exp_char(tau, u):
    """Characteristic function ``1/(1 - i u tau)`` of the exponential law."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return 1.0 / (1.0 - 1j * np.asarray(u) * tau)


@dataclass(frozen=True)
class InitialSecondMoments:
    """``Sigma = Re E(X0 X0^T)`` together with the CCR matrix.

    ``gamma = Sigma + i Theta`` must be positive semidefinite, which is
    the generalized uncertainty relation for the initial state.
    """

    sigma: np.ndarray
    theta: CcrMatrix
    psd_tol: float = DEFAULT_POLICY.psd_tol

    def __post_init__(self):
        sigma = as_square(np.asarray(self.sigma, dtype=float), "sigma")
        if sigma.shape[0] != self.theta.order:
            raise DimensionMismatch("sigma and theta orders differ")
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12 * max(1.0, np.abs(sigma).max())):
            raise InvalidSpec("sigma must be symmetric", "sigma")
        sigma = 0.5 * (sigma + sigma.T)
        object.__setattr__(self, "sigma", sigma)
        lo = np.linalg.eigvalsh(self.gamma)[0]
        if lo < -self.psd_tol:
            raise InvalidSpec(
                f"sigma + i*theta has eigenvalue {lo:.3g} < 0 (uncertainty relation)",
                "sigma")

    @property
    def gamma(self):
        return self.sigma + 1j * self.theta.matrix


@dataclass(frozen=True)
class MomentTensor:
    """Initial mixed moments ``E[X_l1 ... X_ld]`` as a d-way complex array."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.ndim < 1 or len(set(e.shape)) != 1:
            raise DimensionMismatch(f"moment tensor must be n^d, got shape {e.shape}")
        object.__setattr__(self, "entries", e)

    @property
    def degree(self):
        return self.entries.ndim

    @property
    def n(self):
        return self.entries.shape[0]

    @classmethod
    def second_order(cls, initial):
        return cls(initial.gamma)

    @classmethod
    def zeros(cls, n, degree):
        return cls(np.zeros((n,) * degree, dtype=complex))

    @classmethod
    def gaussian(cls, initial, degree):
        """Ordered moments of a zero-mean Gaussian state with ``E(X X^T) = gamma``.

        Sum over pairings of the index positions, each pair ``a < b``
        contributing ``gamma[j_a, j_b]`` (the ordering matters because
        ``gamma`` is not symmetric).  Odd degrees vanish.
        """
        if degree < 1:
            raise ValueError(f"degree must be positive, got {degree}")
        return cls(_pairing_sum(initial.gamma, degree))


def _pairing_sum(gamma, degree):
    n = gamma.shape[0]
    if degree == 0:
        return np.ones((), dtype=complex)
    if degree % 2:
        return np.zeros((n,) * degree, dtype=complex)
    rest = _pairing_sum(gamma, degree - 2)
    out = np.zeros((n,) * degree, dtype=complex)
    for k in range(1, degree):
        # Pair position 0 with position k; the others keep their order.
        term = np.multiply.outer(gamma, rest)
        out += np.moveaxis(term, 1, k)
    return out


def check_tau(a, tau):
    """Raise :class:`TauTooLarge` unless ``a - I/(2 tau)`` is Hurwitz."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    margin = stability_margin(a)
    if not tau < margin.tau_bound:
        raise TauTooLarge(
            f"tau={tau:g} violates tau < {margin.tau_bound:.17g} "
            f"(spectral abscissa {margin.abscissa:.6g})", bound=margin.tau_bound)
    return margin


def discounted_second_moments(a, sigma, tau, policy=DEFAULT_POLICY):
    """Real part ``P`` of the discounted second-moment matrix.

    Solves ``A_tau P + P A_tau^T + Sigma/tau = 0`` with
    ``A_tau = A - I/(2 tau)``.
    """
    a = as_square(np.asarray(a, dtype=float), "a")
    sigma = as_square(np.asarray(sigma, dtype=float), "sigma")
    if a.shape != sigma.shape:
        raise DimensionMismatch(f"a is {a.shape}, sigma is {sigma.shape}")
    check_tau(a, tau)
    a_tau = a - np.eye(a.shape[0]) / (2.0 * tau)
    return solve_lyapunov(a_tau, sigma / tau, policy)


@dataclass(frozen=True)
class QuadPolicy:
    """Tolerances for the frequency-domain integral.

    ``tol`` bounds the absolute error of the result: half of it goes to
    the quadrature, half to the certified truncation of the tails.
    """

    tol: float = 1e-9
    limit: int = 2000


def _tail_cutoff(a_norm, gamma_norm, tau, tol):
    # For |w| > a_norm: ||F(c + iw)|| <= 1/(|w| - a_norm).  Integrating the
    # bound over both tails gives gamma_norm/(pi*tau*(W - a_norm)).
    return a_norm + 2.0 * gamma_norm / (math.pi * tau * tol)


def discounted_second_moments_freq(a, gamma, tau, quad=QuadPolicy()):
    """Frequency-domain counterpart of :func:`discounted_second_moments`.

    Evaluates ``(1/(2 pi tau)) Re int F(c + iw) Gamma F(c + iw)^* dw`` with
    ``c = 1/(2 tau)`` by adaptive Gauss-Kronrod quadrature.  The core
    ``|w| <= 2||A|| + 1`` is integrated directly; each tail is mapped to a
    bounded interval by ``w = 1/u`` and truncated at a cutoff chosen from
    the resolvent bound so that the discarded mass is below ``quad.tol/2``.
    """
    a = as_square(np.asarray(a, dtype=float), "a")
    gamma = as_square(np.asarray(gamma, dtype=complex), "gamma")
    if a.shape != gamma.shape:
        raise DimensionMismatch(f"a is {a.shape}, gamma is {gamma.shape}")
    check_tau(a, tau)
    m = a.shape[0]
    c = 1.0 / (2.0 * tau)
    eye = np.eye(m)
    a_norm = float(np.linalg.norm(a, 2))
    g_norm = float(np.linalg.norm(gamma, 2))
    scale = 1.0 / (2.0 * math.pi * tau)

    def integrand(w):
        F = np.linalg.solve((c + 1j * w) * eye - a, eye)
        return (F @ gamma @ F.conj().T).real

    core = 2.0 * a_norm + 1.0
    cutoff = _tail_cutoff(a_norm, g_norm, tau, quad.tol)
    tol_part = quad.tol / (2.0 * scale * 3.0)
    pieces = [quad_vec(integrand, -core, core, epsabs=tol_part, epsrel=0,
                       limit=quad.limit, full_output=True)]
    if cutoff > core:
        for sign in (1.0, -1.0):
            pieces.append(quad_vec(
                lambda u, s=sign: integrand(s / u) / (u * u),
                1.0 / cutoff, 1.0 / core, epsabs=tol_part, epsrel=0,
                limit=quad.limit, full_output=True))
    total = np.zeros((m, m))
    for value, err, info in pieces:
        # status 2 (rounding limits further refinement) is acceptable as long as
        # the error estimate already meets the budget; status 1 is the interval limit.
        if info.status == 1 or err > tol_part:
            raise QuadratureNotConverged(
                f"quadrature error estimate {err:.3g} exceeds {tol_part:.3g}")
        total += value
    p = scale * total
    return 0.5 * (p + p.T)


def _contract(tensor, mats):
    """Apply ``mats[s]`` along axis ``s`` of ``tensor``."""
    out = tensor
    for axis, mat in enumerate(mats):
        out = np.moveaxis(np.tensordot(mat, out, axes=([1], [axis])), 0, axis)
    return out


def _frequency_sums(omega, degree):
    grids = np.meshgrid(*([omega] * degree), indexing="ij")
    return np.sum(grids, axis=0)


def _validate_monomial(modes, m0, policy, j=None):
    if m0.n != modes.n:
        raise DimensionMismatch(f"moment tensor has order {m0.n}, modes have {modes.n}")
    if j is not None:
        if len(j) != m0.degree:
            raise DegreeMismatch(f"index has length {len(j)}, moments have degree {m0.degree}")
        if any(not 0 <= js < modes.n for js in j):
            raise IndexError(f"index {tuple(j)} out of range for n={modes.n}")
    if modes.n ** m0.degree > policy.max_moment_terms:
        raise ValueError(
            f"n^d = {modes.n ** m0.degree} exceeds the term budget {policy.max_moment_terms}")


def _weighted_mode_tensor(modes, m0, weights):
    # Y[k] = sum_l prod_s w[k_s, l_s] m0[l], then weight by the frequency factor.
    y = _contract(m0.entries, [modes.w] * m0.degree)
    return weights * y


def _resonance_mask(modes, degree, policy):
    sums = _frequency_sums(modes.omega, degree)
    tol = policy.resonance_tol * max(float(np.max(np.abs(modes.omega), initial=0.0)), 0.0)
    return np.abs(sums) <= tol


def discounted_moment_tensor(modes, m0, tau, policy=DEFAULT_POLICY):
    """Discounted averages of all degree-d monomials at once."""
    _validate_monomial(modes, m0, policy)
    weights = exp_char(tau, _frequency_sums(modes.omega, m0.degree))
    y = _weighted_mode_tensor(modes, m0, weights)
    return _contract(y, [modes.v] * m0.degree)


def infinite_horizon_moment_tensor(modes, m0, policy=DEFAULT_POLICY):
    """Cesaro limits of all degree-d monomials (resonant index sets only)."""
    _validate_monomial(modes, m0, policy)
    weights = _resonance_mask(modes, m0.degree, policy).astype(float)
    y = _weighted_mode_tensor(modes, m0, weights)
    return _contract(y, [modes.v] * m0.degree)


def _single(modes, m0, j, weights):
    y = _weighted_mode_tensor(modes, m0, weights)
    rows = [modes.v[js:js + 1] for js in j]
    return complex(_contract(y, rows).reshape(()))


def discounted_monomial_average(modes, j, m0, tau, policy=DEFAULT_POLICY):
    """Discounted average of ``X_{j1} ... X_{jd}`` (ordered product).

    Parameters
    ----------
    modes : ModeDecomposition
        From :func:`qhofilter.qho.diagonalize_modes`.
    j : sequence of int
        Zero-based d-index.
    m0 : MomentTensor
        Initial mixed moments of degree ``len(j)``.
    tau : float
        Discount horizon.
    """
    j = tuple(int(x) for x in j)
    _validate_monomial(modes, m0, policy, j)
    weights = exp_char(tau, _frequency_sums(modes.omega, m0.degree))
    return _single(modes, m0, j, weights)


def infinite_horizon_monomial_average(modes, j, m0, policy=DEFAULT_POLICY):
    """Infinite-horizon average: the discounted sum kept on resonant k only.

    ``k`` is resonant when ``|sum_s omega_{k_s}| <= resonance_tol * max|omega|``.
    """
    j = tuple(int(x) for x in j)
    _validate_monomial(modes, m0, policy, j)
    weights = _resonance_mask(modes, m0.degree, policy).astype(float)
    return _single(modes, m0, j, weights)


def resonant_indices(modes, degree, policy=DEFAULT_POLICY):
    """The zero-frequency-sum index set, as a list of tuples."""
    mask = _resonance_mask(modes, degree, policy)
    return [k for k in itertools.product(range(modes.n), repeat=degree) if mask[k]]
