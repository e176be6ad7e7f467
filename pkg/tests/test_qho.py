import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhofilter.errors import DefectiveMatrix, DimensionMismatch, InvalidSpec, NotPositiveSemidefinite
from qhofilter.matcore import matrix_exponential
from qhofilter.qho import (J2, CcrMatrix, QhoModel, check_hamiltonian, diagonalize_modes,
                           dynamics_matrix, standard_ccr)

from models import random_ccr, random_psd, random_qho


def test_ccr_validation():
    with pytest.raises(InvalidSpec):
        CcrMatrix(np.zeros((3, 3)))
    with pytest.raises(InvalidSpec):
        CcrMatrix(np.eye(2))
    with pytest.raises(InvalidSpec):
        CcrMatrix(np.zeros((2, 2)))
    with pytest.raises(DimensionMismatch):
        CcrMatrix(np.zeros((2, 3)))


def test_ccr_is_exactly_antisymmetric():
    th = np.array([[0.0, 0.5 + 1e-14], [-0.5, 0.0]])
    m = CcrMatrix(th).matrix
    assert np.array_equal(m, -m.T)


def test_ccr_equality_and_blocks():
    a = standard_ccr(2)
    b = CcrMatrix(0.5 * J2)
    assert a == b and hash(a) == hash(b)
    assert a != standard_ccr(2, scale=1.0)
    big = CcrMatrix.block_diag(a, standard_ccr(4))
    assert big.order == 6
    assert np.array_equal(big.matrix, standard_ccr(6).matrix)
    assert np.allclose(a.inverse(), -2.0 * J2)


def test_model_requires_symmetric_energy():
    with pytest.raises(InvalidSpec):
        QhoModel(standard_ccr(2), np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(DimensionMismatch):
        QhoModel(standard_ccr(2), np.eye(4))


def test_dynamics_matrix_is_hamiltonian(rng):
    for n in (2, 4, 6):
        b = rng.standard_normal((n, n))
        model = QhoModel(random_ccr(rng, n), b + b.T)
        a = dynamics_matrix(model)
        assert check_hamiltonian(a, model.theta).ok


def test_check_hamiltonian_detects_violation():
    th = standard_ccr(2)
    result = check_hamiltonian(np.diag([1.0, 2.0]), th)
    assert not result.ok and result.residual > 0.1


def test_rotation_modes():
    modes = diagonalize_modes(QhoModel(standard_ccr(2), np.eye(2)))
    assert np.allclose(modes.omega, [1.0, -1.0])
    c1 = 0.5 * np.array([[1.0, -1j], [1j, 1.0]])
    assert np.allclose(modes.mode_matrices[0], c1, atol=1e-15)
    assert np.allclose(modes.mode_matrices[1], c1.conj(), atol=1e-15)


@pytest.mark.parametrize("rank", [None, 4, 2, 0])
def test_modes_reconstruct_flow(rng, rank):
    model = random_qho(rng, 6, rank)
    modes = diagonalize_modes(model)
    a = dynamics_matrix(model)
    assert np.allclose(modes.v @ modes.w, np.eye(6), atol=1e-10)
    assert np.allclose(modes.mode_matrices.sum(axis=0), np.eye(6), atol=1e-10)
    assert np.all(modes.omega[:3] >= 0)
    assert np.allclose(modes.omega[3:], -modes.omega[:3])
    for t in (0.3, 2.0):
        ref = matrix_exponential(a, t)
        assert np.allclose(modes.evolution(t), ref, atol=1e-9)
        assert np.allclose(modes.evolution_real(t), ref, atol=1e-9)


def test_degenerate_frequencies(rng):
    # Two identical oscillators: a doubly degenerate frequency.
    model = QhoModel(standard_ccr(4), np.eye(4))
    modes = diagonalize_modes(model)
    assert np.allclose(modes.omega, [1, 1, -1, -1])
    assert np.allclose(modes.evolution(1.0), matrix_exponential(dynamics_matrix(model)), atol=1e-12)


def test_indefinite_energy_rejected():
    with pytest.raises(NotPositiveSemidefinite):
        diagonalize_modes(QhoModel(standard_ccr(2), np.diag([1.0, -1.0])))


def test_jordan_block_rejected():
    # Free particle: R = diag(1, 0) makes A nilpotent.
    with pytest.raises(DefectiveMatrix):
        diagonalize_modes(QhoModel(standard_ccr(2), np.diag([1.0, 0.0])))


def test_decomposition_is_deterministic(rng):
    model = random_qho(rng, 4)
    a, b = diagonalize_modes(model), diagonalize_modes(model)
    assert np.array_equal(a.v, b.v) and np.array_equal(a.omega, b.omega)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 4, 6]), st.integers(0, 2**32 - 1), st.sampled_from([0.1, 1.0, 5.0]))
def test_flow_preserves_ccr(n, seed, t):
    rng = np.random.default_rng(seed)
    th = random_ccr(rng, n)
    model = QhoModel(th, random_psd(rng, n))
    e = matrix_exponential(dynamics_matrix(model), t)
    assert np.linalg.norm(e @ th.matrix @ e.T - th.matrix) <= 1e-9 * np.linalg.norm(th.matrix)
