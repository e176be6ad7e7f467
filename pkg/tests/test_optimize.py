import math

import numpy as np
import pytest

from qhofilter.coupled import PlantSpec
from qhofilter.cqf.optimize import (OptimizerOptions, initial_observer, max_workers, multistart,
                                    optimize)
from qhofilter.errors import InitNotAdmissible, InvalidSpec, NoDescentDirection

from models import canonical, four_mode, reference

REFERENCE_COST = 4.8671096378


def test_initial_family():
    plant, observer, _ = four_mode()
    for seed in range(4):
        obs = initial_observer(plant, observer, seed)
        assert np.array_equal(obs.m_energy, np.eye(4))
        energy = np.block([[plant.k_energy, obs.coupling], [obs.coupling.T, obs.m_energy]])
        assert np.linalg.eigvalsh(energy)[0] >= -1e-12
    a = initial_observer(plant, observer, 3)
    b = initial_observer(plant, observer, 3)
    assert np.array_equal(a.coupling, b.coupling)
    assert not np.array_equal(a.coupling, initial_observer(plant, observer, 4).coupling)


def test_initial_scale():
    plant, observer, _ = canonical()
    obs = initial_observer(plant, observer, 0)
    assert np.linalg.norm(obs.coupling, 2) == pytest.approx(0.1)


def test_canonical_converges_to_zero_coupling():
    plant, observer, cost = canonical()
    res = optimize(plant, cost, initial_observer(plant, observer, 0))
    assert res.converged and res.monotone
    assert res.cost.total == pytest.approx(4.0, rel=1e-9)
    assert np.linalg.norm(res.observer.coupling) <= 1e-6
    assert res.report.is_stationary(1e-6)
    assert res.cost.total <= res.initial_cost


def test_reference_converges():
    plant, observer, cost = reference()
    res = optimize(plant, cost, initial_observer(plant, observer, 0))
    assert res.converged and res.monotone
    assert res.cost.total == pytest.approx(REFERENCE_COST, rel=1e-9)
    tol = OptimizerOptions().gradient_tolerance(res.cost.total)
    assert res.gradient.max_norm <= tol
    assert res.report.res_L <= tol / 4 * (1 + 1e-12)
    assert res.report.res_M <= tol / 2 * (1 + 1e-12)
    rows = [r.as_tuple() for r in res.trace]
    assert [r[0] for r in rows] == list(range(len(rows)))


def test_stationary_start_returns_immediately():
    plant, observer, cost = canonical()
    res = optimize(plant, cost, observer)  # L = 0, M = I is stationary
    assert res.converged and res.iterations == 0


def test_inadmissible_start():
    plant, observer, cost = canonical()
    bad = observer.with_parameters(np.diag([2.0, 0.0]), np.eye(2))
    with pytest.raises(InitNotAdmissible) as info:
        optimize(plant, cost, bad)
    assert info.value.bound == pytest.approx(0.5)


def test_indefinite_plant_energy_rejected():
    plant, observer, cost = canonical()
    plant = PlantSpec(plant.theta1, np.diag([1.0, -1.0]), plant.sigma1, plant.s1)
    with pytest.raises(InvalidSpec) as info:
        optimize(plant, cost, observer)
    assert info.value.field == "plant.k_energy"


def test_iteration_cap_returns_best_iterate():
    plant, observer, cost = reference()
    res = optimize(plant, cost, initial_observer(plant, observer, 0), OptimizerOptions(max_iter=2))
    assert res.status == "iteration_cap" and not res.converged
    assert res.iterations == 2
    assert res.cost.total == min(r.cost for r in res.trace)


def test_failed_line_search_carries_result():
    plant, observer, cost = reference()
    options = OptimizerOptions(min_step=1e3, initial_step=1.0)
    with pytest.raises(NoDescentDirection) as info:
        optimize(plant, cost, initial_observer(plant, observer, 0), options)
    assert info.value.result is not None
    assert info.value.result.status == "no_descent"


def test_margin_floor_is_respected():
    plant, observer, cost = four_mode()
    options = OptimizerOptions(margin_floor=1.0)
    res = optimize(plant, cost, initial_observer(plant, observer, 0), options)
    assert all(r.margin >= 1.0 for r in res.trace)


def test_trace_is_monotone_on_larger_model():
    plant, observer, cost = four_mode()
    res = optimize(plant, cost, initial_observer(plant, observer, 1))
    assert res.converged and res.monotone
    assert res.report.is_stationary(1e-6)


@pytest.fixture(scope="module")
def reference_multistart():
    plant, observer, cost = reference()
    return multistart(plant, cost, observer, range(8), workers=1)


def test_multistart_agrees(reference_multistart):
    ms = reference_multistart
    assert [r.seed for r in ms.results] == list(range(8))
    assert len(ms.converged) == 8
    costs = [r.cost.total for r in ms.converged]
    assert (max(costs) - min(costs) <= 1e-4 * min(costs)) != ms.multiple_stationary_values
    assert ms.best.cost.total == min(costs)


def test_multistart_parallel_matches_serial(reference_multistart):
    plant, observer, cost = reference()
    par = multistart(plant, cost, observer, range(4), workers=2)
    for a, b in zip(par.results, reference_multistart.results[:4]):
        assert a.seed == b.seed
        assert np.array_equal(a.observer.coupling, b.observer.coupling)
        assert a.cost.total == b.cost.total


def test_multistart_flags_distinct_values():
    from qhofilter.cqf.optimize import MultiStartResult

    class Fake:
        def __init__(self, c):
            self.cost = type("C", (), {"total": c})()
            self.converged = True
            self.seed = 0

    assert MultiStartResult((Fake(1.0), Fake(1.1)), ()).multiple_stationary_values
    assert not MultiStartResult((Fake(1.0), Fake(1.0 + 1e-6)), ()).multiple_stationary_values


def test_worker_cap_from_environment(monkeypatch):
    monkeypatch.setenv("QHOFILTER_MAX_WORKERS", "3")
    assert max_workers() == 3
    monkeypatch.setenv("QHOFILTER_MAX_WORKERS", "zero")
    assert max_workers() == 1
    monkeypatch.delenv("QHOFILTER_MAX_WORKERS")
    assert max_workers() == 1


def test_default_tolerances():
    opts = OptimizerOptions()
    assert opts.gradient_tolerance(4.0) == pytest.approx(5e-7)
    assert opts.floor(2.0) == pytest.approx(5e-4)
    assert OptimizerOptions(gtol=1e-3).gradient_tolerance(100.0) == 1e-3
    assert math.isfinite(opts.max_step)
