"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test appends a ``criterion N: PASS|FAIL ...`` line that the
conftest hook prints in the terminal summary.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from qhofilter.cli import main
from qhofilter.coupled import gramians, hamiltonianize
from qhofilter.cqf.conditions import (closed_form_L, closed_form_M, hankelian_identity_residual,
                                      jacobi_residual, lie_forms)
from qhofilter.cqf.cost import evaluate_cost
from qhofilter.cqf.lagrange import solve_multiplier
from qhofilter.cqf.optimize import initial_observer, optimize
from qhofilter.errors import SingularCommutatorBlock, SingularP22
from qhofilter.matcore import frob, lyapunov_residual, matrix_exponential, solve_lyapunov
from qhofilter.moments import (InitialSecondMoments, MomentTensor, discounted_moment_tensor,
                               discounted_second_moments, discounted_second_moments_freq)
from qhofilter.qho import QhoModel, diagonalize_modes, dynamics_matrix, standard_ccr

from models import canonical, four_mode, random_ccr, random_hurwitz, random_observer, random_psd, reference
from oracles import fd_gradient_L, fd_gradient_sym, kron_lyapunov

ROOT = Path(__file__).resolve().parents[1]


def _record(log, number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    log.append(line)
    print(line)
    assert ok, line


def _random_points(rng, model, count):
    plant, observer, cost = model()
    return [random_observer(rng, plant, observer, cost)[1] for _ in range(count)]


def _random_state(rng, n):
    th = random_ccr(rng, n)
    sigma = random_psd(rng, n) + 2.0 * np.linalg.norm(th.matrix, 2) * np.eye(n)
    return th, InitialSecondMoments(sigma, th)


def test_criterion_1_lyapunov(acceptance_log):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst_err = worst_res = 0.0
    for k in range(50):
        n = 2 + k % 7
        a = random_hurwitz(rng, n)
        c = rng.standard_normal((n, n))
        b = c @ c.T
        g = solve_lyapunov(a, b)
        ref = kron_lyapunov(a, b)
        worst_err = max(worst_err, frob(g - ref) / frob(ref))
        worst_res = max(worst_res, lyapunov_residual(a, b, g))
    elapsed = time.perf_counter() - start
    ok = worst_err <= 1e-9 and worst_res <= 1e-10 and elapsed < 5.0
    _record(acceptance_log, 1, ok,
            f"Lyapunov vs Kronecker rel err {worst_err:.2e}, residual {worst_res:.2e}, {elapsed:.2f}s")


def test_criterion_2_symplectic(acceptance_log):
    rng = np.random.default_rng(2)
    worst_flow = worst_im = 0.0
    for k in range(20):
        n = (2, 4, 6)[k % 3]
        th, init = _random_state(rng, n)
        model = QhoModel(th, random_psd(rng, n, rank=n if k % 4 else n - 2))
        a = dynamics_matrix(model)
        for t in (0.1, 1.0, 5.0):
            e = matrix_exponential(a, t)
            worst_flow = max(worst_flow, frob(e @ th.matrix @ e.T - th.matrix) / frob(th.matrix))
        modes = diagonalize_modes(model)
        full = discounted_moment_tensor(modes, MomentTensor.second_order(init), 1.0)
        worst_im = max(worst_im, float(np.max(np.abs(full.imag - th.matrix))))
    ok = worst_flow <= 1e-9 and worst_im <= 1e-8
    _record(acceptance_log, 2, ok,
            f"CCR drift {worst_flow:.2e} (tol 1e-9), |Im E(XX^T) - Theta| {worst_im:.2e} (tol 1e-8)")


def test_criterion_3_three_routes(acceptance_log):
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    worst = 0.0
    for k in range(20):
        n = (2, 4, 6)[k % 3]
        th, init = _random_state(rng, n)
        model = QhoModel(th, random_psd(rng, n, rank=n if k % 5 else n - 2))
        a = dynamics_matrix(model)
        modes = diagonalize_modes(model)
        for tau in (0.1, 1.0, 10.0):
            p_ale = discounted_second_moments(a, init.sigma, tau)
            p_freq = discounted_second_moments_freq(a, init.gamma, tau)
            p_modes = discounted_moment_tensor(modes, MomentTensor.second_order(init), tau).real
            worst = max(worst, np.max(np.abs(p_ale - p_freq)), np.max(np.abs(p_ale - p_modes)),
                        np.max(np.abs(p_freq - p_modes)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 30.0
    _record(acceptance_log, 3, ok,
            f"ALE/frequency/mode-sum max pairwise gap {worst:.2e} (tol 1e-6), {elapsed:.2f}s")


def test_criterion_4_rotation_fixed_point(acceptance_log):
    j = np.array([[0.0, 1.0], [-1.0, 0.0]])
    worst = 0.0
    for tau in (1e-3, 0.1, 1.0, 10.0, 1e3, 1e6):
        worst = max(worst, np.max(np.abs(discounted_second_moments(j, np.eye(2), tau) - np.eye(2))))
    _record(acceptance_log, 4, worst <= 1e-10, f"A = J, Sigma = I: max |P - I| {worst:.2e}")


def test_criterion_5_duality(acceptance_log):
    rng = np.random.default_rng(5)
    worst = 0.0
    for model in (canonical, four_mode):
        for system in _random_points(rng, model, 100):
            worst = max(worst, evaluate_cost(system).duality_gap)
    _record(acceptance_log, 5, worst <= 1e-9, f"primal/dual cost rel gap {worst:.2e} over 200 points")


def test_criterion_6_gradients(acceptance_log):
    rng = np.random.default_rng(6)
    from qhofilter.cqf.cost import gradients
    worst = 0.0
    for model in (canonical, four_mode):
        plant, observer, cost = model()
        for _ in range(20):
            obs, system = random_observer(rng, plant, observer, cost)
            grad = gradients(system)

            def at(L, M):
                return evaluate_cost(system.with_parameters(L, M)).total

            L, M = obs.coupling, obs.m_energy
            fd_L = fd_gradient_L(lambda x: at(x, M), L)
            fd_M = fd_gradient_sym(lambda x: at(L, x), M)
            scale = max(frob(grad.dL) + frob(grad.dM), 1e-3 * (1 + abs(at(L, M))))
            worst = max(worst, frob(fd_L - grad.dL) / scale, frob(fd_M - grad.dM) / scale)
    _record(acceptance_log, 6, worst <= 1e-5,
            f"analytic vs central-difference gradients rel err {worst:.2e} over 40 points")


def test_criterion_7_identities(acceptance_log):
    rng = np.random.default_rng(7)
    worst_id = worst_jac = 0.0
    for model in (canonical, four_mode):
        for system in _random_points(rng, model, 100):
            pair = gramians(system)
            scale = lie_forms(system, pair).scale
            worst_id = max(worst_id, hankelian_identity_residual(system, pair) / scale)
            worst_jac = max(worst_jac, jacobi_residual(system, pair) / scale)
    ok = worst_id <= 1e-8 and worst_jac <= 1e-8
    _record(acceptance_log, 7, ok,
            f"Hankelian identity {worst_id:.2e}, Jacobi residual {worst_jac:.2e} (per scale)")


@pytest.fixture(scope="module")
def canonical_run():
    plant, observer, cost = canonical()
    start = time.perf_counter()
    res = optimize(plant, cost, initial_observer(plant, observer, 0))
    return res, time.perf_counter() - start


def test_criterion_8_synthesis(acceptance_log, canonical_run):
    res, elapsed = canonical_run
    st = res.report
    bound = 1e-6 * (1 + res.cost.total)
    ok = (res.converged and res.monotone and st.res_L <= bound and st.res_M <= bound
          and elapsed < 60.0)
    _record(acceptance_log, 8, ok,
            f"status {res.status}, {res.iterations} iterations, monotone {res.monotone}, "
            f"cost {res.cost.total:.10g}, res_L {st.res_L:.2e}, res_M {st.res_M:.2e}, "
            f"{elapsed:.2f}s")


def test_criterion_9_closed_forms(acceptance_log, canonical_run):
    res, _ = canonical_run
    system = res.system
    pair = gramians(system)
    st = res.report
    P, Q = hamiltonianize(pair, system.theta)
    scale = st.scale
    problems = []
    if not st.nondegenerate:
        problems.append(f"converged point is degenerate (min sv of [Q,P]_12 = {st.qp12_min_sv:.2e})")
    try:
        L_cf = closed_form_L(P, Q, system.cost.pi_weight, system.cost.lam, system.n)
        gap_L = frob(L_cf - system.L) / frob(system.L) if frob(system.L) > 0 else math.inf
        if not gap_L <= 1e-5:
            problems.append(f"L gap {gap_L:.2e} (|L| = {frob(system.L):.1e})")
    except SingularP22 as exc:
        problems.append(f"closed-form L: {exc}")
    try:
        M_cf = closed_form_M(P, Q, system)
        gap_M = frob(M_cf.m - system.M) / frob(system.M)
        if not gap_M <= 1e-5:
            problems.append(f"M gap {gap_M:.2e}")
    except SingularCommutatorBlock as exc:
        problems.append(f"closed-form M: {exc}")
    if st.lie_res_M > 1e-6 * scale:
        problems.append(f"[Q,P]_22 residual {st.lie_res_M:.2e}")
    if st.res_M > 1e-6 * scale:
        problems.append(f"Theta2 E22 asymmetry {st.res_M:.2e}")
    detail = "; ".join(problems) if problems else (
        f"closed forms reproduce (L, M); [Q,P]_22 {st.lie_res_M:.2e}")
    _record(acceptance_log, 9, not problems, detail)


def test_criterion_10_lagrangian(acceptance_log):
    plant, observer, cost = reference()
    r1 = optimize(plant, cost, initial_observer(plant, observer, 0)).cost.constraint_value
    sol = solve_multiplier(plant, cost, observer, r1)
    r_small = optimize(plant, cost.with_lam(1e-6),
                       initial_observer(plant, observer, 0)).cost.constraint_value
    above = solve_multiplier(plant, cost, observer, 1.01 * r_small)
    gap = abs(sol.constraint_value - r1) / r1
    ok = gap <= 1e-4 and above.status == "inactive"
    _record(acceptance_log, 10, ok,
            f"reference model: lam* = {sol.lam:.6g} ({sol.status}), rel gap {gap:.2e}; "
            f"r above lam=1e-6 value -> {above.status}")


def _numeric_close(a, b, path=""):
    if isinstance(a, dict):
        if set(a) != set(b):
            return f"{path}: keys differ"
        for k in a:
            if k in ("timestamp", "wall_clock_s", "report_hash"):
                continue
            err = _numeric_close(a[k], b[k], f"{path}.{k}")
            if err:
                return err
    elif isinstance(a, list):
        if len(a) != len(b):
            return f"{path}: lengths differ"
        for i, (x, y) in enumerate(zip(a, b)):
            err = _numeric_close(x, y, f"{path}[{i}]")
            if err:
                return err
    elif isinstance(a, float):
        if not math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12):
            return f"{path}: {a!r} vs {b!r}"
    elif a != b:
        return f"{path}: {a!r} vs {b!r}"
    return None


def test_criterion_11_golden(acceptance_log, tmp_path):
    out = tmp_path / "report.json"
    code = main(["synth", "--config", str(ROOT / "configs" / "canonical.toml"),
                 "--report", str(out), "--quiet"])
    golden = json.loads((ROOT / "tests" / "golden" / "canonical_report.json").read_text())
    err = _numeric_close(json.loads(out.read_text()), golden) if code == 0 else f"exit {code}"
    _record(acceptance_log, 11, err is None,
            "synth report matches golden file" if err is None else f"mismatch at {err}")
