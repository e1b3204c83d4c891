"""Optimizer behavior: hand-checked steps, success semantics, post-hoc
sufficient-decrease assertions, and the documented audit-constant mappings."""

import math

import numpy as np
import pytest

from telescope import (
    RunParams,
    TheoremConstants,
    audit,
    audit_constants_for,
    check_growth,
    check_sufficient_decrease,
    run_algorithm,
)
from telescope.optimizers import (
    LinesearchError,
    _cubic_reg_step,
    ar2,
    direct_search,
    growth_constants_from_streaks,
    steepest_descent_armijo,
    trust_region_first_order,
)
from telescope.problems import OracleError, Problem, quartic, rosenbrock


def one_d(name, f, g, h=None):
    return Problem(
        name,
        1,
        lambda x: f(x[0]),
        lambda x: np.array([g(x[0])]),
        (lambda x: np.array([[h(x[0])]])) if h else None,
    )


def parabola():
    return one_d("parabola", lambda v: v * v, lambda v: 2.0 * v, lambda v: 2.0)


def half_square(n=2):
    return Problem(
        "half-square",
        n,
        lambda x: 0.5 * float(x @ x),
        lambda x: x.copy(),
        lambda x: np.eye(n),
    )


# ------------------------------------------------------------------- armijo --


def test_sd_fixed_contraction_on_parabola():
    # t = 0.4 accepted every step: x_{k+1} = x_k - 0.4*2x_k = 0.2*x_k
    diag = {}
    trace = steepest_descent_armijo(
        parabola(),
        RunParams(x0=[1.0], max_iterations=20, omega_tol=1e-6,
                  options={"t_init": 0.4, "c": 0.5}),
        diag,
    )
    assert diag["backtracks_total"] == 0
    assert all(t == 0.4 for t in diag["stepsizes"])
    for k, rec in enumerate(trace.records):
        assert rec.x[0] == pytest.approx(0.2**k, rel=1e-12)
    ratios = [
        trace.records[k + 1].omega / trace.records[k].omega
        for k in range(len(trace) - 2)
    ]
    assert all(r == pytest.approx(0.2, rel=1e-12) for r in ratios)


def test_sd_exact_minimizer_hit_stops():
    trace = steepest_descent_armijo(
        half_square(),
        RunParams(x0=[3.0, -4.0], max_iterations=50, omega_tol=0.0,
                  options={"t_init": 1.0, "c": 0.5}),
    )
    assert len(trace) == 2
    assert trace.records[0].successful
    assert trace.records[1].omega == 0.0
    assert trace.records[1].x == (0.0, 0.0)


def test_sd_armijo_condition_holds_posthoc(cross_runs):
    for prob_name in ("quartic", "rosenbrock"):
        trace, diag = cross_runs[("sd", prob_name)]
        c = float(trace.meta.params["c"])
        steps = diag["stepsizes"]
        successful = [r for r in trace.records if r.successful]
        assert len(steps) == len(successful)
        for rec, t in zip(successful, steps):
            decrease = rec.f - trace.records[rec.k + 1].f
            assert decrease >= c * t * rec.omega**2 - 1e-12 * abs(rec.f)


def test_sd_linesearch_failure_on_ascent_oracle():
    # gradient oracle points uphill: no stepsize can satisfy the test
    # (j_max kept small enough that the trial stays resolvable in float)
    liar = one_d("liar", lambda v: v * v, lambda v: -2.0 * v)
    with pytest.raises(LinesearchError):
        steepest_descent_armijo(
            liar,
            RunParams(x0=[1.0], max_iterations=5, omega_tol=0.0, options={"j_max": 30}),
        )


def test_sd_records_backtrack_metadata():
    trace = steepest_descent_armijo(
        parabola(), RunParams(x0=[1.0], max_iterations=5, omega_tol=1e-3)
    )
    assert "backtracks_total" in trace.meta.params
    assert trace.meta.params["stopped_by"] in ("omega_tol", "max_iterations")
    assert trace.meta.params["beta_classical"] == "2"


# ------------------------------------------------------------- trust region --


def test_tr_newton_step_on_quadratic():
    diag = {}
    trace = trust_region_first_order(
        one_d("halfsq", lambda v: 0.5 * v * v, lambda v: v, lambda v: 1.0),
        RunParams(x0=[2.0], max_iterations=10, omega_tol=1e-10,
                  options={"delta0": 10.0}),
        diag,
    )
    assert trace.records[0].successful
    assert diag["ratios"][0] == pytest.approx(1.0)
    assert trace.records[1].x[0] == pytest.approx(0.0, abs=1e-15)


def test_tr_unsuccessful_iteration_carries_values():
    # zero-curvature model with a huge radius overshoots the parabola badly
    diag = {}
    trace = trust_region_first_order(
        parabola(),
        RunParams(x0=[1.0], max_iterations=3, omega_tol=1e-12,
                  options={"use_hessian": 0.0, "delta0": 64.0}),
        diag,
    )
    first, second = trace.records[0], trace.records[1]
    assert not first.successful
    assert second.f == first.f and second.omega == first.omega and second.x == first.x
    assert diag["radii"][1] == pytest.approx(32.0)


def test_tr_success_decrease_matches_ratio_test(cross_runs):
    for prob_name in ("quartic", "rosenbrock"):
        trace, diag = cross_runs[("tr", prob_name)]
        eta1 = float(trace.meta.params["eta1"])
        idx = 0
        for rec in trace.records[:-1]:
            model_dec = diag["model_decreases"][idx]
            if rec.successful:
                decrease = rec.f - trace.records[rec.k + 1].f
                assert decrease >= eta1 * model_dec - 1e-12 * abs(rec.f)
            idx += 1


def test_tr_quartic_audit_passes(cross_runs):
    trace, _ = cross_runs[("tr", "quartic")]
    constants = audit_constants_for(trace)
    assert check_sufficient_decrease(trace, constants)[0].ok
    assert check_growth(trace, constants).ok


# ---------------------------------------------------------------------- ar2 --


def test_cubic_step_pure_gradient_case():
    # minimize s + |s|^3: stationary point solves 3*s*|s| = -1
    s = _cubic_reg_step(np.array([1.0]), np.array([[0.0]]), 3.0, 1e-10)
    assert s[0] == pytest.approx(-1.0 / math.sqrt(3.0), rel=1e-9)
    grid = np.linspace(-2.0, 2.0, 400001)
    values = grid + 1.0 * grid**3 * np.sign(grid)  # g*s + (sigma/3)|s|^3
    assert abs(grid[np.argmin(values)] - s[0]) <= 1e-5


def test_cubic_step_sign_and_convex_case():
    s = _cubic_reg_step(np.array([1.0]), np.array([[1.0]]), 50.0, 1e-10)
    assert s[0] < 0.0
    # against dense 1-D minimization of the full model
    grid = np.linspace(-1.0, 1.0, 400001)
    model = grid + 0.5 * grid**2 + (50.0 / 3.0) * np.abs(grid) ** 3
    assert abs(grid[np.argmin(model)] - s[0]) <= 1e-5


def test_cubic_step_indefinite_hessian():
    H = np.diag([-2.0, 1.0])
    g = np.array([0.3, -0.7])
    sigma = 1.5
    s = _cubic_reg_step(g, H, sigma, 1e-10)
    lam = sigma * float(np.linalg.norm(s))
    assert np.linalg.norm(H @ s + lam * s + g) <= 1e-7
    assert lam >= 2.0 - 1e-9  # H + lam I must be positive semidefinite


def test_ar2_requires_hessian():
    with pytest.raises(OracleError):
        ar2(one_d("nohess", lambda v: v * v, lambda v: 2 * v),
            RunParams(x0=[1.0], max_iterations=3, omega_tol=0.0))


def test_ar2_success_decrease_matches_ratio_test(cross_runs):
    for prob_name in ("quartic", "rosenbrock"):
        trace, diag = cross_runs[("ar2", prob_name)]
        eta1 = float(trace.meta.params["eta1"])
        for idx, rec in enumerate(trace.records[:-1]):
            if rec.successful:
                decrease = rec.f - trace.records[rec.k + 1].f
                assert decrease >= eta1 * diag["model_decreases"][idx] - 1e-12 * abs(rec.f)


def test_ar2_rosenbrock_converges_fast(cross_runs):
    trace, _ = cross_runs[("ar2", "rosenbrock")]
    assert trace.records[-1].omega <= 1e-4
    assert len(trace) < 200


# -------------------------------------------------------------- direct search --


def test_ds_first_poll_success_example():
    diag = {}
    trace = direct_search(
        parabola(),
        RunParams(x0=[1.0], max_iterations=3, omega_tol=1e-12,
                  options={"alpha0": 0.5, "c": 1e-4}),
        diag,
    )
    assert trace.records[0].successful
    assert trace.records[1].x == (0.5,)  # +e1 fails, -e1 succeeds


def test_ds_near_minimizer_all_polls_fail():
    # essentially at the minimizer of a strictly convex quadratic: every poll
    # point increases f, so iterations stay unsuccessful and the mesh halves
    # (an exactly critical start stops immediately: omega = 0 <= tol)
    diag = {}
    trace = direct_search(
        half_square(1),
        RunParams(x0=[1e-8], max_iterations=4, omega_tol=1e-12, options={"alpha0": 0.7}),
        diag,
    )
    assert not any(rec.successful for rec in trace.records)
    assert diag["meshes"] == pytest.approx([0.7, 0.35, 0.175, 0.0875])
    omegas = {rec.omega for rec in trace.records}
    assert len(omegas) == 1  # carried over unchanged across failures


def test_ds_forcing_inequality_posthoc(cross_runs):
    for prob_name in ("quartic", "rosenbrock"):
        trace, diag = cross_runs[("ds", prob_name)]
        c = float(trace.meta.params["c"])
        for idx, rec in enumerate(trace.records[:-1]):
            if rec.successful:
                decrease = rec.f - trace.records[rec.k + 1].f
                assert decrease >= c * diag["meshes"][idx] ** 2 - 1e-12 * abs(rec.f)


def test_ds_gradient_calls_are_audit_only():
    prob = parabola()
    direct_search(prob, RunParams(x0=[1.0], max_iterations=10, omega_tol=1e-6))
    assert prob.counts.gradients == 0
    assert prob.counts.audit_gradients > 0


# ------------------------------------------------------------------ plumbing --


def test_run_params_validation():
    with pytest.raises(ValueError):
        RunParams(x0=[1.0], max_iterations=0)
    with pytest.raises(ValueError):
        RunParams(x0=[1.0], omega_tol=-1.0)
    with pytest.raises(ValueError, match="unknown option"):
        steepest_descent_armijo(
            parabola(), RunParams(x0=[1.0], max_iterations=2, options={"bogus": 1.0})
        )


def test_run_algorithm_dispatch():
    with pytest.raises(KeyError, match="sd"):
        run_algorithm("nope", parabola(), RunParams(x0=[1.0], max_iterations=2))
    trace = run_algorithm("ar2", rosenbrock(), RunParams(x0=[-1.2, 1.0], max_iterations=60, omega_tol=1e-3))
    assert trace.meta.params["beta_classical"] == "1.5"
    assert trace.meta.params["evals_hessians"] != "0"


def test_every_trace_stops_with_final_record(cross_runs):
    for (algo, prob_name), (trace, diag) in cross_runs.items():
        last = trace.records[-1]
        assert not last.successful
        assert trace.meta.params["stopped_by"] in ("omega_tol", "max_iterations", "stalled")
        assert trace.meta.algorithm
        assert trace.meta.dimension == len(last.x)


def test_growth_constants_mapping_values():
    ka, kb, kc = growth_constants_from_streaks(2.0, 0.5, 1.0)
    assert ka == pytest.approx(2.0)
    assert kb == pytest.approx(1.0 / math.log(2.0))
    assert kc == pytest.approx(14.0 / math.log(2.0) + 1.0)


def test_audit_constants_per_algorithm(cross_runs):
    trace_sd, _ = cross_runs[("sd", "quartic")]
    consts = audit_constants_for(trace_sd)
    assert (consts.kappa_a, consts.kappa_b, consts.kappa_c) == (1.0, 0.0, 0.0)
    assert consts.beta == 2.0
    trace_ar2, _ = cross_runs[("ar2", "quartic")]
    consts2 = audit_constants_for(trace_ar2)
    assert consts2.beta == 1.5 and consts2.kappa_b == 0.0 and consts2.kappa_a == 2.0


def test_all_algorithms_pass_their_audits(cross_runs):
    grid = (1e-1, 1e-2, 1e-3, 1e-4)
    for (algo, prob_name), (trace, _) in cross_runs.items():
        constants = audit_constants_for(trace)
        report = audit(trace, constants, grid)
        assert report.kstop_ok and report.succ_ok and report.growth_ok, (algo, prob_name)
        for row in report.k_eps_table:
            assert row.bound8_ok is not False, (algo, prob_name, row)
            assert row.card_ok is not False, (algo, prob_name, row)
