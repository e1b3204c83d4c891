"""Problem oracles: finite-difference consistency and counter discipline."""

import numpy as np
import pytest

from telescope.problems import (
    OracleError,
    Problem,
    hard_instance_problem,
    make_problem,
    quartic,
    rosenbrock,
    separable_nonconvex,
)
from telescope.problems import test_problems as problem_suite


def central_diff(problem, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h * max(1.0, abs(x[i]))
        out[i] = (problem.value(x + step) - problem.value(x - step)) / (2.0 * step[i])
    return out


def test_quartic_values():
    prob = quartic()
    assert prob.value([1.0]) == pytest.approx(0.25)
    assert prob.gradient([1.0])[0] == pytest.approx(1.0)
    assert prob.hessian([2.0])[0, 0] == pytest.approx(12.0)


def test_rosenbrock_minimizer():
    prob = rosenbrock()
    assert prob.value([1.0, 1.0]) == 0.0
    assert np.allclose(prob.gradient([1.0, 1.0]), [0.0, 0.0])


def test_gradients_match_central_differences():
    rng = np.random.default_rng(314159)
    for prob in problem_suite():
        if prob.name.startswith("hard-instance"):
            # sample inside the cached range, away from curvature jumps where
            # a central stencil straddling a knot is not a valid oracle
            from telescope.hard_instance import HardInstance, HardInstanceParams

            inst = HardInstance(HardInstanceParams(0.1, 0.25))
            knots = np.array([inst.knot_x(k) for k in range(40)])
            points = []
            while len(points) < 100:
                x = rng.uniform(0.0, inst.knot_x(30))
                if np.min(np.abs(knots - x)) > 1e-4:
                    points.append([x])
        else:
            points = rng.uniform(-2.0, 2.0, size=(100, prob.dimension))
        for x in points:
            g = prob.gradient(x)
            fd = central_diff(prob, x)
            denom = max(1.0, float(np.linalg.norm(g)), float(np.linalg.norm(fd)))
            assert float(np.linalg.norm(fd - g)) <= 1e-5 * denom, (prob.name, x)


def test_hessians_match_gradient_differences():
    rng = np.random.default_rng(99)
    for prob in (quartic(), rosenbrock(), separable_nonconvex(3)):
        for _ in range(20):
            x = rng.uniform(-2.0, 2.0, size=prob.dimension)
            H = prob.hessian(x)
            for i in range(prob.dimension):
                step = np.zeros(prob.dimension)
                step[i] = 1e-6 * max(1.0, abs(x[i]))
                col = (prob.gradient(x + step) - prob.gradient(x - step)) / (2.0 * step[i])
                assert np.linalg.norm(col - H[:, i]) <= 1e-4 * max(1.0, np.linalg.norm(H[:, i]))


def test_counters_increment_by_one_per_call():
    prob = quartic()
    assert prob.counts.values == 0
    prob.value([1.0])
    prob.value([2.0])
    prob.gradient([1.0])
    prob.gradient_audit([1.0])
    prob.hessian([1.0])
    assert prob.counts.values == 2
    assert prob.counts.gradients == 1
    assert prob.counts.audit_gradients == 1
    assert prob.counts.hessians == 1


def test_missing_hessian_raises():
    prob = Problem("lin", 1, lambda x: float(x[0]), lambda x: np.ones(1))
    assert not prob.has_hessian
    with pytest.raises(OracleError):
        prob.hessian([0.0])


def test_separable_is_nonconvex_but_bounded_below():
    prob = separable_nonconvex(2)
    # negative curvature exists (half-period points), yet f >= 0 everywhere
    H = prob.hessian([np.pi / 2, np.pi / 2])
    assert np.min(np.linalg.eigvalsh(H)) < 0
    rng = np.random.default_rng(5)
    for _ in range(200):
        assert prob.value(rng.uniform(-6, 6, size=2)) >= 0.0


def test_make_problem_unknown_name():
    with pytest.raises(KeyError, match="quartic"):
        make_problem("mystery")


def test_make_problem_defaults():
    prob, x0 = make_problem("rosenbrock")
    assert prob.dimension == len(x0) == 2
    prob, x0 = make_problem("separable", n=6)
    assert prob.dimension == len(x0) == 6
    prob, x0 = make_problem("hard-instance", alpha=0.1, delta=0.25)
    assert prob.dimension == 1 and x0 == [0.0]
    assert prob.value([0.0]) == pytest.approx(2.6123753486854877)
