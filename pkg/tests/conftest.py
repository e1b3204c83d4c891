"""Shared fixtures: session-scoped benchmark runs and a random-trace strategy."""

import time

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from telescope import (
    HardInstance,
    HardInstanceParams,
    IterationRecord,
    OptimizationTrace,
    RunParams,
    TraceMeta,
    run_algorithm,
    steepest_descent_armijo,
)
from telescope.problems import quartic, rosenbrock

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

# the five-accuracy grid used throughout the slow-instance experiments
GRID5 = (1e-1, 10.0**-1.5, 1e-2, 10.0**-2.5, 1e-3)


@st.composite
def valid_traces(draw, max_len: int = 28, allow_value_only: bool = True):
    """Random traces satisfying every structural invariant by construction."""
    n = draw(st.integers(min_value=0 if allow_value_only else 1, max_value=3))
    length = draw(st.integers(min_value=1, max_value=max_len))
    flags = [draw(st.booleans()) for _ in range(length - 1)]
    flags.append(draw(st.booleans()) if n == 0 else False)

    fs = [draw(st.floats(min_value=1.0, max_value=1000.0))]
    for k in range(length - 1):
        drop = draw(st.floats(min_value=1e-3, max_value=10.0)) if flags[k] else 0.0
        fs.append(fs[-1] - drop)

    omegas = [draw(st.floats(min_value=0.0, max_value=100.0))]
    for k in range(length - 1):
        if flags[k]:
            omegas.append(draw(st.floats(min_value=0.0, max_value=100.0)))
        else:
            omegas.append(omegas[-1])

    xs: list[tuple[float, ...]] = []
    if n >= 1:
        point = [draw(st.floats(min_value=-8.0, max_value=8.0)) for _ in range(n)]
        xs.append(tuple(point))
        for k in range(length - 1):
            if flags[k]:
                coord = draw(st.integers(min_value=0, max_value=n - 1))
                point = list(point)
                point[coord] += draw(st.sampled_from([0.5, -0.25, 1.0, 2.0]))
                xs.append(tuple(point))
            else:
                xs.append(tuple(point))

    records = tuple(
        IterationRecord(
            k=k,
            x=xs[k] if n >= 1 else (),
            f=fs[k],
            omega=omegas[k],
            successful=flags[k],
        )
        for k in range(length)
    )
    meta = TraceMeta(
        algorithm=draw(st.sampled_from(["sd", "tr", "ar2", "ds"])),
        problem="synthetic",
        params={"case": "random"},
        measure="gradient-norm",
        dimension=n,
    )
    return OptimizationTrace(records=records, meta=meta)


def _replicate(delta: float, max_iterations: int):
    instance = HardInstance(HardInstanceParams(alpha=0.1, delta=delta))
    diagnostics: dict = {}
    started = time.perf_counter()
    trace = steepest_descent_armijo(
        instance.as_problem(),
        RunParams(
            x0=[0.0],
            max_iterations=max_iterations,
            omega_tol=1e-3,
            options={"t_init": 0.1, "c": 0.9},
        ),
        diagnostics,
    )
    elapsed = time.perf_counter() - started
    return instance, trace, diagnostics, elapsed


@pytest.fixture(scope="session")
def replication25():
    """alpha=0.1, delta=0.25 descent run walking the knots (10^4 iterations)."""
    return _replicate(0.25, 12000)


@pytest.fixture(scope="session")
def replication10():
    """alpha=0.1, delta=0.1 run; reaches omega <= 1e-3 around iteration 1e5."""
    return _replicate(0.1, 120000)


@pytest.fixture(scope="session")
def instance001():
    """The figure-range instance: alpha=0.1, delta=0.001."""
    return HardInstance(HardInstanceParams(alpha=0.1, delta=0.001))


_CROSS_BUDGETS = {
    ("sd", "quartic"): 20000,
    ("sd", "rosenbrock"): 60000,
    ("tr", "quartic"): 20000,
    ("tr", "rosenbrock"): 20000,
    ("ar2", "quartic"): 20000,
    ("ar2", "rosenbrock"): 20000,
    ("ds", "quartic"): 20000,
    ("ds", "rosenbrock"): 80000,
}

_PROBLEM_FACTORIES = {"quartic": (quartic, [1.2]), "rosenbrock": (rosenbrock, [-1.2, 1.0])}


@pytest.fixture(scope="session")
def cross_runs():
    """Traces and diagnostics for every algorithm on quartic and Rosenbrock."""
    runs = {}
    for (algo, prob_name), budget in _CROSS_BUDGETS.items():
        factory, x0 = _PROBLEM_FACTORIES[prob_name]
        diagnostics: dict = {}
        trace = run_algorithm(
            algo,
            factory(),
            RunParams(x0=x0, max_iterations=budget, omega_tol=1e-4),
            diagnostics,
        )
        runs[(algo, prob_name)] = (trace, diagnostics)
    return runs
