"""Smooth test objectives wrapped as counted oracles.

A :class:`Problem` bundles value/gradient/(optional) Hessian callables with
per-instance evaluation counters.  Oracles must be pure; counters are the
only mutable state, so distinct runs should use distinct instances.
Gradient calls made purely for auditing (derivative-free methods report an
optimality measure they never use) go through :meth:`Problem.gradient_audit`
and are counted separately to keep evaluation budgets honest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "EvalCounts",
    "Problem",
    "OracleError",
    "quartic",
    "rosenbrock",
    "separable_nonconvex",
    "hard_instance_problem",
    "test_problems",
    "make_problem",
    "PROBLEM_NAMES",
]


class OracleError(RuntimeError):
    """An objective oracle is missing or failed to deliver."""


@dataclass
class EvalCounts:
    values: int = 0
    gradients: int = 0
    hessians: int = 0
    audit_gradients: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "values": self.values,
            "gradients": self.gradients,
            "hessians": self.hessians,
            "audit_gradients": self.audit_gradients,
        }


class Problem:
    """Objective oracle (value, gradient, optional Hessian) with counters."""

    def __init__(
        self,
        name: str,
        dimension: int,
        value: Callable[[np.ndarray], float],
        gradient: Callable[[np.ndarray], np.ndarray],
        hessian: Callable[[np.ndarray], np.ndarray] | None = None,
        bounded_below: bool = True,
    ):
        self.name = name
        self.dimension = int(dimension)
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self.bounded_below = bounded_below
        self.counts = EvalCounts()

    @property
    def has_hessian(self) -> bool:
        return self._hessian is not None

    def value(self, x: Sequence[float] | np.ndarray) -> float:
        self.counts.values += 1
        return float(self._value(np.asarray(x, dtype=float)))

    def gradient(self, x: Sequence[float] | np.ndarray) -> np.ndarray:
        self.counts.gradients += 1
        return np.asarray(self._gradient(np.asarray(x, dtype=float)), dtype=float)

    def gradient_audit(self, x: Sequence[float] | np.ndarray) -> np.ndarray:
        # Same oracle, separate counter: these calls never steer the run.
        self.counts.audit_gradients += 1
        return np.asarray(self._gradient(np.asarray(x, dtype=float)), dtype=float)

    def hessian(self, x: Sequence[float] | np.ndarray) -> np.ndarray:
        if self._hessian is None:
            raise OracleError(f"problem {self.name!r} has no Hessian oracle")
        self.counts.hessians += 1
        return np.asarray(self._hessian(np.asarray(x, dtype=float)), dtype=float)


def quartic() -> Problem:
    """1-D f(x) = x^4/4: slow first-order decay toward the flat minimizer."""
    return Problem(
        name="quartic",
        dimension=1,
        value=lambda x: 0.25 * x[0] ** 4,
        gradient=lambda x: np.array([x[0] ** 3]),
        hessian=lambda x: np.array([[3.0 * x[0] ** 2]]),
    )


def rosenbrock() -> Problem:
    """2-D Rosenbrock valley, minimizer (1, 1) with value 0."""

    def value(x):
        return (1.0 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2

    def gradient(x):
        return np.array(
            [
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] ** 2),
                200.0 * (x[1] - x[0] ** 2),
            ]
        )

    def hessian(x):
        return np.array(
            [
                [2.0 - 400.0 * x[1] + 1200.0 * x[0] ** 2, -400.0 * x[0]],
                [-400.0 * x[0], 200.0],
            ]
        )

    return Problem("rosenbrock", 2, value, gradient, hessian)


def separable_nonconvex(n: int = 4) -> Problem:
    """n-D f(x) = sum_i x_i^2 + 4 sin^2(x_i): nonconvex, bounded below by 0."""

    def value(x):
        return float(np.sum(x**2 + 4.0 * np.sin(x) ** 2))

    def gradient(x):
        return 2.0 * x + 4.0 * np.sin(2.0 * x)

    def hessian(x):
        return np.diag(2.0 + 8.0 * np.cos(2.0 * x))

    return Problem(f"separable-{n}d", n, value, gradient, hessian)


def hard_instance_problem(alpha: float = 0.1, delta: float = 0.25) -> Problem:
    """The univariate slow-convergence benchmark wrapped as a Problem."""
    from .hard_instance import HardInstance, HardInstanceParams

    return HardInstance(HardInstanceParams(alpha=alpha, delta=delta)).as_problem()


def test_problems() -> list[Problem]:
    """Fresh instances of the whole suite (counters start at zero)."""
    return [quartic(), rosenbrock(), separable_nonconvex(), hard_instance_problem()]


_DEFAULT_X0 = {
    "quartic": [1.2],
    "rosenbrock": [-1.2, 1.0],
    "separable": [2.0, 2.0, 2.0, 2.0],
    "hard-instance": [0.0],
}

PROBLEM_NAMES = tuple(sorted(_DEFAULT_X0))


def make_problem(
    name: str, alpha: float = 0.1, delta: float = 0.25, n: int = 4
) -> tuple[Problem, list[float]]:
    """CLI factory: problem instance plus its default starting point."""
    if name == "quartic":
        return quartic(), list(_DEFAULT_X0[name])
    if name == "rosenbrock":
        return rosenbrock(), list(_DEFAULT_X0[name])
    if name == "separable":
        return separable_nonconvex(n), [2.0] * n
    if name == "hard-instance":
        return hard_instance_problem(alpha, delta), list(_DEFAULT_X0[name])
    raise KeyError(
        f"unknown problem {name!r}; valid names: {', '.join(PROBLEM_NAMES)}"
    )
