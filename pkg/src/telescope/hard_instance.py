"""Univariate slow-convergence benchmark built from closed-form knot data.

Four sequences parametrized by alpha in (0, 1] and delta > 0 define the
instance:

* gradients   g_0 = -2,            g_k = -k**(-(1/2+delta))      (k >= 1),
* values      f_0 = zeta(1+2*delta), f_1 = f_0 - 4*alpha,
              f_{k+1} = f_k - alpha * k**(-(1+2*delta))          (k >= 1),
* knots       x_0 = 0, x_1 = 2*alpha,
              x_{k+1} = x_k + alpha * k**(-(1/2+delta))          (k >= 1),
* steps       s_k = x_{k+1} - x_k  (= -alpha * g_k for every k).

Each knot pair is joined by the unique cubic matching values and slopes at
both ends, giving a C^1 objective on [0, inf) whose gradient norm at knot k
is exactly |g_k| and whose per-step decrease is alpha * g_k**2; the left of
the origin is the linear extension f(x) = f_0 - 2x.  Gradient descent with
stepsize alpha therefore walks the knots one per iteration, and the first
index with |g_k| <= eps has the closed form ceil(eps**(-1/(1/2+delta))).

Numeric conventions: the knot abscissas accumulate with plain float64
addition so that the optimizer update ``x - alpha*g`` reproduces them bit
for bit, while the values f_k accumulate with compensated summation.  The
knot table extends lazily (doubling) up to a hard cap.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import mpmath as mp
import numpy as np

from .problems import Problem

__all__ = [
    "HardInstanceParams",
    "HardInstance",
    "HermiteReport",
    "SegmentCubic",
    "CurveValues",
    "CurveSample",
    "HorizonError",
    "zeta",
    "hermite_cubic",
    "knot_gradient_magnitude",
    "predicted_k_eps",
    "write_knot_csv",
    "write_curve_csv",
]


class HorizonError(RuntimeError):
    """An evaluation would need more knots than the configured cap allows."""


def zeta(s: float) -> float:
    """Riemann zeta for s > 1 by Euler-Maclaurin summation.

    Sums N-1 leading terms plus the integral tail, the boundary term and the
    Bernoulli corrections through B_8, with N = max(20, ceil(10/(s-1)))
    capped at 1e6; relative error stays well below 1e-10 down to s barely
    above 1 because the tail expansion carries the divergence.
    """
    s = float(s)
    if not s > 1.0:
        raise ValueError(f"zeta is evaluated for s > 1 only, got {s}")
    n = min(1_000_000, max(20, math.ceil(10.0 / (s - 1.0))))
    head = math.fsum(k ** (-s) for k in range(1, n))
    tail = n ** (1.0 - s) / (s - 1.0) + 0.5 * n ** (-s)
    p1 = s
    p2 = p1 * (s + 1.0) * (s + 2.0)
    p3 = p2 * (s + 3.0) * (s + 4.0)
    p4 = p3 * (s + 5.0) * (s + 6.0)
    corrections = (
        p1 * n ** (-s - 1.0) / 12.0,
        -p2 * n ** (-s - 3.0) / 720.0,
        p3 * n ** (-s - 5.0) / 30240.0,
        -p4 * n ** (-s - 7.0) / 1209600.0,
    )
    return math.fsum((head, tail) + corrections)


def knot_gradient_magnitude(k: int, delta: float) -> float:
    """|g_k| = omega at knot k: 2 at k = 0, k**(-(1/2+delta)) afterwards.

    This is the single source of the float arithmetic shared by the knot
    cache and by :func:`predicted_k_eps`, so threshold comparisons resolve
    identically on both sides.
    """
    if k < 0:
        raise ValueError("knot index must be >= 0")
    if k == 0:
        return 2.0
    return float(k) ** -(0.5 + delta)


def predicted_k_eps(eps: float, delta: float) -> int:
    """Closed-form first-hit index ceil(eps**(-1/(1/2+delta))).

    The ceiling is seeded by 60-digit arithmetic and then pinned by direct
    float comparisons of k**(-(1/2+delta)) against eps, so exact integer
    boundaries resolve exactly as a scan of the knot gradients would.
    eps >= 2 returns 0 (the start already qualifies: omega_0 = 2); eps <= 0
    is an error.
    """
    if not eps > 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    if eps >= 2.0:
        return 0
    with mp.workdps(60):
        guess = int(mp.ceil(mp.mpf(eps) ** (-1 / (mp.mpf(1) / 2 + mp.mpf(delta)))))
    k = max(1, guess - 3)
    while k > 1 and knot_gradient_magnitude(k - 1, delta) <= eps:
        k -= 1
    steps = 0
    while knot_gradient_magnitude(k, delta) > eps:
        k += 1
        steps += 1
        if steps > 1_000_000:
            raise RuntimeError("predicted_k_eps failed to cross the threshold")
    return k


def hermite_cubic(
    f_lo: float, f_hi: float, g_lo: float, g_hi: float, step: float
) -> tuple[float, float, float, float]:
    """Coefficients (c0, c1, c2, c3) of the unique cubic matching values and
    slopes at both ends, in the normalized variable t = (x - x_lo)/step:
    p(t) = c0 + c1*t + c2*t^2 + c3*t^3."""
    if not step > 0.0:
        raise ValueError(f"step must be positive, got {step}")
    df = f_hi - f_lo
    c2 = 3.0 * df - step * (2.0 * g_lo + g_hi)
    c3 = -2.0 * df + step * (g_lo + g_hi)
    return (f_lo, step * g_lo, c2, c3)


class CurveValues(NamedTuple):
    """(f(x), f'(x), f''(x)); f'' is the right-segment limit at knots."""

    f: float
    df: float
    d2f: float


class CurveSample(NamedTuple):
    """Sample row with both one-sided second derivatives (they differ at knots)."""

    x: float
    f: float
    fprime: float
    fsecond_left: float
    fsecond_right: float


@dataclass(frozen=True)
class SegmentCubic:
    """The interpolating cubic on [x_lo, x_hi], normalized coefficients."""

    x_lo: float
    x_hi: float
    c0: float
    c1: float
    c2: float
    c3: float

    @property
    def step(self) -> float:
        return self.x_hi - self.x_lo

    def value(self, x: float) -> float:
        t = (x - self.x_lo) / self.step
        return self.c0 + t * (self.c1 + t * (self.c2 + t * self.c3))

    def slope(self, x: float) -> float:
        t = (x - self.x_lo) / self.step
        return (self.c1 + t * (2.0 * self.c2 + 3.0 * t * self.c3)) / self.step

    def curvature(self, x: float) -> float:
        t = (x - self.x_lo) / self.step
        return (2.0 * self.c2 + 6.0 * t * self.c3) / (self.step * self.step)


@dataclass(frozen=True)
class HermiteReport:
    """Worst ratios of the two interpolation preconditions over a horizon.

    ``value_ratio`` is |f_{k+1} - f_k - g_k s_k| / s_k^2 (zero in exact
    arithmetic for this construction) and ``slope_ratio`` is
    alpha * |g_{k+1} - g_k| / s_k (bounded by 1).
    """

    ok: bool
    value_ratio_max: float
    value_ratio_argmax: int
    slope_ratio_max: float
    slope_ratio_argmax: int


@dataclass(frozen=True)
class HardInstanceParams:
    """alpha in (0, 1], delta > 0, restricted so knot values stay >= 0.

    The telescoped limit of the values is (1-alpha)*zeta(1+2*delta) -
    4*alpha; requiring it to be nonnegative keeps every f_k (and the whole
    interpolant, which decreases between knots) nonnegative.  alpha close to
    1 is therefore rejected for every delta.
    """

    alpha: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        margin = (1.0 - self.alpha) * zeta(1.0 + 2.0 * self.delta) - 4.0 * self.alpha
        if margin < 0.0:
            raise ValueError(
                "infeasible parameters: (1-alpha)*zeta(1+2*delta) - 4*alpha = "
                f"{margin:.6g} < 0, so the constructed values would go negative; "
                "decrease alpha (or delta)"
            )


class _NeumaierAccumulator:
    """Compensated running sum (two-sum with a carry term)."""

    def __init__(self, start: float):
        self._sum = float(start)
        self._carry = 0.0

    def add(self, increment: float) -> float:
        x = float(increment)
        t = self._sum + x
        if abs(self._sum) >= abs(x):
            self._carry += (self._sum - t) + x
        else:
            self._carry += (x - t) + self._sum
        self._sum = t
        return self._sum + self._carry


class HardInstance:
    """Cached knots plus the lazily extended piecewise-cubic interpolant.

    Construction and extension are single-writer; once extended past a
    horizon, evaluation below it is pure, so pre-extend and then read from
    as many threads as you like.
    """

    def __init__(
        self,
        params: HardInstanceParams,
        initial_segments: int = 64,
        max_segments: int = 10_000_000,
    ):
        self.params = params
        self.max_segments = int(max_segments)
        self.f0 = zeta(1.0 + 2.0 * params.delta)
        self._expo_f = -(1.0 + 2.0 * params.delta)
        # Knot abscissas use plain running addition: a descent update
        # x - alpha*g must land on the next knot bit for bit.
        self._xs: list[float] = [0.0]
        self._fs: list[float] = [self.f0]
        self._gs: list[float] = [-2.0]
        self._ss: list[float] = []
        self._c2: list[float] = []
        self._c3: list[float] = []
        self._fsum = _NeumaierAccumulator(self.f0)
        self._extend_to(max(1, int(initial_segments)))

    @property
    def segments(self) -> int:
        return len(self._ss)

    def _extend_to(self, segments: int) -> None:
        if segments > self.max_segments:
            raise HorizonError(
                f"requested horizon {segments} exceeds the cap of "
                f"{self.max_segments} segments"
            )
        alpha, delta = self.params.alpha, self.params.delta
        for k in range(len(self._ss), segments):
            s_k = alpha * knot_gradient_magnitude(k, delta)  # s_0 = 2*alpha
            g_k = self._gs[k]
            g_next = -knot_gradient_magnitude(k + 1, delta)
            drop = 4.0 * alpha if k == 0 else alpha * float(k) ** self._expo_f
            f_k = self._fs[k]
            f_next = self._fsum.add(-drop)
            _, _, c2, c3 = hermite_cubic(f_k, f_next, g_k, g_next, s_k)
            self._ss.append(s_k)
            self._xs.append(self._xs[k] + s_k)
            self._fs.append(f_next)
            self._gs.append(g_next)
            self._c2.append(c2)
            self._c3.append(c3)

    def _require_segment(self, k: int) -> None:
        if k < 0:
            raise ValueError("knot index must be >= 0")
        if k >= len(self._ss):
            self._extend_to(min(self.max_segments, max(k + 1, 2 * len(self._ss))))
            if k >= len(self._ss):
                raise HorizonError(f"segment {k} lies beyond the horizon cap")

    # Knot-sequence accessors --------------------------------------------

    def knot_x(self, k: int) -> float:
        """x_k."""
        if k >= 1:
            self._require_segment(k - 1)
        elif k < 0:
            raise ValueError("knot index must be >= 0")
        return self._xs[k]

    def knot_value(self, k: int) -> float:
        """f_k (compensated cumulative sum of the closed-form drops)."""
        if k >= 1:
            self._require_segment(k - 1)
        elif k < 0:
            raise ValueError("knot index must be >= 0")
        return self._fs[k]

    def knot_gradient(self, k: int) -> float:
        """g_k = -2 at k = 0, else -k**(-(1/2+delta))."""
        if k < 0:
            raise ValueError("knot index must be >= 0")
        return -knot_gradient_magnitude(k, self.params.delta)

    def knot_step(self, k: int) -> float:
        """s_k = x_{k+1} - x_k (= -alpha * g_k)."""
        self._require_segment(k)
        return self._ss[k]

    def segment_cubic(self, k: int) -> SegmentCubic:
        """The interpolating cubic on [x_k, x_{k+1}]."""
        self._require_segment(k)
        return SegmentCubic(
            x_lo=self._xs[k],
            x_hi=self._xs[k + 1],
            c0=self._fs[k],
            c1=self._ss[k] * self._gs[k],
            c2=self._c2[k],
            c3=self._c3[k],
        )

    # Interpolant ---------------------------------------------------------

    def evaluate(self, x: float) -> CurveValues:
        """(f, f', f'') at any real x.

        x < 0 uses the linear left extension (f0 - 2x, -2, 0).  Knots belong
        to their right segment (left-closed intervals), so f'' at a knot is
        the right-segment limit; exact knot hits return the stored f_k, g_k
        unchanged.
        """
        x = float(x)
        if x < 0.0:
            return CurveValues(self.f0 - 2.0 * x, -2.0, 0.0)
        while x >= self._xs[-1]:
            if len(self._ss) >= self.max_segments:
                raise HorizonError(
                    f"x={x!r} lies beyond knot {len(self._ss)} and the horizon "
                    f"cap of {self.max_segments} segments is reached"
                )
            self._extend_to(min(self.max_segments, 2 * len(self._ss)))
        k = bisect.bisect_right(self._xs, x) - 1
        s = self._ss[k]
        if self._xs[k] == x:
            return CurveValues(self._fs[k], self._gs[k], 2.0 * self._c2[k] / (s * s))
        t = (x - self._xs[k]) / s
        c1 = s * self._gs[k]
        c2, c3 = self._c2[k], self._c3[k]
        return CurveValues(
            self._fs[k] + t * (c1 + t * (c2 + t * c3)),
            (c1 + t * (2.0 * c2 + 3.0 * t * c3)) / s,
            (2.0 * c2 + 6.0 * t * c3) / (s * s),
        )

    def left_curvature(self, k: int) -> float:
        """f'' limit from the left at knot k (0 at the origin: linear piece)."""
        if k == 0:
            return 0.0
        self._require_segment(k - 1)
        s = self._ss[k - 1]
        return (2.0 * self._c2[k - 1] + 6.0 * self._c3[k - 1]) / (s * s)

    # Certificates --------------------------------------------------------

    def verify_hermite_preconditions(self, horizon: int) -> HermiteReport:
        """Check both interpolation preconditions for every k < horizon."""
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self._require_segment(horizon - 1)
        alpha = self.params.alpha
        worst_v, arg_v = -1.0, 0
        worst_g, arg_g = -1.0, 0
        for k in range(horizon):
            s = self._ss[k]
            v_ratio = abs(self._fs[k + 1] - self._fs[k] - self._gs[k] * s) / (s * s)
            g_ratio = alpha * abs(self._gs[k + 1] - self._gs[k]) / s
            if v_ratio > worst_v:
                worst_v, arg_v = v_ratio, k
            if g_ratio > worst_g:
                worst_g, arg_g = g_ratio, k
        ok = worst_v <= 1.0 + 1e-12 and worst_g <= 1.0 + 1e-12
        return HermiteReport(ok, worst_v, arg_v, worst_g, arg_g)

    def lipschitz_bound(self, horizon: int) -> float:
        """Largest |f''| over the first ``horizon`` segments (the cubic second
        derivative is linear per segment, so endpoints suffice); the linear
        left extension contributes 0."""
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self._require_segment(horizon - 1)
        best = 0.0
        for k in range(horizon):
            ss = self._ss[k] * self._ss[k]
            left = abs(2.0 * self._c2[k]) / ss
            right = abs(2.0 * self._c2[k] + 6.0 * self._c3[k]) / ss
            best = max(best, left, right)
        return best

    # Exports ---------------------------------------------------------------

    def sample_curve(self, x_lo: float, x_hi: float, num: int = 400) -> list[CurveSample]:
        """Rows (x, f, f', f''_left, f''_right) on a uniform grid with every
        knot in range inserted exactly (so the jump in f'' is visible)."""
        if not x_hi > x_lo:
            raise ValueError(f"empty sampling range [{x_lo}, {x_hi}]")
        if num < 2:
            raise ValueError("need at least 2 samples")
        self.evaluate(x_hi)  # force the horizon
        points = set(float(v) for v in np.linspace(x_lo, x_hi, num))
        lo_i = bisect.bisect_left(self._xs, x_lo)
        hi_i = bisect.bisect_right(self._xs, x_hi)
        points.update(self._xs[lo_i:hi_i])
        rows = []
        for x in sorted(points):
            f, df, d2f_right = self.evaluate(x)
            if x >= 0.0:
                k = bisect.bisect_right(self._xs, x) - 1
                d2f_left = self.left_curvature(k) if self._xs[k] == x else d2f_right
            else:
                d2f_left = d2f_right
            rows.append(CurveSample(x, f, df, d2f_left, d2f_right))
        return rows

    def predicted_k_eps(self, eps: float) -> int:
        return predicted_k_eps(eps, self.params.delta)

    def as_problem(self) -> Problem:
        """Expose the interpolant as a 1-D Problem (Hessian = right-limit f'')."""
        name = f"hard-instance(alpha={self.params.alpha:g},delta={self.params.delta:g})"
        return Problem(
            name=name,
            dimension=1,
            value=lambda x: self.evaluate(float(x[0])).f,
            gradient=lambda x: np.array([self.evaluate(float(x[0])).df]),
            hessian=lambda x: np.array([[self.evaluate(float(x[0])).d2f]]),
            bounded_below=True,
        )


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_knot_csv(instance: HardInstance, horizon: int, path: str | Path) -> None:
    """Knot table with rows k,x,f,g,s for k = 0..horizon."""
    instance.knot_step(horizon)  # ensure s_horizon exists
    lines = ["k,x,f,g,s"]
    for k in range(horizon + 1):
        lines.append(
            ",".join(
                (
                    str(k),
                    _fmt(instance.knot_x(k)),
                    _fmt(instance.knot_value(k)),
                    _fmt(instance.knot_gradient(k)),
                    _fmt(instance.knot_step(k)),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_curve_csv(rows: list[CurveSample], path: str | Path) -> None:
    """Sampled-curve export with both one-sided second derivatives."""
    lines = ["x,f,fprime,fsecond_left,fsecond_right"]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
