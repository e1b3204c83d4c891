"""Checks that a finite optimizer trace satisfies the refined telescoping
iteration-count analysis, and measures its empirical complexity exponent.

Given a trace and constants (kappa_d, beta, kappa_a, kappa_b, kappa_c), the
auditor verifies, index by index:

* ``kstop``   -- the run never moves away from an exact critical point
  (no successful iteration with omega_k = 0),
* ``succ``    -- every successful iteration decreases f by at least
  kappa_d * omega_k**beta (up to a relative slack of 1e-12 * |f_k|),
* ``growth``  -- k <= kappa_a*|S_k| + kappa_b*|log omega_k| + kappa_c at
  every k with omega_k > 0, where S_k is the set of successful indices
  in {0, ..., k}.

On top of the hypothesis checks it tabulates, per accuracy eps, the first
hit index k(eps) = min{k : omega_k <= eps}, the median anchor ell(k) (the
largest successful index not exceeding the median of S_k), the halved
telescoping bound

    k(eps) <= kappa_a * max[1, 2*(f_{ell(k(eps)-1)} - f_{k(eps)})
                                / (kappa_d * eps**beta)]
              + kappa_b*|log eps| + kappa_a + kappa_c,

the successful-iteration cardinality bound

    |S_{k(eps)-1}| <= 2*(f_{ell(k(eps)-1)} - f_{k(eps)}) / (kappa_d*eps**beta),

the vanishing anchored gap f_{ell(k(eps)-1)} - f_{k(eps)-1}, and a log-log
least-squares fit of k(eps) against 1/eps whose slope is the empirical
complexity exponent (to be compared with the classical exponent beta).

Conventions: the median of an even-sized index set is the average of its
two middle elements, which reduces ell(k) to floor(k/2) when every
iteration up to k is successful.  ``S_k`` uses the inclusive index range
{0, ..., k}; the alternative reading {0, ..., k-1} shifts |S_k| by at most
one, which the additive constant kappa_c absorbs.  All inequality checks
apply a relative slack of 1e-12 scaled by the magnitudes involved with an
absolute floor of 1e-30.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .trace import OptimizationTrace, TheoremConstants

__all__ = [
    "EpsilonGrid",
    "AuditReport",
    "KEpsRow",
    "CheckResult",
    "ComplexityClass",
    "BoundPreconditionError",
    "success_set",
    "success_set_upto",
    "first_hit_index",
    "median_anchor",
    "check_kstop",
    "check_sufficient_decrease",
    "kappa_d_hat",
    "check_growth",
    "bound8_value",
    "refined_bound_rhs",
    "check_cardinality_bound",
    "limdiff_trend",
    "fit_complexity_exponent",
    "audit",
    "exponent_registry",
    "lookup_exponent",
]

REL_SLACK = 1e-12
ABS_SLACK = 1e-30
DECREASE_REL_SLACK = 1e-12


class BoundPreconditionError(ValueError):
    """A bound evaluation was requested where its preconditions fail."""


def _leq(lhs: float, rhs: float, *scales: float) -> bool:
    pad = REL_SLACK * max(abs(lhs), abs(rhs), *(abs(s) for s in scales), 0.0)
    return lhs <= rhs + pad + ABS_SLACK


@dataclass(frozen=True)
class EpsilonGrid:
    """Strictly decreasing positive accuracies eps_1 > eps_2 > ... > eps_m."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(e) for e in self.values))
        if not self.values:
            raise ValueError("epsilon grid must not be empty")
        for e in self.values:
            if not (math.isfinite(e) and e > 0.0):
                raise ValueError(f"epsilon grid entries must be positive, got {e}")
        for a, b in zip(self.values, self.values[1:]):
            if not b < a:
                raise ValueError("epsilon grid must be strictly decreasing")

    @classmethod
    def ensure(cls, grid: "EpsilonGrid | Sequence[float]") -> "EpsilonGrid":
        if isinstance(grid, EpsilonGrid):
            return grid
        return cls(tuple(grid))


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    violation: int | None = None


def success_set(trace: OptimizationTrace) -> list[int]:
    """Ascending indices of the successful iterations."""
    return [rec.k for rec in trace.records if rec.successful]


def success_set_upto(trace: OptimizationTrace, k: int) -> list[int]:
    """S_k = S intersected with {0, ..., k} (inclusive)."""
    if not trace.records:
        raise ValueError("empty trace")
    if not 0 <= k <= trace.last_index:
        raise IndexError(f"k={k} outside the trace range 0..{trace.last_index}")
    return [rec.k for rec in trace.records[: k + 1] if rec.successful]


def first_hit_index(trace: OptimizationTrace, eps: float) -> int | None:
    """Smallest k with omega_k <= eps, or None if no record qualifies."""
    if not eps > 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    for rec in trace.records:
        if rec.omega <= eps:
            return rec.k
    return None


def _median_anchor_of(s_k: Sequence[int]) -> int:
    m = len(s_k)
    if m % 2 == 1:
        med = float(s_k[m // 2])
    else:
        med = 0.5 * (s_k[m // 2 - 1] + s_k[m // 2])
    return s_k[bisect_right(s_k, med) - 1]


def median_anchor(trace: OptimizationTrace, k: int) -> int:
    """Largest member of S_k that does not exceed the median of S_k.

    Requires |S_k| >= 2.  Equals floor(k/2) when all of 0..k is successful.
    """
    s_k = success_set_upto(trace, k)
    if len(s_k) < 2:
        raise BoundPreconditionError(
            f"median anchor needs at least two successful indices up to k={k}, "
            f"found {len(s_k)}"
        )
    return _median_anchor_of(s_k)


def check_kstop(trace: OptimizationTrace) -> CheckResult:
    """True iff no successful iteration sits at omega_k = 0."""
    for rec in trace.records:
        if rec.successful and rec.omega == 0.0:
            return CheckResult(ok=False, violation=rec.k)
    return CheckResult(ok=True)


def kappa_d_hat(trace: OptimizationTrace, beta: float) -> float | None:
    """Sharpest empirical decrease constant: min over successful k of
    (f_k - f_{k+1}) / omega_k**beta.  None when the trace has no successful
    iteration with omega_k > 0."""
    best = None
    recs = trace.records
    for rec in recs:
        if not rec.successful or rec.omega <= 0.0 or rec.k + 1 >= len(recs):
            continue
        ratio = (rec.f - recs[rec.k + 1].f) / rec.omega**beta
        if best is None or ratio < best:
            best = ratio
    return best


def check_sufficient_decrease(
    trace: OptimizationTrace, constants: TheoremConstants
) -> tuple[CheckResult, float | None]:
    """Verify f_k - f_{k+1} >= kappa_d * omega_k**beta on every successful k
    (with relative slack 1e-12 * |f_k|); also return the empirical constant."""
    recs = trace.records
    result = CheckResult(ok=True)
    for rec in recs:
        if not rec.successful or rec.k + 1 >= len(recs):
            continue
        decrease = rec.f - recs[rec.k + 1].f
        need = constants.kappa_d * rec.omega**constants.beta
        if decrease < need - DECREASE_REL_SLACK * abs(rec.f):
            result = CheckResult(ok=False, violation=rec.k)
            break
    return result, kappa_d_hat(trace, constants.beta)


def _success_prefix_counts(trace: OptimizationTrace) -> list[int]:
    counts = []
    running = 0
    for rec in trace.records:
        if rec.successful:
            running += 1
        counts.append(running)
    return counts


def check_growth(trace: OptimizationTrace, constants: TheoremConstants) -> CheckResult:
    """Verify k <= kappa_a*|S_k| + kappa_b*|log omega_k| + kappa_c wherever
    omega_k > 0 (natural log)."""
    counts = _success_prefix_counts(trace)
    for rec in trace.records:
        if rec.omega <= 0.0:
            continue
        rhs = (
            constants.kappa_a * counts[rec.k]
            + constants.kappa_b * abs(math.log(rec.omega))
            + constants.kappa_c
        )
        if not _leq(float(rec.k), rhs):
            return CheckResult(ok=False, violation=rec.k)
    return CheckResult(ok=True)


def bound8_value(f_gap: float, constants: TheoremConstants, eps: float) -> float:
    """Right-hand side of the halved telescoping bound for a given anchored
    value gap: kappa_a*max[1, 2*f_gap/(kappa_d*eps**beta)] + kappa_b*|log eps|
    + kappa_a + kappa_c."""
    if not eps > 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    scaled = 2.0 * f_gap / (constants.kappa_d * eps**constants.beta)
    return (
        constants.kappa_a * max(1.0, scaled)
        + constants.kappa_b * abs(math.log(eps))
        + constants.kappa_a
        + constants.kappa_c
    )


def _bound_context(trace: OptimizationTrace, eps: float) -> tuple[int, list[int], int, float]:
    """Shared preconditions of the eps-indexed bounds; returns
    (k_eps, S_{k_eps-1}, ell, f_gap)."""
    k_eps = first_hit_index(trace, eps)
    if k_eps is None:
        raise BoundPreconditionError(f"no iterate reaches omega <= {eps!r}")
    if k_eps < 1:
        raise BoundPreconditionError(
            f"k(eps)={k_eps}: the bound needs k(eps) >= 1 (omega_0 already below eps)"
        )
    s_prev = success_set_upto(trace, k_eps - 1)
    if len(s_prev) < 2:
        raise BoundPreconditionError(
            f"only {len(s_prev)} successful iteration(s) before k(eps)={k_eps}; need >= 2"
        )
    ell = _median_anchor_of(s_prev)
    f_gap = trace.records[ell].f - trace.records[k_eps].f
    return k_eps, s_prev, ell, f_gap


def refined_bound_rhs(
    trace: OptimizationTrace, constants: TheoremConstants, eps: float
) -> float:
    """Evaluate the halved telescoping bound's right-hand side on a trace."""
    _, _, _, f_gap = _bound_context(trace, eps)
    return bound8_value(f_gap, constants, eps)


def check_cardinality_bound(
    trace: OptimizationTrace, constants: TheoremConstants, eps: float
) -> tuple[bool, int, float]:
    """Verify |S_{k(eps)-1}| <= 2*f_gap/(kappa_d*eps**beta); returns
    (holds, lhs, rhs)."""
    _, s_prev, _, f_gap = _bound_context(trace, eps)
    lhs = len(s_prev)
    rhs = 2.0 * f_gap / (constants.kappa_d * eps**constants.beta)
    return _leq(float(lhs), rhs), lhs, rhs


def limdiff_trend(
    trace: OptimizationTrace, grid: EpsilonGrid | Sequence[float]
) -> list[tuple[float, float | None]]:
    """Per grid eps, the anchored trailing gap f_{ell(k(eps)-1)} - f_{k(eps)-1}
    (None where the eps fails the bound preconditions).  The caller checks that
    the gaps decrease as eps shrinks."""
    grid = EpsilonGrid.ensure(grid)
    out: list[tuple[float, float | None]] = []
    for eps in grid.values:
        try:
            k_eps, _, ell, _ = _bound_context(trace, eps)
        except BoundPreconditionError:
            out.append((eps, None))
            continue
        out.append((eps, trace.records[ell].f - trace.records[k_eps - 1].f))
    return out


def fit_complexity_exponent(pairs: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares slope of log k(eps) against log(1/eps).

    Returns (slope, residual) where residual is the RMS misfit in log space.
    Requires at least three pairs with eps > 0 and k > 0, and a
    non-degenerate grid.
    """
    if len(pairs) < 3:
        raise ValueError(f"need at least 3 (eps, k) pairs, got {len(pairs)}")
    eps = np.asarray([p[0] for p in pairs], dtype=float)
    ks = np.asarray([p[1] for p in pairs], dtype=float)
    if np.any(eps <= 0.0) or np.any(ks <= 0.0):
        raise ValueError("all eps and k values must be positive")
    lx = np.log(1.0 / eps)
    ly = np.log(ks)
    if np.max(lx) == np.min(lx):
        raise ValueError("degenerate grid: all eps equal")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((slope * lx + intercept - ly) ** 2)))
    return float(slope), resid


@dataclass(frozen=True)
class KEpsRow:
    """One line of the per-accuracy table an audit produces."""

    eps: float
    k_eps: int | None
    ell: int | None
    f_gap: float | None
    bound8_rhs: float | None
    card_lhs: int | None
    card_rhs: float | None
    bound8_ok: bool | None
    card_ok: bool | None
    note: str = ""


@dataclass(frozen=True)
class AuditReport:
    """Aggregated verdicts for one trace and one constants choice."""

    kstop_ok: bool
    kstop_violation: int | None
    succ_ok: bool
    succ_violation: int | None
    growth_ok: bool
    growth_violation: int | None
    kappa_d_hat: float | None
    k_eps_table: tuple[KEpsRow, ...]
    fitted_exponent: float | None
    fit_residual: float | None
    limdiff_trend: tuple[tuple[float, float | None], ...]
    constants: TheoremConstants
    all_checks_pass: bool

    def to_dict(self) -> dict:
        return {
            "kstop_ok": self.kstop_ok,
            "kstop_violation": self.kstop_violation,
            "succ_ok": self.succ_ok,
            "succ_violation": self.succ_violation,
            "growth_ok": self.growth_ok,
            "growth_violation": self.growth_violation,
            "kappa_d_hat": self.kappa_d_hat,
            "k_eps_table": [
                {
                    "eps": row.eps,
                    "k_eps": row.k_eps,
                    "ell": row.ell,
                    "f_gap": row.f_gap,
                    "bound8_rhs": row.bound8_rhs,
                    "card_lhs": row.card_lhs,
                    "card_rhs": row.card_rhs,
                    "bound8_ok": row.bound8_ok,
                    "card_ok": row.card_ok,
                    "note": row.note,
                }
                for row in self.k_eps_table
            ],
            "fitted_exponent": self.fitted_exponent,
            "fit_residual": self.fit_residual,
            "limdiff_trend": [
                {"eps": eps, "gap": gap} for eps, gap in self.limdiff_trend
            ],
            "constants": {
                "kappa_d": self.constants.kappa_d,
                "beta": self.constants.beta,
                "kappa_a": self.constants.kappa_a,
                "kappa_b": self.constants.kappa_b,
                "kappa_c": self.constants.kappa_c,
            },
            "all_checks_pass": self.all_checks_pass,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def k_eps_csv(self) -> str:
        def cell(v) -> str:
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, int):
                return str(v)
            return format(v, ".17g")

        lines = ["eps,k_eps,ell,f_gap,bound8_rhs,card_lhs,card_rhs"]
        for row in self.k_eps_table:
            lines.append(
                ",".join(
                    cell(v)
                    for v in (
                        row.eps,
                        row.k_eps,
                        row.ell,
                        row.f_gap,
                        row.bound8_rhs,
                        row.card_lhs,
                        row.card_rhs,
                    )
                )
            )
        return "\n".join(lines) + "\n"

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def write_k_eps_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.k_eps_csv(), encoding="utf-8")


def audit(
    trace: OptimizationTrace,
    constants: TheoremConstants,
    grid: EpsilonGrid | Sequence[float],
) -> AuditReport:
    """Run every check on ``trace`` and tabulate the per-eps bounds.

    Hypothesis failures are reported but do not abort the k(eps) table or the
    exponent fit, so a broken constants mapping can still be diagnosed from
    the table.  Raises on an empty trace.
    """
    if not trace.records:
        raise ValueError("cannot audit an empty trace")
    grid = EpsilonGrid.ensure(grid)

    kstop = check_kstop(trace)
    succ, kd_hat = check_sufficient_decrease(trace, constants)
    growth = check_growth(trace, constants)

    rows: list[KEpsRow] = []
    prev_k: int | None = None
    for eps in grid.values:
        k_eps = first_hit_index(trace, eps)
        if k_eps is not None and prev_k is not None and k_eps < prev_k:
            raise RuntimeError("internal error: k(eps) decreased as eps decreased")
        if k_eps is not None:
            prev_k = k_eps
        try:
            k_chk, s_prev, ell, f_gap = _bound_context(trace, eps)
        except BoundPreconditionError as exc:
            rows.append(
                KEpsRow(
                    eps=eps,
                    k_eps=k_eps,
                    ell=None,
                    f_gap=None,
                    bound8_rhs=None,
                    card_lhs=None,
                    card_rhs=None,
                    bound8_ok=None,
                    card_ok=None,
                    note=str(exc),
                )
            )
            continue
        rhs8 = bound8_value(f_gap, constants, eps)
        card_ok, card_lhs, card_rhs = check_cardinality_bound(trace, constants, eps)
        rows.append(
            KEpsRow(
                eps=eps,
                k_eps=k_eps,
                ell=ell,
                f_gap=f_gap,
                bound8_rhs=rhs8,
                card_lhs=card_lhs,
                card_rhs=card_rhs,
                bound8_ok=_leq(float(k_eps), rhs8),
                card_ok=card_ok,
            )
        )

    pairs = [(row.eps, float(row.k_eps)) for row in rows if row.k_eps]
    fitted = resid = None
    if len(pairs) >= 3:
        try:
            fitted, resid = fit_complexity_exponent(pairs)
        except ValueError:
            fitted = resid = None

    all_ok = (
        kstop.ok
        and succ.ok
        and growth.ok
        and all(row.bound8_ok is not False and row.card_ok is not False for row in rows)
    )
    return AuditReport(
        kstop_ok=kstop.ok,
        kstop_violation=kstop.violation,
        succ_ok=succ.ok,
        succ_violation=succ.violation,
        growth_ok=growth.ok,
        growth_violation=growth.violation,
        kappa_d_hat=kd_hat,
        k_eps_table=tuple(rows),
        fitted_exponent=fitted,
        fit_residual=resid,
        limdiff_trend=tuple(limdiff_trend(trace, grid)),
        constants=constants,
        all_checks_pass=all_ok,
    )


def _numeric_fraction(text: str) -> float | None:
    """Parse '2' or '3/2'; None for symbolic formulas in p, q."""
    parts = text.split("/")
    try:
        if len(parts) == 1:
            return float(parts[0])
        if len(parts) == 2:
            return float(parts[0]) / float(parts[1])
    except ValueError:
        return None
    return None


@dataclass(frozen=True)
class ComplexityClass:
    """Classical worst-case exponent of one algorithm family, as data.

    ``beta`` is either a positive number or a formula string in p and q
    (evaluate through :func:`lookup_exponent`).
    """

    family: str
    order: str
    beta: str
    source: str

    def __post_init__(self):
        value = _numeric_fraction(self.beta)
        if value is not None and not value > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")


_CGT = "Cartis, Gould & Toint, 'Evaluation Complexity of Algorithms for Nonconvex Optimization' (2022)"

_REGISTRY: tuple[ComplexityClass, ...] = (
    ComplexityClass("steepest-descent", "1", "2", f"{_CGT}, Th. 2.2.2"),
    ComplexityClass("linesearch", "1", "2", f"{_CGT}, Th. 2.2.2/2.2.4"),
    ComplexityClass("trust-region", "1", "2", f"{_CGT}, Th. 2.3.7"),
    ComplexityClass("trust-region", "2", "3", f"{_CGT}, Th. 3.2.6"),
    ComplexityClass("direct-search", "1", "2", "Vicente, 'Worst case complexity of direct search' (2013), Th. 3.1"),
    ComplexityClass("AR1", "1", "2", f"{_CGT}, Th. 2.4.3"),
    ComplexityClass("AR2", "1", "3/2", f"{_CGT}, Th. 3.3.4"),
    ComplexityClass("AR2", "2", "3", f"{_CGT}, Th. 3.3.9"),
    ComplexityClass("ARp", "q in {1,2,3}", "(p+1)/(p+1-q)", f"{_CGT}, Th. 4.1.5"),
    ComplexityClass("ARqp", "q in {1,2}", "(p+1)/(p-q+1)", f"{_CGT}, Th. 12.2.14"),
    ComplexityClass("ARqp", "q > 2", "q*(p+1)/p", f"{_CGT}, Th. 12.2.14"),
    ComplexityClass("ARqpIDA", "q in {1,2}", "(p+1)/(p-q+1)", f"{_CGT}, Th. 13.1.19"),
    ComplexityClass("ARqpIDA", "q > 2", "q*(p+1)/p", f"{_CGT}, Th. 13.1.19"),
    ComplexityClass("ARqpEDA", "q in {1,2}", "(p+1)/(p-q+1)", f"{_CGT}, Th. 13.3.8"),
    ComplexityClass("ARqpEDA", "q > 2", "q*(p+1)/p", f"{_CGT}, Th. 13.3.8"),
    ComplexityClass("AN2C", "1", "3/2", "Gratton, Jerad & Toint (2023), Th. 1"),
    ComplexityClass("AN2C", "2", "3", "Gratton, Jerad & Toint (2023), Th. 2"),
    ComplexityClass("AR1pGN", "1", "(p+1)/p", "Gratton & Toint (2023), Th. 3.5"),
    ComplexityClass("AR2GN", "q in {1,2}", "(p+1)/(p+1-q)", "Gratton & Toint (2023), Th. 4.5"),
)


def exponent_registry() -> list[ComplexityClass]:
    """Static table of classical exponents per algorithm family and order."""
    return list(_REGISTRY)


_FIXED_EXPONENTS: dict[tuple[str, int], float] = {
    ("steepest-descent", 1): 2.0,
    ("linesearch", 1): 2.0,
    ("trust-region", 1): 2.0,
    ("trust-region", 2): 3.0,
    ("direct-search", 1): 2.0,
    ("AR1", 1): 2.0,
    ("AR2", 1): 1.5,
    ("AR2", 2): 3.0,
    ("AN2C", 1): 1.5,
    ("AN2C", 2): 3.0,
}


def lookup_exponent(
    family: str, order: int = 1, p: int | None = None, q: int | None = None
) -> float:
    """Resolve the classical exponent for a family at a criticality order.

    Parametric families (ARp, ARqp and friends) need ``p``; ``q`` defaults to
    ``order``.
    """
    if q is None:
        q = order
    key = (family, order)
    if key in _FIXED_EXPONENTS:
        return _FIXED_EXPONENTS[key]
    if family == "ARp":
        if p is None:
            raise ValueError("ARp needs the model degree p")
        if not 1 <= q <= 3 or q > p:
            raise ValueError(f"ARp supports orders q in {{1,2,3}} with q <= p, got q={q}")
        return (p + 1) / (p + 1 - q)
    if family in ("ARqp", "ARqpIDA", "ARqpEDA"):
        if p is None:
            raise ValueError(f"{family} needs the model degree p")
        if q <= 2:
            return (p + 1) / (p - q + 1)
        return q * (p + 1) / p
    if family == "AR1pGN":
        if p is None:
            raise ValueError("AR1pGN needs the model degree p")
        return (p + 1) / p
    if family == "AR2GN":
        if p is None:
            raise ValueError("AR2GN needs the model degree p")
        return (p + 1) / (p + 1 - q)
    raise KeyError(f"unknown algorithm family/order: {family!r}, order {order}")
