"""Iteration-history data model shared by the optimizers and the auditor.

A trace is the (x_k, f_k, omega_k, success-flag) history of one optimizer
run.  Traces are immutable after construction and validated eagerly, so
downstream consumers can rely on the structural invariants:

* iteration indices are contiguous from 0,
* f is nonincreasing, and strictly decreasing across successful iterations,
* unsuccessful iterations carry f and omega over unchanged,
* when iterates are stored, the success flag at k agrees with
  ``x_{k+1} != x_k`` (exact comparison of the stored values).

Traces produced by tools that log values only may store an empty iterate
vector (dimension 0); the success flags are then authoritative.

File format (extension ``.trc``): UTF-8 text, line 1 a JSON-object header
``{algorithm, problem, params, measure, dimension}``, followed by one CSV
line per record ``k,f,omega,successful,x_1,...,x_n`` with reals printed to
17 significant digits (lossless float64 round trip).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Mapping

__all__ = [
    "IterationRecord",
    "OptimizationTrace",
    "TraceMeta",
    "TheoremConstants",
    "TraceParseError",
    "TraceInvariantError",
    "load_trace",
    "save_trace",
]


class TraceParseError(ValueError):
    """A trace file is structurally malformed (bad header, line or field)."""


class TraceInvariantError(ValueError):
    """Trace data violates one of the model invariants."""


def _fmt(v: float) -> str:
    # 17 significant digits guarantee an exact float64 round trip.
    return format(float(v), ".17g")


@dataclass(frozen=True)
class IterationRecord:
    """One row of a run: index, iterate, value, optimality measure, flag."""

    k: int
    x: tuple[float, ...]
    f: float
    omega: float
    successful: bool

    def __post_init__(self):
        if self.k < 0:
            raise TraceInvariantError(f"k={self.k}: negative iteration index")
        if not math.isfinite(self.f):
            raise TraceInvariantError(f"k={self.k}: f must be finite")
        if not math.isfinite(self.omega) or self.omega < 0.0:
            raise TraceInvariantError(f"k={self.k}: omega must be finite and >= 0")
        for xi in self.x:
            if not math.isfinite(xi):
                raise TraceInvariantError(f"k={self.k}: iterate entries must be finite")


@dataclass(frozen=True)
class TraceMeta:
    """Run provenance: algorithm and problem identifiers plus a string map."""

    algorithm: str
    problem: str
    params: Mapping[str, str] = field(default_factory=dict)
    measure: str = "gradient-norm"
    dimension: int = 0


@dataclass(frozen=True)
class TheoremConstants:
    """Constants (kappa_d, beta, kappa_a, kappa_b, kappa_c) of the per-step
    decrease condition and the iteration-growth condition.

    Ranges are checked at construction: kappa_d in (0, 1], beta > 0,
    kappa_a >= 1, kappa_b >= 0, kappa_c >= 0.
    """

    kappa_d: float
    beta: float
    kappa_a: float = 1.0
    kappa_b: float = 0.0
    kappa_c: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.kappa_d <= 1.0):
            raise ValueError(f"kappa_d must lie in (0, 1], got {self.kappa_d}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.kappa_a >= 1.0:
            raise ValueError(f"kappa_a must be >= 1, got {self.kappa_a}")
        if self.kappa_b < 0.0 or self.kappa_c < 0.0:
            raise ValueError("kappa_b and kappa_c must be >= 0")


def _validate(records: tuple[IterationRecord, ...], meta: TraceMeta) -> None:
    n = meta.dimension
    if n < 0:
        raise TraceInvariantError(f"dimension must be >= 0, got {n}")
    for pos, rec in enumerate(records):
        if rec.k != pos:
            raise TraceInvariantError(
                f"k={rec.k}: indices must be contiguous from 0 (found at position {pos})"
            )
        if len(rec.x) != n:
            raise TraceInvariantError(
                f"k={rec.k}: iterate has {len(rec.x)} coordinates, header says {n}"
            )
    for pos in range(len(records) - 1):
        cur, nxt = records[pos], records[pos + 1]
        if n >= 1:
            moved = nxt.x != cur.x
            if cur.successful != moved:
                raise TraceInvariantError(
                    f"k={pos}: successful={cur.successful} inconsistent with stored "
                    f"iterates (x_{pos + 1} != x_{pos} is {moved})"
                )
        if nxt.f > cur.f:
            raise TraceInvariantError(
                f"k={pos}: f must be nonincreasing (f_{pos}={cur.f!r}, f_{pos + 1}={nxt.f!r})"
            )
        if cur.successful:
            if not nxt.f < cur.f:
                raise TraceInvariantError(
                    f"k={pos}: successful iteration must strictly decrease f"
                )
        else:
            if nxt.f != cur.f:
                raise TraceInvariantError(
                    f"k={pos}: unsuccessful iteration must carry f over unchanged"
                )
            if nxt.omega != cur.omega:
                raise TraceInvariantError(
                    f"k={pos}: unsuccessful iteration must carry omega over unchanged"
                )
    # With stored iterates the final record has no successor that could differ
    # from it, so it can never be certified successful.  Value-only traces keep
    # their flags as-is (the external tool is authoritative).
    if records and n >= 1 and records[-1].successful:
        raise TraceInvariantError(
            f"k={records[-1].k}: last record cannot be flagged successful"
        )


@dataclass(frozen=True)
class OptimizationTrace:
    """Validated, immutable run history.

    Immutable after construction and therefore safe to read from several
    threads concurrently; construct on a single thread.
    """

    records: tuple[IterationRecord, ...]
    meta: TraceMeta

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        _validate(self.records, self.meta)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def last_index(self) -> int:
        if not self.records:
            raise TraceInvariantError("trace has no records")
        return self.records[-1].k


def _write_stream(trace: OptimizationTrace, fp: IO[str]) -> None:
    header = {
        "algorithm": trace.meta.algorithm,
        "problem": trace.meta.problem,
        "params": dict(trace.meta.params),
        "measure": trace.meta.measure,
        "dimension": trace.meta.dimension,
    }
    fp.write(json.dumps(header, sort_keys=True) + "\n")
    for rec in trace.records:
        cells = [
            str(rec.k),
            _fmt(rec.f),
            _fmt(rec.omega),
            "true" if rec.successful else "false",
        ]
        cells.extend(_fmt(xi) for xi in rec.x)
        fp.write(",".join(cells) + "\n")


def _parse_bool(token: str, line_no: int) -> bool:
    low = token.strip().lower()
    if low in ("true", "1"):
        return True
    if low in ("false", "0"):
        return False
    raise TraceParseError(f"line {line_no}: bad successful flag {token!r}")


def _read_stream(fp: IO[str]) -> OptimizationTrace:
    header_line = fp.readline()
    if not header_line.strip():
        raise TraceParseError("missing JSON header on line 1")
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise TraceParseError(f"line 1: bad JSON header ({exc})") from exc
    if not isinstance(header, dict):
        raise TraceParseError("line 1: header must be a JSON object")
    try:
        meta = TraceMeta(
            algorithm=str(header["algorithm"]),
            problem=str(header["problem"]),
            params={str(k): str(v) for k, v in dict(header["params"]).items()},
            measure=str(header["measure"]),
            dimension=int(header["dimension"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceParseError(f"line 1: incomplete header ({exc})") from exc

    records = []
    for line_no, line in enumerate(fp, start=2):
        if not line.strip():
            continue
        cells = line.strip().split(",")
        if len(cells) != 4 + meta.dimension:
            raise TraceParseError(
                f"line {line_no}: expected {4 + meta.dimension} fields, got {len(cells)}"
            )
        try:
            k = int(cells[0])
            f = float(cells[1])
            omega = float(cells[2])
            x = tuple(float(c) for c in cells[4:])
        except ValueError as exc:
            raise TraceParseError(f"line {line_no}: bad numeric field ({exc})") from exc
        successful = _parse_bool(cells[3], line_no)
        records.append(IterationRecord(k=k, x=x, f=f, omega=omega, successful=successful))
    return OptimizationTrace(records=tuple(records), meta=meta)


def save_trace(trace: OptimizationTrace, path: str | Path) -> None:
    """Write ``trace`` to ``path`` in the .trc text format (lossless)."""
    with open(path, "w", encoding="utf-8") as fp:
        _write_stream(trace, fp)


def load_trace(path: str | Path) -> OptimizationTrace:
    """Read a .trc file; rejects files violating any trace invariant."""
    with open(path, "r", encoding="utf-8") as fp:
        return _read_stream(fp)
