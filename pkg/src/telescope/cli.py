"""Command-line front end: run optimizers, audit traces, build the
slow-convergence instance, fit exponents and emit figure data.

Subcommands: ``run``, ``audit``, ``hard-instance``, ``fit``, ``plot``.
Option precedence is command-line flags > JSON config file (``--config``,
keyed by subcommand) > built-in defaults, and every JSON output embeds the
effective configuration.  Outputs are deterministic: identical
configuration yields byte-identical CSV/JSON/SVG.

Exit codes follow one contract per command (0 success; 1 failed checks;
2 bad input; 3 oracle failure during a run).  The environment variable
``TELESCOPE_SEED`` is reserved for future stochastic methods and currently
unused: every implemented algorithm is deterministic.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import hard_instance as hi
from . import theorem
from .optimizers import (
    ALGORITHMS,
    CLASSICAL_BETA,
    OracleError,
    RunParams,
    run_algorithm,
)
from .problems import PROBLEM_NAMES, make_problem
from .svgfig import Panel, render_panels
from .trace import TheoremConstants, TraceParseError, load_trace, save_trace

__all__ = ["main", "console_main", "parse_eps_grid"]


def parse_eps_grid(text: str) -> list[float]:
    """Comma list ('1e-1,1e-2') or 'logspace:a:b:n' for n log-equispaced
    values from 10**a down to 10**b (a > b)."""
    text = text.strip()
    if text.startswith("logspace:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError("logspace grid needs the form logspace:a:b:n")
        a, b, n = float(parts[1]), float(parts[2]), int(parts[3])
        if n < 1:
            raise ValueError("logspace grid needs n >= 1")
        if n == 1:
            return [10.0**a]
        return [10.0 ** (a + i * (b - a) / (n - 1)) for i in range(n)]
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _write_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _load_config(path: str | None, section: str) -> dict:
    if path is None:
        return {}
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError("config file must hold a JSON object")
    sec = raw.get(section, {})
    if not isinstance(sec, dict):
        raise ValueError(f"config section {section!r} must be a JSON object")
    return sec


def _effective(ns_value, config: dict, key: str, default):
    """flags > config file > built-in default (flags use None sentinels)."""
    if ns_value is not None:
        return ns_value
    if key in config:
        return config[key]
    return default


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


# ----------------------------------------------------------------- run ----


def _cmd_run(ns: argparse.Namespace) -> int:
    try:
        cfg = _load_config(ns.config, "run")
        algo = _effective(ns.algo, cfg, "algo", None)
        problem_name = _effective(ns.problem, cfg, "problem", None)
        if algo is None or problem_name is None:
            return _fail("run needs --algo and --problem", 2)
        if algo not in ALGORITHMS:
            return _fail(
                f"unknown algorithm {algo!r}; valid names: {', '.join(sorted(ALGORITHMS))}",
                2,
            )
        if problem_name not in PROBLEM_NAMES:
            return _fail(
                f"unknown problem {problem_name!r}; valid names: {', '.join(PROBLEM_NAMES)}",
                2,
            )
        alpha = float(_effective(ns.alpha, cfg, "alpha", 0.1))
        delta = float(_effective(ns.delta, cfg, "delta", 0.25))
        dim = int(_effective(ns.n, cfg, "n", 4))
        problem, default_x0 = make_problem(problem_name, alpha=alpha, delta=delta, n=dim)
        x0_text = _effective(ns.x0, cfg, "x0", None)
        x0 = [float(t) for t in x0_text.split(",")] if x0_text else default_x0
        options: dict[str, float] = dict(cfg.get("params", {}))
        for item in ns.param or []:
            key, _, value = item.partition("=")
            if not _:
                return _fail(f"--param needs key=value, got {item!r}", 2)
            options[key] = float(value)
        params = RunParams(
            x0=x0,
            max_iterations=int(_effective(ns.max_iter, cfg, "max_iter", 1000)),
            omega_tol=float(_effective(ns.tol, cfg, "tol", 1e-5)),
            options=options,
        )
        out = Path(_effective(ns.out, cfg, "out", f"{algo}_{problem_name}.trc"))
    except (ValueError, KeyError, OSError) as exc:
        return _fail(str(exc), 2)

    effective_config = {
        "algo": algo,
        "problem": problem_name,
        "x0": list(params.x0),
        "max_iter": params.max_iterations,
        "tol": params.omega_tol,
        "params": options,
        "alpha": alpha,
        "delta": delta,
        "n": dim,
        "out": str(out),
    }
    try:
        trace = run_algorithm(algo, problem, params)
    except OracleError as exc:
        return _fail(f"oracle failure: {exc}", 3)
    except ValueError as exc:
        return _fail(str(exc), 2)
    save_trace(trace, out)
    last = trace.records[-1]
    summary = {
        "algorithm": trace.meta.algorithm,
        "problem": trace.meta.problem,
        "records": len(trace),
        "final_f": last.f,
        "final_omega": last.omega,
        "stopped_by": trace.meta.params.get("stopped_by", ""),
        "beta_classical": CLASSICAL_BETA[algo],
        "evaluations": {
            key.removeprefix("evals_"): int(val)
            for key, val in trace.meta.params.items()
            if key.startswith("evals_")
        },
        "trace_path": str(out),
        "config": effective_config,
    }
    _write_json(summary, out.with_suffix(".json"))
    print(
        f"{trace.meta.algorithm} on {trace.meta.problem}: {len(trace)} records, "
        f"final omega {last.omega:.3e} -> {out}"
    )
    return 0


# --------------------------------------------------------------- audit ----


def _cmd_audit(ns: argparse.Namespace) -> int:
    try:
        cfg = _load_config(ns.config, "audit")
        trace_path = _effective(ns.trace, cfg, "trace", None)
        if trace_path is None:
            return _fail("audit needs --trace", 2)
        trace = load_trace(trace_path)
        file_constants = {}
        constants_file = _effective(ns.constants_file, cfg, "constants_file", None)
        if constants_file:
            file_constants = json.loads(Path(constants_file).read_text(encoding="utf-8"))
        def const(flag_value, key, default=None):
            v = _effective(flag_value, cfg, key, file_constants.get(key, default))
            if v is None:
                raise ValueError(f"audit needs --{key.replace('_', '-')}")
            return float(v)
        constants = TheoremConstants(
            kappa_d=const(ns.kappa_d, "kappa_d"),
            beta=const(ns.beta, "beta"),
            kappa_a=const(ns.kappa_a, "kappa_a", 1.0),
            kappa_b=const(ns.kappa_b, "kappa_b", 0.0),
            kappa_c=const(ns.kappa_c, "kappa_c", 0.0),
        )
        grid_text = _effective(ns.eps_grid, cfg, "eps_grid", None)
        if grid_text is None:
            return _fail("audit needs --eps-grid", 2)
        grid = theorem.EpsilonGrid(tuple(parse_eps_grid(grid_text)))
    except (OSError, ValueError, TraceParseError, json.JSONDecodeError) as exc:
        return _fail(str(exc), 2)

    report = theorem.audit(trace, constants, grid)
    report_path = Path(_effective(ns.report, cfg, "report", str(trace_path) + ".audit.json"))
    table_path = Path(_effective(ns.table, cfg, "table", str(trace_path) + ".keps.csv"))
    payload = report.to_dict()
    payload["config"] = {
        "trace": str(trace_path),
        "eps_grid": list(grid.values),
        "report": str(report_path),
        "table": str(table_path),
    }
    _write_json(payload, report_path)
    report.write_k_eps_csv(table_path)
    print(f"kstop: {'ok' if report.kstop_ok else f'violated at k={report.kstop_violation}'}")
    print(f"sufficient decrease: {'ok' if report.succ_ok else f'violated at k={report.succ_violation}'}" + (f" (kappa_d_hat={report.kappa_d_hat:.6g})" if report.kappa_d_hat is not None else ""))
    print(f"growth: {'ok' if report.growth_ok else f'violated at k={report.growth_violation}'}")
    for row in report.k_eps_table:
        if row.k_eps is None or row.bound8_ok is None:
            print(f"eps={row.eps:g}: {row.note or 'bounds not evaluated'}")
        else:
            print(
                f"eps={row.eps:g}: k(eps)={row.k_eps} bound_rhs={row.bound8_rhs:.6g} "
                f"[{'ok' if row.bound8_ok else 'VIOLATED'}] "
                f"cardinality {row.card_lhs} <= {row.card_rhs:.6g} "
                f"[{'ok' if row.card_ok else 'VIOLATED'}]"
            )
    if report.fitted_exponent is not None:
        print(f"fitted exponent: {report.fitted_exponent:.4f} (residual {report.fit_residual:.2e})")
    print(f"report -> {report_path}; table -> {table_path}")
    return 0 if report.all_checks_pass else 1


# -------------------------------------------------------- hard-instance ----


def _cmd_hard_instance(ns: argparse.Namespace) -> int:
    try:
        cfg = _load_config(ns.config, "hard-instance")
        alpha = float(_effective(ns.alpha, cfg, "alpha", 0.1))
        delta = float(_effective(ns.delta, cfg, "delta", 0.25))
        params = hi.HardInstanceParams(alpha=alpha, delta=delta)
    except (ValueError, OSError) as exc:
        return _fail(str(exc), 2)
    instance = hi.HardInstance(params)
    prefix = Path(_effective(ns.out_prefix, cfg, "out_prefix", f"hard_a{alpha:g}_d{delta:g}"))
    knots = int(_effective(ns.knots, cfg, "knots", 32))
    knots_out = Path(_effective(ns.knots_out, cfg, "knots_out", f"{prefix}_knots.csv"))
    hi.write_knot_csv(instance, knots, knots_out)
    written = [str(knots_out)]

    curve_out = _effective(ns.curve_out, cfg, "curve_out", None)
    svg_out = _effective(ns.svg, cfg, "svg", None)
    plot_range = _effective(ns.plot_range, cfg, "plot_range", None)
    samples = int(_effective(ns.samples, cfg, "samples", 400))
    if plot_range or curve_out or svg_out:
        try:
            x_lo, x_hi = _parse_range(instance, plot_range or "x0:x4")
            rows = instance.sample_curve(x_lo, x_hi, samples)
        except ValueError as exc:
            return _fail(str(exc), 2)
        curve_path = Path(curve_out or f"{prefix}_curve.csv")
        hi.write_curve_csv(rows, curve_path)
        written.append(str(curve_path))
        if svg_out:
            render_panels(_curve_panels(rows), svg_out)
            written.append(str(svg_out))

    status = 0
    if ns.replicate:
        grid_text = _effective(ns.eps_grid, cfg, "eps_grid", "logspace:-1:-3:5")
        try:
            grid = theorem.EpsilonGrid(tuple(parse_eps_grid(grid_text)))
        except ValueError as exc:
            return _fail(str(exc), 2)
        predicted = {eps: instance.predicted_k_eps(eps) for eps in grid.values}
        default_budget = max(predicted.values()) + 1000
        run_params = RunParams(
            x0=[0.0],
            max_iterations=int(_effective(ns.max_iter, cfg, "max_iter", default_budget)),
            omega_tol=float(_effective(ns.tol, cfg, "tol", min(grid.values))),
            options={"t_init": alpha, "c": 0.9},
        )
        try:
            trace = run_algorithm("sd", instance.as_problem(), run_params)
        except OracleError as exc:
            return _fail(f"oracle failure: {exc}", 3)
        trace_out = Path(_effective(ns.trace_out, cfg, "trace_out", f"{prefix}_replication.trc"))
        save_trace(trace, trace_out)
        written.append(str(trace_out))
        comparison = []
        for eps in grid.values:
            measured = theorem.first_hit_index(trace, eps)
            match = measured is not None and measured == predicted[eps]
            comparison.append(
                {"eps": eps, "measured": measured, "predicted": predicted[eps], "equal": match}
            )
            flag = "ok" if match else "MISMATCH"
            print(f"eps={eps:g}: measured={measured} predicted={predicted[eps]} [{flag}]")
            if not match:
                status = 1
        compare_out = Path(
            _effective(ns.compare_out, cfg, "compare_out", f"{prefix}_keps.json")
        )
        _write_json(
            {
                "comparison": comparison,
                "config": {
                    "alpha": alpha,
                    "delta": delta,
                    "eps_grid": list(grid.values),
                    "max_iter": run_params.max_iterations,
                    "tol": run_params.omega_tol,
                    "trace": str(trace_out),
                },
            },
            compare_out,
        )
        written.append(str(compare_out))
    print("wrote: " + ", ".join(written))
    return status


def _parse_range(instance: hi.HardInstance, text: str) -> tuple[float, float]:
    """'x0:x4' (knot indices) or 'a:b' (plain floats)."""
    lo_text, sep, hi_text = text.partition(":")
    if not sep:
        raise ValueError(f"bad range {text!r}; expected lo:hi or xI:xJ")

    def side(tok: str) -> float:
        tok = tok.strip()
        if tok.startswith("x") and tok[1:].isdigit():
            return instance.knot_x(int(tok[1:]))
        return float(tok)

    x_lo, x_hi = side(lo_text), side(hi_text)
    if not x_hi > x_lo:
        raise ValueError(f"empty range [{x_lo}, {x_hi}]")
    return x_lo, x_hi


def _curve_panels(rows: list[hi.CurveSample]) -> list[Panel]:
    f_line = [(r.x, r.f) for r in rows]
    g_line = [(r.x, r.fprime) for r in rows]
    # second derivative: break the polyline at every jump so the
    # discontinuities render as gaps, not vertical connectors
    h_lines: list[list[tuple[float, float]]] = []
    current: list[tuple[float, float]] = []
    for r in rows:
        if r.fsecond_left != r.fsecond_right and current:
            current.append((r.x, r.fsecond_left))
            h_lines.append(current)
            current = [(r.x, r.fsecond_right)]
        else:
            current.append((r.x, r.fsecond_right))
    if current:
        h_lines.append(current)
    return [
        Panel("f", [f_line]),
        Panel("f'", [g_line]),
        Panel("f''", h_lines),
    ]


# ----------------------------------------------------------------- fit ----


def _cmd_fit(ns: argparse.Namespace) -> int:
    try:
        cfg = _load_config(ns.config, "fit")
        pairs: list[tuple[float, float]] = []
        table = _effective(ns.table, cfg, "table", None)
        trace_path = _effective(ns.trace, cfg, "trace", None)
        if table:
            lines = Path(table).read_text(encoding="utf-8").strip().splitlines()
            header = lines[0].split(",")
            try:
                i_eps, i_k = header.index("eps"), header.index("k_eps")
            except ValueError:
                return _fail(f"table {table!r} lacks eps/k_eps columns", 2)
            for line in lines[1:]:
                cells = line.split(",")
                if cells[i_k].strip():
                    pairs.append((float(cells[i_eps]), float(cells[i_k])))
        elif trace_path:
            grid_text = _effective(ns.eps_grid, cfg, "eps_grid", None)
            if grid_text is None:
                return _fail("fit from a trace needs --eps-grid", 2)
            trace = load_trace(trace_path)
            for eps in parse_eps_grid(grid_text):
                k = theorem.first_hit_index(trace, eps)
                if k is not None and k >= 1:
                    pairs.append((eps, float(k)))
        else:
            return _fail("fit needs --table or --trace", 2)
        beta = _effective(ns.beta, cfg, "beta", None)
        family = _effective(ns.family, cfg, "family", None)
        if beta is None:
            beta = (
                theorem.lookup_exponent(
                    family,
                    int(_effective(ns.order, cfg, "order", 1)),
                    p=(int(ns.p) if ns.p is not None else None),
                )
                if family
                else 2.0
            )
        beta = float(beta)
        tolerance = float(_effective(ns.tolerance, cfg, "tolerance", 0.05))
        slope, residual = theorem.fit_complexity_exponent(pairs)
    except (ValueError, OSError, TraceParseError, KeyError) as exc:
        return _fail(str(exc), 2)
    verdict = "below" if slope <= beta + tolerance else "ABOVE"
    print(
        f"fitted exponent {slope:.4f} (residual {residual:.2e}); classical beta "
        f"{beta:g} -> {verdict} beta + {tolerance:g}"
    )
    return 0 if slope <= beta + tolerance else 1


# ---------------------------------------------------------------- plot ----


def _cmd_plot(ns: argparse.Namespace) -> int:
    try:
        cfg = _load_config(ns.config, "plot")
        curve = _effective(ns.curve, cfg, "curve", None)
        if curve:
            rows = _read_curve_csv(Path(curve))
        else:
            alpha = float(_effective(ns.alpha, cfg, "alpha", 0.1))
            delta = float(_effective(ns.delta, cfg, "delta", 0.001))
            instance = hi.HardInstance(hi.HardInstanceParams(alpha=alpha, delta=delta))
            x_lo, x_hi = _parse_range(
                instance, _effective(ns.plot_range, cfg, "plot_range", "x0:x4")
            )
            rows = instance.sample_curve(
                x_lo, x_hi, int(_effective(ns.samples, cfg, "samples", 400))
            )
        if not rows:
            return _fail("no samples to plot", 2)
        curve_out = _effective(ns.curve_out, cfg, "curve_out", None)
        if curve_out:
            hi.write_curve_csv(rows, curve_out)
            print(f"curve -> {curve_out}")
        if ns.csv_only:
            return 0
        svg_out = _effective(ns.svg, cfg, "svg", "curve.svg")
        render_panels(_curve_panels(rows), svg_out)
        print(f"svg -> {svg_out}")
        return 0
    except (ValueError, OSError) as exc:
        return _fail(str(exc), 2)


def _read_curve_csv(path: Path) -> list[hi.CurveSample]:
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0].strip() != "x,f,fprime,fsecond_left,fsecond_right":
        raise ValueError(f"{path}: not a sampled-curve CSV")
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != 5:
            raise ValueError(f"{path}: line {line_no}: expected 5 fields")
        rows.append(hi.CurveSample(*(float(c) for c in cells)))
    return rows


# ---------------------------------------------------------------- main ----


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telescope",
        description=(
            "Run descent methods, audit their traces against the refined "
            "iteration-count bounds, and reproduce the slow-convergence "
            "benchmark instance."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an optimizer and write a .trc trace")
    run_p.add_argument("--algo", choices=sorted(ALGORITHMS), default=None)
    run_p.add_argument("--problem", default=None)
    run_p.add_argument("--x0", default=None, help="comma-separated start point")
    run_p.add_argument("--max-iter", type=int, default=None)
    run_p.add_argument("--tol", type=float, default=None, help="stop when omega <= tol")
    run_p.add_argument("--param", action="append", help="algorithm option key=value")
    run_p.add_argument("--alpha", type=float, default=None, help="hard-instance alpha")
    run_p.add_argument("--delta", type=float, default=None, help="hard-instance delta")
    run_p.add_argument("--n", type=int, default=None, help="separable problem dimension")
    run_p.add_argument("--out", default=None, help="trace output path (.trc)")
    run_p.add_argument("--config", default=None)
    run_p.set_defaults(func=_cmd_run)

    audit_p = sub.add_parser("audit", help="audit a trace against the bounds")
    audit_p.add_argument("--trace", default=None)
    audit_p.add_argument("--kappa-d", dest="kappa_d", type=float, default=None)
    audit_p.add_argument("--beta", type=float, default=None)
    audit_p.add_argument("--kappa-a", dest="kappa_a", type=float, default=None)
    audit_p.add_argument("--kappa-b", dest="kappa_b", type=float, default=None)
    audit_p.add_argument("--kappa-c", dest="kappa_c", type=float, default=None)
    audit_p.add_argument("--constants-file", dest="constants_file", default=None)
    audit_p.add_argument("--eps-grid", dest="eps_grid", default=None)
    audit_p.add_argument("--report", default=None, help="audit report JSON path")
    audit_p.add_argument("--table", default=None, help="k(eps) table CSV path")
    audit_p.add_argument("--config", default=None)
    audit_p.set_defaults(func=_cmd_audit)

    hard_p = sub.add_parser(
        "hard-instance", help="build the slow instance; optionally replicate the run"
    )
    hard_p.add_argument("--alpha", type=float, default=None)
    hard_p.add_argument("--delta", type=float, default=None)
    hard_p.add_argument("--knots", type=int, default=None, help="knot table horizon")
    hard_p.add_argument("--knots-out", dest="knots_out", default=None)
    hard_p.add_argument("--curve-out", dest="curve_out", default=None)
    hard_p.add_argument("--plot-range", dest="plot_range", default=None, help="x0:x4 or lo:hi")
    hard_p.add_argument("--samples", type=int, default=None)
    hard_p.add_argument("--svg", default=None)
    hard_p.add_argument("--replicate", action="store_true")
    hard_p.add_argument("--eps-grid", dest="eps_grid", default=None)
    hard_p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    hard_p.add_argument("--tol", type=float, default=None)
    hard_p.add_argument("--trace-out", dest="trace_out", default=None)
    hard_p.add_argument("--compare-out", dest="compare_out", default=None)
    hard_p.add_argument("--out-prefix", dest="out_prefix", default=None)
    hard_p.add_argument("--config", default=None)
    hard_p.set_defaults(func=_cmd_hard_instance)

    fit_p = sub.add_parser("fit", help="fit the empirical complexity exponent")
    fit_p.add_argument("--table", default=None, help="k(eps) CSV from an audit")
    fit_p.add_argument("--trace", default=None)
    fit_p.add_argument("--eps-grid", dest="eps_grid", default=None)
    fit_p.add_argument("--beta", type=float, default=None)
    fit_p.add_argument("--family", default=None, help="registry family for beta")
    fit_p.add_argument("--order", type=int, default=None)
    fit_p.add_argument("--p", type=int, default=None)
    fit_p.add_argument("--tolerance", type=float, default=None)
    fit_p.add_argument("--config", default=None)
    fit_p.set_defaults(func=_cmd_fit)

    plot_p = sub.add_parser("plot", help="emit the three-panel curve figure")
    plot_p.add_argument("--curve", default=None, help="sampled-curve CSV input")
    plot_p.add_argument("--alpha", type=float, default=None)
    plot_p.add_argument("--delta", type=float, default=None)
    plot_p.add_argument("--plot-range", dest="plot_range", default=None)
    plot_p.add_argument("--samples", type=int, default=None)
    plot_p.add_argument("--svg", default=None)
    plot_p.add_argument("--curve-out", dest="curve_out", default=None)
    plot_p.add_argument("--csv-only", dest="csv_only", action="store_true")
    plot_p.add_argument("--config", default=None)
    plot_p.set_defaults(func=_cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    ns = _build_parser().parse_args(argv)
    return ns.func(ns)


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
