"""Instrumented first- and second-order descent methods.

Each optimizer consumes a :class:`~telescope.problems.Problem` and a
:class:`RunParams` and emits a validated :class:`OptimizationTrace` whose
optimality measure is the Euclidean gradient norm.  Runs stop when
``omega_k <= omega_tol`` or after ``max_iterations`` steps; the stopping
iterate is always recorded so first-hit indices are observable for every
accuracy above the threshold.  Given identical inputs a run is
deterministic; distinct runs may execute in parallel because oracles are
pure and counters are per-instance.

Pass a dict as ``diagnostics`` to collect per-iteration internals
(stepsizes, ratios, radii, regularization weights) that the trace format
does not carry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .problems import OracleError, Problem
from .trace import IterationRecord, OptimizationTrace, TheoremConstants, TraceMeta

__all__ = [
    "RunParams",
    "LinesearchError",
    "SubproblemError",
    "steepest_descent_armijo",
    "trust_region_first_order",
    "ar2",
    "direct_search",
    "ALGORITHMS",
    "CLASSICAL_BETA",
    "run_algorithm",
    "growth_constants_from_streaks",
    "audit_constants_for",
]


class LinesearchError(OracleError):
    """Backtracking exhausted its budget: non-Lipschitz gradient or bad oracles."""


class SubproblemError(OracleError):
    """A step subproblem solver failed to converge."""


@dataclass
class RunParams:
    """Starting point, budgets and algorithm-specific options for one run."""

    x0: Sequence[float]
    max_iterations: int = 1000
    omega_tol: float = 1e-6
    options: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.omega_tol < 0.0:
            raise ValueError("omega_tol must be >= 0")


def _merge_options(defaults: dict[str, float], given: dict[str, float]) -> dict[str, float]:
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ValueError(
            f"unknown option(s) {unknown}; valid options: {sorted(defaults)}"
        )
    merged = dict(defaults)
    merged.update({k: float(v) for k, v in given.items()})
    return merged


def _grad_norm(g: np.ndarray) -> float:
    # abs() keeps 1-D norms bit-identical to the stored gradient magnitude;
    # sqrt(g*g) may round differently.
    if g.size == 1:
        return abs(float(g[0]))
    return float(np.linalg.norm(g))


def _rec(k: int, x: np.ndarray, f: float, omega: float, successful: bool) -> IterationRecord:
    return IterationRecord(
        k=k,
        x=tuple(float(v) for v in np.atleast_1d(x)),
        f=float(f),
        omega=float(omega),
        successful=successful,
    )


def _meta(
    algorithm: str,
    problem: Problem,
    params: RunParams,
    opts: dict[str, float],
    beta_classical: float,
    extra: dict[str, str],
) -> TraceMeta:
    meta_params: dict[str, str] = {
        "x0": ",".join(format(float(v), ".17g") for v in np.atleast_1d(np.asarray(params.x0, dtype=float))),
        "max_iterations": str(params.max_iterations),
        "omega_tol": format(params.omega_tol, ".17g"),
        "beta_classical": format(beta_classical, ".17g"),
    }
    for key in sorted(opts):
        meta_params[key] = format(opts[key], ".17g")
    meta_params.update(extra)
    for key, value in problem.counts.as_dict().items():
        meta_params[f"evals_{key}"] = str(value)
    return TraceMeta(
        algorithm=algorithm,
        problem=problem.name,
        params=meta_params,
        measure="gradient-norm",
        dimension=int(np.atleast_1d(np.asarray(params.x0, dtype=float)).size),
    )


_SD_DEFAULTS = {"c": 1e-4, "theta": 0.5, "t_init": 1.0, "j_max": 60}


def steepest_descent_armijo(
    problem: Problem, params: RunParams, diagnostics: dict | None = None
) -> OptimizationTrace:
    """Gradient descent with backtracking Armijo linesearch.

    Accepts the largest stepsize t in {t_init * theta**j} with
    f(x - t*grad) <= f(x) - c*t*||grad||**2; every recorded iteration before
    the stopping one is successful.  The iterate update is the plain IEEE
    expression ``x - t*g`` so runs are reproducible bit for bit.
    """
    opts = _merge_options(_SD_DEFAULTS, params.options)
    c, theta, t_init = opts["c"], opts["theta"], opts["t_init"]
    j_max = int(opts["j_max"])
    x = np.atleast_1d(np.asarray(params.x0, dtype=float)).copy()
    f = problem.value(x)
    records: list[IterationRecord] = []
    stepsizes: list[float] = []
    backtracks_total = 0
    stopped = "max_iterations"
    for k in range(params.max_iterations + 1):
        g = problem.gradient(x)
        omega = _grad_norm(g)
        if omega <= params.omega_tol:
            records.append(_rec(k, x, f, omega, False))
            stopped = "omega_tol"
            break
        if k == params.max_iterations:
            records.append(_rec(k, x, f, omega, False))
            stopped = "max_iterations"
            break
        t = t_init
        accepted = False
        backtracks = 0
        while backtracks <= j_max:
            trial = x - t * g
            f_trial = problem.value(trial)
            if f_trial <= f - c * t * omega * omega:
                accepted = True
                break
            t *= theta
            backtracks += 1
        if not accepted:
            raise LinesearchError(
                f"Armijo backtracking exhausted {j_max} halvings at k={k} "
                f"(omega={omega:.3e}); gradient may not be Lipschitz or the "
                "oracles are inconsistent"
            )
        backtracks_total += backtracks
        if not f_trial < f or np.array_equal(trial, x):
            # accepted step is numerically a no-op; stop rather than stall
            records.append(_rec(k, x, f, omega, False))
            stopped = "stalled"
            break
        records.append(_rec(k, x, f, omega, True))
        stepsizes.append(t)
        x, f = trial, f_trial
    if diagnostics is not None:
        diagnostics["stepsizes"] = stepsizes
        diagnostics["backtracks_total"] = backtracks_total
        diagnostics["stopped_by"] = stopped
    meta = _meta(
        "steepest-descent-armijo",
        problem,
        params,
        opts,
        beta_classical=2.0,
        extra={"backtracks_total": str(backtracks_total), "stopped_by": stopped},
    )
    return OptimizationTrace(records=tuple(records), meta=meta)


_TR_DEFAULTS = {
    "eta1": 0.1,
    "eta2": 0.9,
    "gamma_dec": 0.5,
    "gamma_inc": 2.0,
    "delta0": 1.0,
    "use_hessian": 1.0,
}


def _tr_step(g: np.ndarray, B: np.ndarray | None, radius: float) -> tuple[np.ndarray, float]:
    """Step within ||s|| <= radius achieving at least the Cauchy decrease of
    the quadratic model; returns (s, model decrease)."""
    gnorm = _grad_norm(g)
    if B is None:
        s = -(radius / gnorm) * g
        return s, radius * gnorm

    def model_decrease(s: np.ndarray) -> float:
        return -(float(g @ s) + 0.5 * float(s @ B @ s))

    gBg = float(g @ B @ g)
    if gBg <= 0.0:
        tau = 1.0
    else:
        tau = min(1.0, gnorm**3 / (radius * gBg))
    best = -(tau * radius / gnorm) * g
    best_dec = model_decrease(best)

    candidate = None
    try:
        np.linalg.cholesky(B)
        newton = np.linalg.solve(B, -g)
        if _grad_norm(newton) <= radius:
            candidate = newton
        elif gBg > 0.0:
            p_u = -(float(g @ g) / gBg) * g
            nu = _grad_norm(p_u)
            if nu >= radius:
                candidate = -(radius / gnorm) * g
            else:
                d = newton - p_u
                a = float(d @ d)
                b = 2.0 * float(p_u @ d)
                cc = float(p_u @ p_u) - radius * radius
                disc = max(b * b - 4.0 * a * cc, 0.0)
                tau2 = (-b + math.sqrt(disc)) / (2.0 * a)
                candidate = p_u + tau2 * d
    except np.linalg.LinAlgError:
        candidate = None
    if candidate is not None:
        cand_dec = model_decrease(candidate)
        if cand_dec > best_dec:
            return candidate, cand_dec
    return best, best_dec


def trust_region_first_order(
    problem: Problem, params: RunParams, diagnostics: dict | None = None
) -> OptimizationTrace:
    """Standard trust region seeking first-order points.

    The model is quadratic with B = exact Hessian when available (set
    ``use_hessian=0`` to force the pure gradient model); the step achieves at
    least the Cauchy decrease inside radius Delta_k.  An iteration succeeds
    when the achieved/predicted ratio reaches eta1; otherwise the iterate is
    kept and the radius shrinks.
    """
    opts = _merge_options(_TR_DEFAULTS, params.options)
    eta1, eta2 = opts["eta1"], opts["eta2"]
    gamma_dec, gamma_inc = opts["gamma_dec"], opts["gamma_inc"]
    radius = opts["delta0"]
    use_hessian = bool(opts["use_hessian"]) and problem.has_hessian
    x = np.atleast_1d(np.asarray(params.x0, dtype=float)).copy()
    f = problem.value(x)
    cached: tuple[np.ndarray, float, np.ndarray | None] | None = None
    records: list[IterationRecord] = []
    ratios: list[float] = []
    radii: list[float] = []
    decreases: list[float] = []
    stopped = "max_iterations"
    for k in range(params.max_iterations + 1):
        if cached is None:
            g = problem.gradient(x)
            omega = _grad_norm(g)
            B = problem.hessian(x) if use_hessian else None
            cached = (g, omega, B)
        else:
            g, omega, B = cached
        if omega <= params.omega_tol:
            records.append(_rec(k, x, f, omega, False))
            stopped = "omega_tol"
            break
        if k == params.max_iterations:
            records.append(_rec(k, x, f, omega, False))
            break
        s, model_dec = _tr_step(g, B, radius)
        success = False
        if model_dec > 0.0:
            trial = x + s
            f_trial = problem.value(trial)
            rho = (f - f_trial) / model_dec
            success = rho >= eta1 and f_trial < f and not np.array_equal(trial, x)
        else:
            rho = -math.inf
        records.append(_rec(k, x, f, omega, success))
        ratios.append(rho)
        radii.append(radius)
        decreases.append(model_dec)
        if success:
            x, f = trial, f_trial
            cached = None
            if rho >= eta2:
                radius *= gamma_inc
        else:
            radius *= gamma_dec
    if diagnostics is not None:
        diagnostics["ratios"] = ratios
        diagnostics["radii"] = radii
        diagnostics["model_decreases"] = decreases
        diagnostics["stopped_by"] = stopped
    meta = _meta(
        "trust-region",
        problem,
        params,
        opts,
        beta_classical=2.0,
        extra={"stopped_by": stopped},
    )
    return OptimizationTrace(records=tuple(records), meta=meta)


_AR2_DEFAULTS = {
    "sigma0": 1.0,
    "gamma": 2.0,
    "sigma_min": 1e-8,
    "eta1": 0.1,
    "subproblem_tol": 1e-10,
}


def _cubic_reg_step(
    g: np.ndarray, H: np.ndarray, sigma: float, tol: float
) -> np.ndarray:
    """Global minimizer of g's + s'Hs/2 + (sigma/3)||s||^3 via the scalar
    secular equation lam = sigma*||s(lam)|| on (H + lam I) s = -g."""
    evals, Q = np.linalg.eigh(H)
    b = Q.T @ g
    lam_lo = max(0.0, -float(evals[0]))
    tiny = 1e-14 * max(1.0, float(np.max(np.abs(evals))))

    def snorm(lam: float) -> float:
        denom = evals + lam
        if np.any(np.abs(denom) < tiny):
            return math.inf
        return float(np.sqrt(np.sum((b / denom) ** 2)))

    if lam_lo > 0.0:
        # Hard case: the gradient has no weight on the most negative
        # eigendirections, so the secular equation may have no root above
        # lam_lo; pad the pseudo-inverse step along the extreme eigenvector.
        low = np.abs(evals + lam_lo) < tiny
        if np.all(np.abs(b[low]) <= tol * max(1.0, _grad_norm(g))):
            denom = evals + lam_lo
            coeff = np.where(low, 0.0, b / np.where(low, 1.0, denom))
            s_part = -(Q @ coeff)
            target = lam_lo / sigma
            ns = _grad_norm(np.atleast_1d(s_part)) if s_part.size == 1 else float(np.linalg.norm(s_part))
            if ns <= target:
                pad = math.sqrt(max(target * target - ns * ns, 0.0))
                return s_part + pad * Q[:, 0]

    lo = lam_lo
    hi = max(lam_lo + 1.0, 2.0 * lam_lo + sigma)
    for _ in range(400):
        if hi - sigma * snorm(hi) > 0.0:
            break
        hi = lam_lo + 2.0 * (hi - lam_lo)
    else:
        raise SubproblemError("cubic-regularized step: failed to bracket the secular root")

    lam = 0.5 * (lo + hi)
    for _ in range(200):
        nrm = snorm(lam)
        h_val = lam - sigma * nrm
        if math.isfinite(nrm) and abs(h_val) <= tol * max(1.0, lam):
            break
        if h_val > 0.0:
            hi = lam
        else:
            lo = lam
        # Newton step on h(lam) = lam - sigma*||s(lam)||, safeguarded by the bracket
        if math.isfinite(nrm) and nrm > 0.0:
            denom = evals + lam
            dn = -float(np.sum(b**2 / denom**3)) / nrm
            h_prime = 1.0 - sigma * dn
            lam_newton = lam - h_val / h_prime if h_prime > 0.0 else None
        else:
            lam_newton = None
        if lam_newton is not None and lo < lam_newton < hi:
            lam = lam_newton
        else:
            lam = 0.5 * (lo + hi)
    s = -(Q @ (b / (evals + lam)))
    gnorm = max(1.0, float(np.linalg.norm(g)))
    residual = float(np.linalg.norm(H @ s + lam * s + g))
    if residual > 1e3 * tol * gnorm or abs(sigma * float(np.linalg.norm(s)) - lam) > 1e3 * tol * max(1.0, lam):
        raise SubproblemError(
            f"cubic-regularized step did not converge (residual {residual:.2e})"
        )
    return s


def ar2(
    problem: Problem, params: RunParams, diagnostics: dict | None = None
) -> OptimizationTrace:
    """Second-order method with adaptive cubic regularization.

    The step minimizes the cubic model f + g's + s'Hs/2 + (sigma/3)||s||^3;
    sigma is divided by gamma on success and multiplied on failure, with the
    acceptance ratio measured against the cubic model decrease.
    """
    if not problem.has_hessian:
        raise OracleError(f"ar2 requires a Hessian oracle (problem {problem.name!r})")
    opts = _merge_options(_AR2_DEFAULTS, params.options)
    eta1, gamma = opts["eta1"], opts["gamma"]
    sigma_min, subtol = opts["sigma_min"], opts["subproblem_tol"]
    sigma = opts["sigma0"]
    x = np.atleast_1d(np.asarray(params.x0, dtype=float)).copy()
    f = problem.value(x)
    cached: tuple[np.ndarray, float, np.ndarray] | None = None
    records: list[IterationRecord] = []
    sigmas: list[float] = []
    decreases: list[float] = []
    stopped = "max_iterations"
    for k in range(params.max_iterations + 1):
        if cached is None:
            g = problem.gradient(x)
            omega = _grad_norm(g)
            H = problem.hessian(x)
            cached = (g, omega, H)
        else:
            g, omega, H = cached
        if omega <= params.omega_tol:
            records.append(_rec(k, x, f, omega, False))
            stopped = "omega_tol"
            break
        if k == params.max_iterations:
            records.append(_rec(k, x, f, omega, False))
            break
        s = _cubic_reg_step(g, np.atleast_2d(H), sigma, subtol)
        snorm = float(np.linalg.norm(s))
        model_dec = -(
            float(g @ s) + 0.5 * float(s @ np.atleast_2d(H) @ s) + (sigma / 3.0) * snorm**3
        )
        success = False
        if model_dec > 0.0:
            trial = x + s
            f_trial = problem.value(trial)
            rho = (f - f_trial) / model_dec
            success = rho >= eta1 and f_trial < f and not np.array_equal(trial, x)
        records.append(_rec(k, x, f, omega, success))
        sigmas.append(sigma)
        decreases.append(model_dec)
        if success:
            x, f = trial, f_trial
            cached = None
            sigma = max(sigma / gamma, sigma_min)
        else:
            sigma *= gamma
    if diagnostics is not None:
        diagnostics["sigmas"] = sigmas
        diagnostics["model_decreases"] = decreases
        diagnostics["stopped_by"] = stopped
    meta = _meta(
        "ar2", problem, params, opts, beta_classical=1.5, extra={"stopped_by": stopped}
    )
    return OptimizationTrace(records=tuple(records), meta=meta)


_DS_DEFAULTS = {"c": 1e-4, "gamma_inc": 2.0, "gamma_dec": 0.5, "alpha0": 1.0}


def direct_search(
    problem: Problem, params: RunParams, diagnostics: dict | None = None
) -> OptimizationTrace:
    """Coordinate direct search with the quadratic forcing test.

    Polls x + alpha*d over d in (+e_1, -e_1, ..., +e_n, -e_n) and moves to
    the first point with f(x + alpha*d) <= f(x) - c*alpha**2, growing alpha;
    a full poll failure keeps the iterate and shrinks alpha.  The reported
    optimality measure is the gradient norm, obtained through audit-only
    gradient calls that the algorithm itself never sees.
    """
    opts = _merge_options(_DS_DEFAULTS, params.options)
    c, gamma_inc, gamma_dec = opts["c"], opts["gamma_inc"], opts["gamma_dec"]
    alpha = opts["alpha0"]
    x = np.atleast_1d(np.asarray(params.x0, dtype=float)).copy()
    n = x.size
    f = problem.value(x)
    omega: float | None = None
    records: list[IterationRecord] = []
    meshes: list[float] = []
    stopped = "max_iterations"
    for k in range(params.max_iterations + 1):
        if omega is None:
            omega = _grad_norm(problem.gradient_audit(x))
        if omega <= params.omega_tol:
            records.append(_rec(k, x, f, omega, False))
            stopped = "omega_tol"
            break
        if k == params.max_iterations:
            records.append(_rec(k, x, f, omega, False))
            break
        success = False
        trial = None
        f_trial = math.inf
        for i in range(n):
            for sign in (1.0, -1.0):
                cand = x.copy()
                cand[i] += sign * alpha
                f_cand = problem.value(cand)
                if f_cand <= f - c * alpha * alpha and f_cand < f and not np.array_equal(cand, x):
                    success = True
                    trial, f_trial = cand, f_cand
                    break
            if success:
                break
        records.append(_rec(k, x, f, omega, success))
        meshes.append(alpha)
        if success:
            x, f = trial, f_trial
            omega = None
            alpha *= gamma_inc
        else:
            alpha *= gamma_dec
    if diagnostics is not None:
        diagnostics["meshes"] = meshes
        diagnostics["stopped_by"] = stopped
    meta = _meta(
        "direct-search",
        problem,
        params,
        opts,
        beta_classical=2.0,
        extra={"stopped_by": stopped},
    )
    return OptimizationTrace(records=tuple(records), meta=meta)


ALGORITHMS = {
    "sd": steepest_descent_armijo,
    "tr": trust_region_first_order,
    "ar2": ar2,
    "ds": direct_search,
}

CLASSICAL_BETA = {"sd": 2.0, "tr": 2.0, "ar2": 1.5, "ds": 2.0}

_ALGORITHM_LABELS = {
    "steepest-descent-armijo": "sd",
    "trust-region": "tr",
    "ar2": "ar2",
    "direct-search": "ds",
}


def run_algorithm(
    name: str, problem: Problem, params: RunParams, diagnostics: dict | None = None
) -> OptimizationTrace:
    """Dispatch on the short algorithm name ('sd', 'tr', 'ar2', 'ds')."""
    if name not in ALGORITHMS:
        raise KeyError(
            f"unknown algorithm {name!r}; valid names: {', '.join(sorted(ALGORITHMS))}"
        )
    return ALGORITHMS[name](problem, params, diagnostics)


def growth_constants_from_streaks(
    gamma_inc: float, gamma_dec: float, scale0: float, log_headroom: float = 14.0
) -> tuple[float, float, float]:
    """Growth constants (kappa_a, kappa_b, kappa_c) for methods whose
    unsuccessful streaks shrink a scale parameter geometrically.

    Counting scale updates: failures up to k satisfy
    fails * log(1/gamma_dec) <= successes * log(gamma_inc)
    + log(scale0 / scale_min), and the running scale stays above a multiple
    of the current optimality measure, so |log scale_min| is covered by
    kappa_b*|log omega_k| plus a fixed headroom folded into kappa_c.
    """
    rate = math.log(1.0 / gamma_dec)
    if rate <= 0.0:
        raise ValueError("gamma_dec must lie in (0, 1)")
    kappa_a = 1.0 + math.log(gamma_inc) / rate
    kappa_b = 1.0 / rate
    kappa_c = (abs(math.log(scale0)) + log_headroom) / rate + 1.0
    return kappa_a, kappa_b, kappa_c


def audit_constants_for(trace: OptimizationTrace, margin: float = 1e-9) -> TheoremConstants:
    """Certifiable constants for a trace produced by this module.

    kappa_d is the empirically certified decrease constant (shrunk by
    ``margin`` and clamped into (0, 1]); the growth constants come from the
    documented per-algorithm mapping.
    """
    from .theorem import kappa_d_hat

    label = _ALGORITHM_LABELS.get(trace.meta.algorithm)
    if label is None:
        raise KeyError(f"no constants mapping for algorithm {trace.meta.algorithm!r}")
    beta = CLASSICAL_BETA[label]
    kd_hat = kappa_d_hat(trace, beta)
    if kd_hat is None or kd_hat <= 0.0:
        raise ValueError("trace has no successful iterations to certify kappa_d from")
    kappa_d = min(1.0, kd_hat * (1.0 - margin))
    p = trace.meta.params
    if label == "sd":
        ka, kb, kc = 1.0, 0.0, 0.0
    elif label == "tr":
        ka, kb, kc = growth_constants_from_streaks(
            float(p["gamma_inc"]), float(p["gamma_dec"]), float(p["delta0"])
        )
    elif label == "ds":
        ka, kb, kc = growth_constants_from_streaks(
            float(p["gamma_inc"]), float(p["gamma_dec"]), float(p["alpha0"])
        )
    else:  # ar2: sigma moves by the same factor both ways; the classical
        # growth bound for regularization methods carries no |log omega| term,
        # so the sigma travel is covered by a fixed headroom in kappa_c alone.
        gamma = float(p["gamma"])
        sigma0 = float(p["sigma0"])
        sigma_min = float(p["sigma_min"])
        rate = math.log(gamma)
        ka = 2.0
        kb = 0.0
        kc = (abs(math.log(sigma0 / sigma_min)) + 30.0) / rate + 1.0
    return TheoremConstants(kappa_d=kappa_d, beta=beta, kappa_a=ka, kappa_b=kb, kappa_c=kc)
