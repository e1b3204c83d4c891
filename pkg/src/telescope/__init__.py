"""telescope: refined iteration-complexity audits for descent-method traces.

The package couples instrumented optimizers (gradient descent with Armijo
backtracking, a first-order trust region, adaptive cubic regularization and
coordinate direct search) with an auditor that checks their run histories
against per-iteration decrease and growth conditions, evaluates the halved
telescoping iteration bound per accuracy, and fits empirical complexity
exponents.  A univariate piecewise-cubic benchmark with closed-form knots
makes every quantity in that pipeline exactly predictable.
"""

from .hard_instance import (
    HardInstance,
    HardInstanceParams,
    HorizonError,
    hermite_cubic,
    knot_gradient_magnitude,
    predicted_k_eps,
    zeta,
)
from .optimizers import (
    ALGORITHMS,
    CLASSICAL_BETA,
    LinesearchError,
    RunParams,
    SubproblemError,
    ar2,
    audit_constants_for,
    direct_search,
    run_algorithm,
    steepest_descent_armijo,
    trust_region_first_order,
)
from .problems import EvalCounts, OracleError, Problem, make_problem, test_problems
from .theorem import (
    AuditReport,
    BoundPreconditionError,
    ComplexityClass,
    EpsilonGrid,
    audit,
    check_cardinality_bound,
    check_growth,
    check_kstop,
    check_sufficient_decrease,
    exponent_registry,
    first_hit_index,
    fit_complexity_exponent,
    kappa_d_hat,
    limdiff_trend,
    lookup_exponent,
    median_anchor,
    refined_bound_rhs,
    success_set,
    success_set_upto,
)
from .trace import (
    IterationRecord,
    OptimizationTrace,
    TheoremConstants,
    TraceInvariantError,
    TraceMeta,
    TraceParseError,
    load_trace,
    save_trace,
)

__version__ = "0.1.0"
