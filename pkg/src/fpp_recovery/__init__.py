"""First passage percolation with recovery.

A growth process spreads outward from the root of a semi-line or a
Galton-Watson tree: every edge carries an independent Exp(1) passage
time, and each vertex, once reached, stays "red" for an independent
Exp(gamma) recovery period before turning permanently black.  Black
vertices keep transmitting; only the colour changes.

The package has four layers:

* :mod:`fpp_recovery.offspring` -- offspring distributions and the
  text grammar used to describe growth graphs,
* :mod:`fpp_recovery.engine` -- the event-driven simulator plus
  snapshot observables (red runs, red clusters, boundary counts),
* :mod:`fpp_recovery.exact` -- closed-form reference quantities
  (tail-run law, complete-recovery probabilities, growth and
  containment constants) carried in log space where needed,
* :mod:`fpp_recovery.experiments` -- replicated Monte Carlo studies
  that reconcile simulation output against the exact layer,
* :mod:`fpp_recovery.percolation` -- the static cluster law used by
  the high-recovery comparison.

``fppr`` is the command line front end (see :mod:`fpp_recovery.cli`).
"""

from fpp_recovery.offspring import (
    OffspringSpec,
    OffspringError,
    parse_offspring,
    offspring_mean,
    sample_offspring,
    sample_offspring_batch,
    extinction_probability,
)
from fpp_recovery.engine import (
    RunConfig,
    EventLog,
    Snapshot,
    VertexRecord,
    ValidationError,
    VertexCapError,
    OutOfHorizonError,
    run_replication,
    snapshot,
    longest_red_path,
    largest_red_cluster,
    tail_cluster_size,
    jump_chain,
    reaching_times,
)
from fpp_recovery.exact import (
    ExactValue,
    PrecisionError,
    DomainError,
    pi_tail,
    pi_tail_gamma_form,
    pi_asymptote,
    s_ell,
    s_ell_infinity,
    nu_n,
    nu_table,
    nu_limit,
    c_tilde,
    percolation_kappa,
    percolation_constants,
    gamma_c,
    reference_curves,
)
from fpp_recovery.experiments import (
    Estimate,
    ExperimentReport,
    SurvivalPolicy,
    InsufficientDataError,
    estimate_tail_law,
    estimate_complete_recovery,
    estimate_eta,
    check_boundary_inequality,
    growth_report,
    liminf_trend,
    containment_check,
    percolation_cluster,
    wchain_transition_check,
)

__version__ = "0.1.0"

__all__ = [
    "OffspringSpec", "OffspringError", "parse_offspring", "offspring_mean",
    "sample_offspring", "sample_offspring_batch", "extinction_probability",
    "RunConfig", "EventLog", "Snapshot", "VertexRecord",
    "ValidationError", "VertexCapError", "OutOfHorizonError",
    "run_replication", "snapshot", "longest_red_path", "largest_red_cluster",
    "tail_cluster_size", "jump_chain", "reaching_times",
    "ExactValue", "PrecisionError", "DomainError",
    "pi_tail", "pi_tail_gamma_form", "pi_asymptote",
    "s_ell", "s_ell_infinity", "nu_n", "nu_table", "nu_limit",
    "c_tilde", "percolation_kappa", "percolation_constants", "gamma_c",
    "reference_curves",
    "Estimate", "ExperimentReport", "SurvivalPolicy", "InsufficientDataError",
    "estimate_tail_law", "estimate_complete_recovery", "estimate_eta",
    "check_boundary_inequality", "growth_report", "liminf_trend",
    "containment_check", "percolation_cluster", "wchain_transition_check",
    "__version__",
]
