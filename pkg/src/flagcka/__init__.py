"""Device-independent conference key agreement from flagged Bell pairs.

Three parties share two-qubit entanglement one pair at a time. A flag
register carried by every party announces which pair a round holds, and
a flag-gated Bell test certifies both branches at once. The package
simulates the protocol, evaluates the certified key rates, and checks
the operator identities the security argument rests on.
"""

__version__ = "0.1.0"

from .bell import (
    CHSH_QUANTUM_MAX,
    GENERATION_INPUTS,
    Behavior,
    BehaviorEstimate,
    BellReport,
    FlagStats,
    ParallelBellReport,
    Scenario,
    SCENARIO,
    behavior_from_json,
    behavior_from_strategy,
    behavior_to_json,
    bell_value,
    bell_value_stderr,
    deterministic_behavior,
    estimate_behavior,
    flag_stats,
    local_bound_bruteforce,
    parallel_bell_value,
)
from .checks import (
    CheckReport,
    check_decoupling,
    check_flag_consistency,
    check_projection_lemma,
    check_sos_identity,
    check_weighted_tsirelson,
    extract_conditional_behavior,
    reports_to_json,
    run_check_suite,
)
from .protocol import (
    ProtocolConfig,
    ProtocolResult,
    Transcript,
    apply_tamper,
    config_from_json,
    config_to_json,
    postprocess,
    result_to_json,
    run_protocol,
    run_rounds,
    transcript_to_jsonl,
)
from .rates import (
    BoundMethod,
    RateReport,
    binary_entropy,
    branch_scores,
    chsh_min_entropy_bound,
    chsh_von_neumann_bound,
    curve_to_csv,
    no_flag_reference_rate,
    rate_report,
    robustness_curve,
)
from .strategies import (
    NoiseParams,
    Strategy,
    constant_flag_strategy,
    honest_flagged_strategy,
    honest_parallel_strategy,
    random_projective_strategy,
    strategy_from_json,
    strategy_to_json,
)

__all__ = [
    "__version__",
    "CHSH_QUANTUM_MAX",
    "GENERATION_INPUTS",
    "Behavior",
    "BehaviorEstimate",
    "BellReport",
    "FlagStats",
    "ParallelBellReport",
    "Scenario",
    "SCENARIO",
    "behavior_from_json",
    "behavior_from_strategy",
    "behavior_to_json",
    "bell_value",
    "bell_value_stderr",
    "deterministic_behavior",
    "estimate_behavior",
    "flag_stats",
    "local_bound_bruteforce",
    "parallel_bell_value",
    "CheckReport",
    "check_decoupling",
    "check_flag_consistency",
    "check_projection_lemma",
    "check_sos_identity",
    "check_weighted_tsirelson",
    "extract_conditional_behavior",
    "reports_to_json",
    "run_check_suite",
    "ProtocolConfig",
    "ProtocolResult",
    "Transcript",
    "apply_tamper",
    "config_from_json",
    "config_to_json",
    "postprocess",
    "result_to_json",
    "run_protocol",
    "run_rounds",
    "transcript_to_jsonl",
    "BoundMethod",
    "RateReport",
    "binary_entropy",
    "branch_scores",
    "chsh_min_entropy_bound",
    "chsh_von_neumann_bound",
    "curve_to_csv",
    "no_flag_reference_rate",
    "rate_report",
    "robustness_curve",
    "NoiseParams",
    "Strategy",
    "constant_flag_strategy",
    "honest_flagged_strategy",
    "honest_parallel_strategy",
    "random_projective_strategy",
    "strategy_from_json",
    "strategy_to_json",
]
