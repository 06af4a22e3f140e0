"""Non-stationary Bernoulli bandits: partition-tree-weighted posterior
sampling, classical baselines, environment generators and a benchmark harness.
"""

from .environments import (
    NssbpSpec,
    RegretCurve,
    adversarial_two_segment,
    env_log_likelihood,
    env_step,
    gen_geometric_adversarial,
    gen_geometric_uniform,
    gen_stationary,
    load_spec,
    pseudo_regret_step,
    save_spec,
)
from .errors import (
    ConfigError,
    DomainError,
    InvalidArm,
    InvalidLength,
    NotActive,
    NsbanditError,
    OutOfHorizon,
)
from .harness import (
    AlgorithmSpec,
    ExperimentConfig,
    ExperimentSummary,
    emit_csv,
    emit_curves,
    load_config,
    run_episode,
    run_experiment,
)
from .kt import (
    KtStats,
    KteState,
    kt_log_marginal,
    kt_posterior_mean,
    kt_posterior_sample,
    kt_predict,
    kt_redundancy_bound,
    kt_update,
    kte_log_marginal,
    kte_predict,
    kte_redundancy_bound,
    kte_update,
)
from .policies import ActivePtwPolicy, Policy, build_policy
from .ptw import (
    PtwState,
    Segment,
    SegmentPosterior,
    active_segments,
    ptw_log_marginal,
    ptw_update,
    sample_segment,
    segment_arm_stats,
    segment_posterior,
)

__version__ = "0.1.0"
