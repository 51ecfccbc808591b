"""Desk-scale laboratory for online RL under linear q^pi-realizability."""

from ._skippy import (  # noqa: F401
    ConstantMode,
    ConstantSet,
    FeatureTable,
    Instance,
    InstanceSpec,
    Mdp,
    MemorylessPolicy,
    Opt1Mode,
    PracticalOverrides,
    RewardDist,
    RunConfig,
    RunSummaryRow,
    Trajectory,
    ValueTables,
    compute_constants,
    enumeration_eta_hat,
    evaluate_policy_exact,
    generate_instance,
    load_instance,
    measure_misspecification,
    optimal_values,
    rollout,
    run_single,
    save_instance,
    skip_conversion_kappa,
    validate_features,
    validate_mdp,
)

__all__ = [name for name in dir() if not name.startswith("_")]
