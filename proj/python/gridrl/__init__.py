"""Gridworld token-action policies: expert demos, SFT, and group-relative RL.

Thin wrapper over the C++ core. The heavy lifting (environments, policy
network, training loops) lives in the compiled ``_core`` extension; this
package re-exports the operations most useful from Python.
"""

from ._core import (
    VOCAB_SIZE,
    TOKEN_GRASP,
    TOKEN_NOOP,
    TOKEN_RELEASE,
    Cell,
    ConfigError,
    DegenerateGroupError,
    Env,
    EnvConfig,
    GenerationError,
    GridState,
    Policy,
    PolicyMeta,
    Scenario,
    SuccessReport,
    Trajectory,
    ZeroSignalError,
    clipped_surrogate,
    compute_advantages,
    evaluate,
    expert_demo,
    forward_logits,
    generate_demos,
    greedy_rollout,
    init_policy,
    load_checkpoint,
    make_scenario,
    observe,
    save_checkpoint,
    task_names,
    train_rl,
    train_sft,
)

__all__ = [
    "VOCAB_SIZE",
    "TOKEN_GRASP",
    "TOKEN_NOOP",
    "TOKEN_RELEASE",
    "Cell",
    "ConfigError",
    "DegenerateGroupError",
    "Env",
    "EnvConfig",
    "GenerationError",
    "GridState",
    "Policy",
    "PolicyMeta",
    "Scenario",
    "SuccessReport",
    "Trajectory",
    "ZeroSignalError",
    "clipped_surrogate",
    "compute_advantages",
    "evaluate",
    "expert_demo",
    "forward_logits",
    "generate_demos",
    "greedy_rollout",
    "init_policy",
    "load_checkpoint",
    "make_scenario",
    "observe",
    "save_checkpoint",
    "task_names",
    "train_rl",
    "train_sft",
]

__version__ = "0.1.0"
