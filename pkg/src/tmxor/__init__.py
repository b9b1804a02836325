"""Tsetlin Machine XOR convergence lab: exact chains and seeded simulations."""

from tmxor.core import (
    SUBPATTERN_A,
    SUBPATTERN_B,
    XOR_FULL,
    Action,
    Clause,
    Dataset,
    Feedback,
    FeedbackType,
    Machine,
    MachineConfig,
    Mode,
    TaState,
    classify,
    clause_eval,
    feedback_probs,
    sample_feedback,
    ta_update,
    train,
    train_step,
    u1,
    u2,
    vote_sum,
)

__version__ = "0.1.0"
