"""Seeded Monte Carlo experiments over many independent training runs.

All runs of an experiment advance together as one batch through
:func:`tmxor.core.advance`, but each run draws from its own stream
(:func:`tmxor.seeding.run_rng`), in the same order as :func:`tmxor.core.train`.
A run therefore ends in the same state whether it is simulated alone or
alongside others.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from tmxor.core import (
    SUBPATTERN_A,
    SUBPATTERN_B,
    XOR_FULL,
    Dataset,
    Machine,
    MachineConfig,
    advance,
    clause_outputs,
    gate_probability,
    initial_states,
    pick_rows,
    train_step,
)
from tmxor.seeding import run_rng

# Include masks of the two XOR sub-pattern clauses, automata ordered x1, ~x1, x2, ~x2.
FORM_A = np.array([False, True, True, False])  # ~x1 & x2
FORM_B = np.array([True, False, False, True])  # x1 & ~x2


class StopRule(enum.Enum):
    BUDGET = "budget"
    BOTH_SUBPATTERNS_AT_T = "both-at-T"
    CUSTOM = "custom"


def coverage_counts(states: np.ndarray, n: int) -> np.ndarray:
    """Counts ``(n_A, n_B, n_empty, n_other)`` along the last axis.

    ``states`` has shape ``(..., m, 4)``; clause identity is the include set,
    not automaton depth.
    """
    inc = states <= n
    is_a = (inc == FORM_A).all(axis=-1)
    is_b = (inc == FORM_B).all(axis=-1)
    empty = ~inc.any(axis=-1)
    other = ~(is_a | is_b | empty)
    return np.stack([is_a.sum(-1), is_b.sum(-1), empty.sum(-1), other.sum(-1)], axis=-1)


@dataclass(frozen=True)
class ExperimentSpec:
    config: MachineConfig
    dataset: Dataset = XOR_FULL
    runs: int = 200
    steps: int = 100_000
    stride: int = 1000
    stop: StopRule = StopRule.BUDGET
    # both-sub-pattern condition: n_A >= level and n_B >= level; defaults to T
    level: int | None = None
    dwell: int = 1000
    custom_stop: Callable[[np.ndarray], np.ndarray] | None = None
    check_blocking: bool = False
    keep_trajectories: bool = False
    chunk: int = 500

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.config.o != 2:
            raise ValueError("coverage is defined for the two-input XOR family")
        if self.stop is StopRule.CUSTOM and self.custom_stop is None:
            raise ValueError("custom stop rule needs custom_stop")

    @property
    def both_level(self) -> int:
        return self.config.T if self.level is None else self.level


@dataclass
class CoverageReport:
    config: dict
    dataset: str
    seed: int
    runs: int
    steps: int
    level: int
    dwell: int
    final_counts: list[list[int]]
    stopped_at: list[int]
    first_hit: list[int | None]
    sustained_at: list[int | None]
    final_states: list[list[int]] = field(repr=False)
    trajectories: list[tuple[int, int, int, int, int, int]] = field(default_factory=list, repr=False)

    @property
    def counts(self) -> np.ndarray:
        return np.asarray(self.final_counts)

    def fraction_both(self, level: int | None = None) -> float:
        k = self.level if level is None else level
        c = self.counts
        return float(np.mean((c[:, 0] >= k) & (c[:, 1] >= k)))

    @property
    def fraction_sustained(self) -> float:
        return float(np.mean([t is not None for t in self.sustained_at]))

    @property
    def fraction_hit(self) -> float:
        return float(np.mean([t is not None for t in self.first_hit]))

    @property
    def censored(self) -> int:
        return sum(t is None for t in self.first_hit)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "dataset": self.dataset,
            "seed": self.seed,
            "runs": self.runs,
            "steps": self.steps,
            "level": self.level,
            "dwell": self.dwell,
            "summary": {
                "fraction_both_final": self.fraction_both(),
                "fraction_sustained": self.fraction_sustained,
                "fraction_hit": self.fraction_hit,
                "censored": self.censored,
            },
            "final_counts": self.final_counts,
            "stopped_at": self.stopped_at,
            "first_hit": self.first_hit,
            "sustained_at": self.sustained_at,
            "final_states": self.final_states,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def trajectories_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "run", "n_A", "n_B", "n_empty", "n_other"])
        w.writerows(self.trajectories)
        return buf.getvalue()


def run_experiment(spec: ExperimentSpec, master_seed: int) -> CoverageReport:
    cfg = spec.config
    R, m, L = spec.runs, cfg.m, cfg.width
    K = cfg.uniforms_per_step
    rngs = [run_rng(master_seed, i) for i in range(R)]
    states = np.stack([initial_states(cfg, g) for g in rngs])
    weights = cfg.weights(spec.dataset)
    xs, ys = spec.dataset.arrays()
    level = spec.both_level

    active = np.ones(R, dtype=bool)
    stopped_at = np.full(R, spec.steps)
    first_hit = np.full(R, -1)
    sustained_at = np.full(R, -1)
    run_len = np.zeros(R, dtype=np.int64)
    traj: list[tuple[int, ...]] = []

    def record(step, counts):
        if spec.keep_trajectories:
            traj.extend((step, r, *map(int, counts[r])) for r in range(R))

    counts = coverage_counts(states, cfg.N)
    record(0, counts)
    if spec.steps > 0:
        hit0 = (counts[:, 0] >= cfg.T) | (counts[:, 1] >= cfg.T)
        first_hit[hit0] = 0

    t = 0
    while t < spec.steps and active.any():
        n = min(spec.chunk, spec.steps - t)
        u = np.stack([g.random((n, K)) for g in rngs], axis=1)  # (n, R, K)
        rows = pick_rows(u[:, :, 0], weights)
        for k in range(n):
            states = advance(
                states, xs[rows[k]], ys[rows[k]], u[k, :, 1:1 + m],
                u[k, :, 1 + m:].reshape(R, m, L), cfg,
                active=active, check_blocking=spec.check_blocking,
            )
            t += 1
            counts = coverage_counts(states, cfg.N)
            hit = (first_hit < 0) & ((counts[:, 0] >= cfg.T) | (counts[:, 1] >= cfg.T))
            first_hit[hit] = t
            both = (counts[:, 0] >= level) & (counts[:, 1] >= level)
            run_len = np.where(both, run_len + 1, 0)
            done = (sustained_at < 0) & (run_len >= spec.dwell)
            sustained_at[done] = t - spec.dwell + 1
            if spec.stop is StopRule.BOTH_SUBPATTERNS_AT_T:
                halt = active & (sustained_at >= 0)
            elif spec.stop is StopRule.CUSTOM:
                halt = active & np.asarray(spec.custom_stop(counts), dtype=bool)
            else:
                halt = None
            if halt is not None and halt.any():
                stopped_at[halt] = t
                active &= ~halt
            if spec.stride and t % spec.stride == 0:
                record(t, counts)
            if not active.any():
                break
    if spec.keep_trajectories and (not spec.stride or t % spec.stride):
        record(t, counts)

    def opt(a):
        return [None if v < 0 else int(v) for v in a]

    return CoverageReport(
        config=cfg.to_dict(),
        dataset=spec.dataset.name,
        seed=int(master_seed),
        runs=R,
        steps=spec.steps,
        level=level,
        dwell=spec.dwell,
        final_counts=counts.tolist(),
        stopped_at=[int(v) for v in stopped_at],
        first_hit=opt(first_hit),
        sustained_at=opt(sustained_at),
        final_states=states.reshape(R, -1).tolist(),
        trajectories=[tuple(int(v) for v in row) for row in traj],
    )


def final_machines(report: CoverageReport, config: MachineConfig) -> list[Machine]:
    return [Machine(config, np.array(s).reshape(config.m, config.width)) for s in report.final_states]


# --------------------------------------------------------------------------
# Named experiments


def lemma12_experiment(
    dataset: Dataset = SUBPATTERN_A,
    m: int = 1,
    s: float = 10.0,
    steps: int = 100_000,
    runs: int = 200,
    seed: int = 0,
    gates: tuple[float, float] = (0.5, 0.5),
    N: int = 1,
) -> float:
    """Fraction of (run, clause) pairs that end on the dataset's sub-pattern."""
    if dataset.name == SUBPATTERN_A.name:
        col = 0
    elif dataset.name == SUBPATTERN_B.name:
        col = 1
    else:
        raise ValueError("lemma 1/2 experiments use one of the two sub-pattern datasets")
    cfg = MachineConfig(m=m, s=s, N=N, fixed_gates=gates)
    # The target form is absorbing, so a run can stop once every clause holds it.
    spec = ExperimentSpec(cfg, dataset, runs=runs, steps=steps, stride=0, stop=StopRule.CUSTOM,
                          custom_stop=lambda c: c[:, col] == m)
    report = run_experiment(spec, seed)
    return float(report.counts[:, col].sum() / (runs * m))


@dataclass(frozen=True)
class ThresholdTimes:
    first_hit: list[int | None]
    budget: int

    @property
    def censored(self) -> int:
        return sum(t is None for t in self.first_hit)

    @property
    def fraction_hit(self) -> float:
        return 1.0 - self.censored / len(self.first_hit)

    def hits(self) -> list[int]:
        return sorted(t for t in self.first_hit if t is not None)


def time_to_threshold(spec: ExperimentSpec, seed: int) -> ThresholdTimes:
    """First step at which ``T`` clauses share one sub-pattern, per run.

    Runs that never get there within the budget are censored (``None``).
    """
    if spec.config.T > spec.config.m:
        raise ValueError(f"T={spec.config.T} clauses can never agree among m={spec.config.m}")
    custom = ExperimentSpec(
        spec.config, spec.dataset, runs=spec.runs, steps=spec.steps, stride=0,
        stop=StopRule.CUSTOM,
        custom_stop=lambda c: (c[:, 0] >= spec.config.T) | (c[:, 1] >= spec.config.T),
        chunk=spec.chunk,
    )
    report = run_experiment(custom, seed)
    return ThresholdTimes(report.first_hit, spec.steps)


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class BlockingProbe:
    gate: float
    f_sum: int
    unchanged: bool | None


def blocking_probe(
    machine: Machine,
    sample: tuple[Sequence[int], int],
    strict: bool = True,
    trials: int = 200,
    seed: int = 0,
) -> BlockingProbe:
    """Type I gate probability for a positive sample.

    With ``strict`` the machine must already reach the target on ``sample``
    (train-mode vote sum ``>= T``).  A closed gate is confirmed by stepping the
    machine ``trials`` times on the sample and checking nothing moves.
    """
    x, y = sample
    if y != 1:
        raise PreconditionError("blocking is a property of positive samples")
    cfg = machine.config
    f = int(clause_outputs(machine.states, np.asarray(x), cfg.N).sum())
    if strict and f < cfg.T:
        raise PreconditionError(f"vote sum {f} has not reached T={cfg.T}")
    gate = float(gate_probability(f, 1, cfg))
    unchanged = None
    if gate == 0:
        rng = np.random.default_rng(seed)
        unchanged = all(train_step(machine, sample, rng) == machine for _ in range(trials))
    return BlockingProbe(gate, f, unchanged)
