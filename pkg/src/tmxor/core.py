"""Tsetlin Machine building blocks for positive-polarity clauses.

Automaton states are integers in ``[1, 2N]``: ``1..N`` selects Include and
``N+1..2N`` selects Exclude.  A machine stores its automata as an ``(m, 2o)``
integer array in clause-major order, with column ``2k`` holding the automaton
for ``x_k`` and column ``2k+1`` the one for ``not x_k`` (0-based).

All stochastic decisions are driven by pre-drawn uniforms so that a single
machine and a batch of independent replicas run through the same kernel,
:func:`advance`.  Each training step consumes ``1 + m + 2*o*m`` uniforms laid
out as ``[sample, gate_1..gate_m, ta_(1,1)..ta_(m,2o)]``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class Action(enum.IntEnum):
    INCLUDE = 0
    EXCLUDE = 1


class Feedback(enum.IntEnum):
    REWARD = 0
    INACTION = 1
    PENALTY = 2


class FeedbackType(enum.IntEnum):
    TYPE_I = 0
    TYPE_II = 1


class Mode(enum.Enum):
    TRAIN = "train"
    TEST = "test"


class NotApplicableCell(RuntimeError):
    """A feedback-table cell that cannot arise was queried."""


class InputShapeError(ValueError):
    pass


# --------------------------------------------------------------------------
# Tsetlin automaton


@dataclass(frozen=True)
class TaState:
    state: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"half-depth must be >= 1, got {self.n}")
        if not 1 <= self.state <= 2 * self.n:
            raise ValueError(f"state {self.state} outside [1, {2 * self.n}]")

    @property
    def action(self) -> Action:
        return Action.INCLUDE if self.state <= self.n else Action.EXCLUDE


def ta_update(ta: TaState, fb: Feedback) -> TaState:
    """Move one automaton according to a single feedback event."""
    if fb == Feedback.INACTION:
        return ta
    include = ta.action == Action.INCLUDE
    if fb == Feedback.PENALTY:
        step = 1 if include else -1
    else:
        step = -1 if include else 1
    return TaState(min(max(ta.state + step, 1), 2 * ta.n), ta.n)


# --------------------------------------------------------------------------
# Datasets


@dataclass(frozen=True)
class Dataset:
    name: str
    rows: tuple[tuple[tuple[int, ...], int], ...]

    @property
    def width(self) -> int:
        return len(self.rows[0][0])

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        xs = np.array([r[0] for r in self.rows], dtype=np.int8)
        ys = np.array([r[1] for r in self.rows], dtype=np.int8)
        return xs, ys


XOR_FULL = Dataset("xor-full", (((0, 0), 0), ((1, 1), 0), ((0, 1), 1), ((1, 0), 1)))
SUBPATTERN_A = Dataset("subpattern-a", (((0, 0), 0), ((1, 1), 0), ((0, 1), 1)))
SUBPATTERN_B = Dataset("subpattern-b", (((0, 0), 0), ((1, 1), 0), ((1, 0), 1)))

DATASETS = {d.name: d for d in (XOR_FULL, SUBPATTERN_A, SUBPATTERN_B)}


def get_dataset(name: str) -> Dataset:
    try:
        return DATASETS[name]
    except KeyError:
        raise ValueError(f"unknown dataset {name!r}; choose from {sorted(DATASETS)}") from None


# --------------------------------------------------------------------------
# Configuration and machine


@dataclass(frozen=True)
class MachineConfig:
    """Hyperparameters of a single-class, positive-polarity machine.

    ``fixed_gates=(u1, u2)`` replaces the T-driven gate probabilities with
    constants, which switches off the vote-sum target entirely.
    ``input_dist`` weights the rows of whichever dataset the machine is
    trained on; ``None`` means uniform.
    """

    m: int = 2
    o: int = 2
    T: int = 1
    s: float = 10.0
    N: int = 1
    Th: int = 1
    input_dist: tuple[float, ...] | None = None
    fixed_gates: tuple[float, float] | None = None

    def __post_init__(self):
        if self.m < 1 or self.o < 1 or self.N < 1 or self.T < 1:
            raise ValueError("m, o, N and T must all be >= 1")
        if not self.s >= 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if self.input_dist is not None:
            w = np.asarray(self.input_dist, dtype=float)
            if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("input_dist weights must be positive and sum to 1")
        if self.fixed_gates is not None:
            u1c, u2c = self.fixed_gates
            if not (0 < u1c <= 1 and 0 < u2c <= 1):
                raise ValueError("fixed gate probabilities must lie in (0, 1]")

    @property
    def width(self) -> int:
        return 2 * self.o

    @property
    def uniforms_per_step(self) -> int:
        return 1 + self.m + self.m * self.width

    def weights(self, dataset: Dataset) -> np.ndarray:
        if len(dataset.rows[0][0]) != self.o:
            raise InputShapeError(f"dataset width {dataset.width} != o={self.o}")
        if self.input_dist is None:
            return np.full(len(dataset.rows), 1.0 / len(dataset.rows))
        if len(self.input_dist) != len(dataset.rows):
            raise ValueError(
                f"input_dist has {len(self.input_dist)} weights for {len(dataset.rows)} rows"
            )
        return np.asarray(self.input_dist, dtype=float)

    def to_dict(self) -> dict:
        return {
            "m": self.m, "o": self.o, "T": self.T, "s": self.s, "N": self.N,
            "Th": self.Th,
            "input_dist": None if self.input_dist is None else list(self.input_dist),
            "fixed_gates": None if self.fixed_gates is None else list(self.fixed_gates),
        }


@dataclass(frozen=True)
class Clause:
    """The ``2o`` automaton states of one clause."""

    tas: tuple[int, ...]
    n: int = 1

    def __post_init__(self):
        if len(self.tas) % 2 or not self.tas:
            raise ValueError("a clause holds an even, non-zero number of automata")
        for st in self.tas:
            TaState(st, self.n)

    @classmethod
    def from_actions(cls, actions: str, n: int = 1) -> "Clause":
        """Build from a string such as ``"EIIE"`` using the shallowest states."""
        return cls(tuple(n if a == "I" else n + 1 for a in actions.upper()), n)

    @property
    def include(self) -> tuple[bool, ...]:
        return tuple(st <= self.n for st in self.tas)

    @property
    def included_positive(self) -> frozenset[int]:
        return frozenset(k for k in range(len(self.tas) // 2) if self.tas[2 * k] <= self.n)

    @property
    def included_negated(self) -> frozenset[int]:
        return frozenset(k for k in range(len(self.tas) // 2) if self.tas[2 * k + 1] <= self.n)


def literals(x: np.ndarray) -> np.ndarray:
    """Interleave inputs with their negations: ``x1, ~x1, x2, ~x2, ...``."""
    x = np.asarray(x, dtype=np.int8)
    return np.stack([x, 1 - x], axis=-1).reshape(*x.shape[:-1], 2 * x.shape[-1])


def clause_outputs(states: np.ndarray, x: np.ndarray, n: int, mode: Mode = Mode.TRAIN) -> np.ndarray:
    """Evaluate every clause in ``states[..., m, 2o]`` on inputs ``x[..., o]``."""
    include = states <= n
    lit = literals(x)[..., None, :]
    out = ~np.any(include & (lit == 0), axis=-1)
    if mode == Mode.TEST:
        out &= include.any(axis=-1)
    return out


def clause_eval(clause: Clause, x: Sequence[int], mode: Mode) -> int:
    if len(x) * 2 != len(clause.tas):
        raise InputShapeError(f"input width {len(x)} does not match clause width {len(clause.tas) // 2}")
    states = np.asarray(clause.tas)[None, :]
    return int(clause_outputs(states, np.asarray(x), clause.n, mode)[0])


# --------------------------------------------------------------------------
# Feedback


def u1(f_sum, T: int):
    """Probability of gating Type I feedback onto a clause."""
    return (T - np.clip(f_sum, -T, T)) / (2 * T)


def u2(f_sum, T: int):
    """Probability of gating Type II feedback onto a clause."""
    return (T + np.clip(f_sum, -T, T)) / (2 * T)


def feedback_probs(
    ftype: FeedbackType, clause_out: int, literal_val: int, action: Action, s: float
) -> tuple[float, float, float]:
    """(Reward, Inaction, Penalty) probabilities for one automaton."""
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    lo, hi = 1.0 / s, (s - 1.0) / s
    include = action == Action.INCLUDE
    if include and clause_out == 1 and literal_val == 0:
        raise NotApplicableCell("an included false literal cannot leave its clause at 1")
    if ftype == FeedbackType.TYPE_I:
        if clause_out == 1 and literal_val == 1:
            return (hi, lo, 0.0) if include else (0.0, lo, hi)
        if clause_out == 1:
            return (lo, hi, 0.0)
        return (0.0, hi, lo) if include else (lo, hi, 0.0)
    # Type II only ever pushes an excluded false literal into a firing clause.
    if not include and clause_out == 1 and literal_val == 0:
        return (0.0, 0.0, 1.0)
    return (0.0, 1.0, 0.0)


def sample_feedback(probs: Sequence[float], u) -> Feedback:
    """Map a uniform (or a Generator) onto Reward | Inaction | Penalty.

    Reward owns ``[0, pR)`` and Penalty owns ``[1 - pP, 1)``, so zero-mass
    outcomes are never drawn even when ``pR + pI`` rounds below one.
    """
    if isinstance(u, np.random.Generator):
        u = u.random()
    p_r, _, p_p = probs
    if u < p_r:
        return Feedback.REWARD
    if u >= 1.0 - p_p:
        return Feedback.PENALTY
    return Feedback.INACTION


def feedback_tables(s: float) -> tuple[np.ndarray, np.ndarray]:
    """Reward and penalty probabilities indexed ``[ftype, clause, literal, action]``.

    NA cells hold NaN; they compare false and therefore act as inaction.
    """
    reward = np.full((2, 2, 2, 2), np.nan)
    penalty = np.full((2, 2, 2, 2), np.nan)
    for ft in FeedbackType:
        for c in (0, 1):
            for lit in (0, 1):
                for act in Action:
                    try:
                        p_r, _, p_p = feedback_probs(ft, c, lit, act, s)
                    except NotApplicableCell:
                        continue
                    reward[ft, c, lit, act] = p_r
                    penalty[ft, c, lit, act] = p_p
    return reward, penalty


_TABLE_CACHE: dict[float, tuple[np.ndarray, np.ndarray]] = {}


def _tables(s: float) -> tuple[np.ndarray, np.ndarray]:
    if s not in _TABLE_CACHE:
        _TABLE_CACHE[s] = feedback_tables(s)
    return _TABLE_CACHE[s]


def gate_probability(f_sum, y, cfg: MachineConfig):
    """Per-sample probability that a clause receives feedback at all."""
    y = np.asarray(y)
    if cfg.fixed_gates is not None:
        return np.where(y == 1, cfg.fixed_gates[0], cfg.fixed_gates[1])
    return np.where(y == 1, u1(f_sum, cfg.T), u2(f_sum, cfg.T))


class BlockingViolation(AssertionError):
    pass


def advance(
    states: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    gate_u: np.ndarray,
    ta_u: np.ndarray,
    cfg: MachineConfig,
    active: np.ndarray | None = None,
    check_blocking: bool = False,
) -> np.ndarray:
    """One training step for ``states[..., m, 2o]`` given pre-drawn uniforms.

    ``x[..., o]``, ``y[...]``, ``gate_u[..., m]``, ``ta_u[..., m, 2o]``.
    ``active[...]`` (optional) freezes replicas whose flag is false.
    Returns a new array; ``states`` is not modified.
    """
    n = cfg.N
    include = states <= n
    lit = literals(x)[..., None, :]
    out = ~np.any(include & (lit == 0), axis=-1)
    f_sum = out.sum(axis=-1)
    p_gate = gate_probability(f_sum, y, cfg)
    if check_blocking and cfg.fixed_gates is None:
        saturated = (np.asarray(y) == 1) & (f_sum >= cfg.T)
        if np.any(np.asarray(p_gate)[saturated] != 0):
            raise BlockingViolation("Type I gate open although the vote sum reached T")
    gated = gate_u < np.asarray(p_gate)[..., None]
    if active is not None:
        gated &= np.asarray(active)[..., None]

    reward_t, penalty_t = _tables(cfg.s)
    ftype = (1 - np.asarray(y, dtype=np.int8))[..., None, None]
    idx = (ftype, out[..., None].astype(np.int8), np.broadcast_to(lit, states.shape), (~include).astype(np.int8))
    reward = ta_u < reward_t[idx]
    penalty = ta_u >= 1.0 - penalty_t[idx]
    toward_include = np.where(include, reward, penalty)
    toward_exclude = np.where(include, penalty, reward)
    delta = (toward_exclude.astype(np.int64) - toward_include) * gated[..., None]
    return np.clip(states + delta, 1, 2 * n)


@dataclass(frozen=True)
class Machine:
    config: MachineConfig
    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        st = np.asarray(self.states, dtype=np.int64)
        if st.shape != (self.config.m, self.config.width):
            raise InputShapeError(f"states shape {st.shape} != {(self.config.m, self.config.width)}")
        if st.min() < 1 or st.max() > 2 * self.config.N:
            raise ValueError("automaton state outside [1, 2N]")
        st.setflags(write=False)
        object.__setattr__(self, "states", st)

    @classmethod
    def from_clauses(cls, config: MachineConfig, clauses: Sequence[str | Clause]) -> "Machine":
        rows = []
        for c in clauses:
            c = Clause.from_actions(c, config.N) if isinstance(c, str) else c
            rows.append(c.tas)
        return cls(config, np.array(rows))

    def clause(self, j: int) -> Clause:
        return Clause(tuple(int(v) for v in self.states[j]), self.config.N)

    @property
    def actions(self) -> np.ndarray:
        """Boolean include mask, shape ``(m, 2o)``."""
        return self.states <= self.config.N

    def __eq__(self, other):
        if not isinstance(other, Machine):
            return NotImplemented
        return self.config == other.config and np.array_equal(self.states, other.states)

    def __hash__(self):
        return hash((self.config, self.states.tobytes()))

    def to_json(self) -> str:
        c = self.config
        return json.dumps({
            "m": c.m, "o": c.o, "T": c.T, "s": c.s, "N": c.N, "Th": c.Th,
            "ta_states": [int(v) for v in self.states.ravel()],
        })

    @classmethod
    def from_json(cls, text: str) -> "Machine":
        d = json.loads(text)
        cfg = MachineConfig(m=d["m"], o=d["o"], T=d["T"], s=d["s"], N=d["N"], Th=d["Th"])
        return cls(cfg, np.array(d["ta_states"]).reshape(cfg.m, cfg.width))


def vote_sum(machine: Machine, x: Sequence[int], mode: Mode) -> int:
    x = np.asarray(x)
    if x.shape != (machine.config.o,):
        raise InputShapeError(f"expected input of width {machine.config.o}, got shape {x.shape}")
    return int(clause_outputs(machine.states, x, machine.config.N, mode).sum())


def classify(machine: Machine, x: Sequence[int]) -> int:
    return int(vote_sum(machine, x, Mode.TEST) >= machine.config.Th)


# --------------------------------------------------------------------------
# Training


def initial_states(cfg: MachineConfig, rng: np.random.Generator, batch: tuple[int, ...] = ()) -> np.ndarray:
    """Random Exclude-side states for every automaton."""
    return rng.integers(cfg.N + 1, 2 * cfg.N + 1, size=(*batch, cfg.m, cfg.width), dtype=np.int64)


def initialize(cfg: MachineConfig, rng: np.random.Generator) -> Machine:
    return Machine(cfg, initial_states(cfg, rng))


def pick_rows(u: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Inverse-CDF choice of dataset rows from uniforms."""
    cdf = np.cumsum(weights)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(weights) - 1)


def train_step(
    machine: Machine,
    sample: tuple[Sequence[int], int],
    rng: np.random.Generator,
    check_blocking: bool = False,
) -> Machine:
    cfg = machine.config
    u = rng.random(cfg.m + cfg.m * cfg.width)
    return _step_with(machine, sample, u, check_blocking)


def _step_with(machine, sample, u, check_blocking=False) -> Machine:
    cfg = machine.config
    x, y = sample
    x = np.asarray(x, dtype=np.int8)
    if x.shape != (cfg.o,):
        raise InputShapeError(f"expected input of width {cfg.o}, got shape {x.shape}")
    gate_u = u[: cfg.m]
    ta_u = u[cfg.m:].reshape(cfg.m, cfg.width)
    new = advance(machine.states, x, np.int8(y), gate_u, ta_u, cfg, check_blocking=check_blocking)
    return Machine(cfg, new)


@dataclass
class Trace:
    snapshots: list[tuple[int, Machine]]
    steps: int

    @property
    def final(self) -> Machine:
        return self.snapshots[-1][1]


def train(
    config: MachineConfig,
    dataset: Dataset,
    steps: int,
    rng: np.random.Generator,
    stride: int | None = None,
    stop: Callable[[Machine], bool] | None = None,
    machine: Machine | None = None,
    check_blocking: bool = False,
) -> Trace:
    """Initialize (unless ``machine`` is given) and train for ``steps`` samples.

    Snapshots are taken at step 0, every ``stride`` steps, and at the end.
    ``stop`` is evaluated after every step and ends training early.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if machine is None:
        machine = initialize(config, rng)
    weights = config.weights(dataset)
    xs, ys = dataset.arrays()
    snaps = [(0, machine)]
    t = 0
    while t < steps:
        u = rng.random(config.uniforms_per_step)
        r = pick_rows(u[0], weights)
        machine = _step_with(machine, (xs[r], ys[r]), u[1:], check_blocking)
        t += 1
        if stride and t % stride == 0:
            snaps.append((t, machine))
        if stop is not None and stop(machine):
            break
    if snaps[-1][0] != t:
        snaps.append((t, machine))
    return Trace(snaps, t)
