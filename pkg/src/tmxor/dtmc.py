"""Exact Markov-chain analysis of machines built from two-state automata.

A system state lists every automaton's action, 1 for Include and 0 for
Exclude, clause after clause.  States are numbered from 1 with the first
automaton as the most significant bit, so for two clauses
``(0,1,1,0,1,0,0,1)`` is state 106 and ``(1,0,0,1,0,1,1,0)`` is state 151.

Matrices are stored row-stochastic, ``P[from, to]``.  Sums and products are
evaluated in a balanced pairwise order so that swapping clauses, or swapping
``x1`` with ``x2``, permutes the matrix exactly rather than up to rounding.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from tmxor.core import (
    SUBPATTERN_A,
    XOR_FULL,
    Action,
    Dataset,
    FeedbackType,
    MachineConfig,
    clause_outputs,
    feedback_probs,
    gate_probability,
    literals,
)

ROW_SUM_TOL = 1e-12
ABSORBING_TOL = 1e-9


class NonConvergence(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"no limiting matrix after {iterations} squarings (residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


# --------------------------------------------------------------------------
# State indexing


def encode_state(bits: Sequence[int]) -> int:
    idx = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"state bits must be 0/1, got {bits!r}")
        idx = (idx << 1) | int(b)
    return idx + 1


def decode_state(index: int, width: int = 8) -> tuple[int, ...]:
    if not 1 <= index <= 2**width:
        raise ValueError(f"state index {index} outside [1, {2 ** width}]")
    v = index - 1
    return tuple((v >> (width - 1 - i)) & 1 for i in range(width))


def action_string(bits: Sequence[int]) -> str:
    return "".join("I" if b else "E" for b in bits)


# --------------------------------------------------------------------------
# One-step probabilities


def per_ta_stay_flip(ftype: FeedbackType, clause_out: int, literal_val: int, action: Action, s: float) -> tuple[float, float]:
    """Stay/flip probabilities of a two-state automaton that receives feedback."""
    p_r, p_i, p_p = feedback_probs(ftype, clause_out, literal_val, action, s)
    return p_r + p_i, p_p


def _pairwise(values: list, op):
    if len(values) == 1:
        return values[0]
    mid = len(values) // 2
    return op(_pairwise(values[:mid], op), _pairwise(values[mid:], op))


def _prod(values):
    return _pairwise(list(values), lambda a, b: a * b)


def _sum(values):
    return _pairwise(list(values), lambda a, b: a + b)


def clause_transition_prob(
    from_bits: Sequence[int],
    to_bits: Sequence[int],
    x: Sequence[int],
    ftype: FeedbackType,
    p_act: float,
    s: float,
) -> float:
    """Probability that one clause moves ``from_bits -> to_bits`` on input ``x``.

    ``p_act`` is the chance the clause is selected for feedback at all; an
    unselected clause stays put.
    """
    states = np.where(np.asarray(from_bits) == 1, 1, 2)[None, :]
    out = int(clause_outputs(states, np.asarray(x), 1)[0])
    lits = literals(np.asarray(x))
    terms = []
    for h_from, h_to, lit in zip(from_bits, to_bits, lits):
        action = Action.INCLUDE if h_from else Action.EXCLUDE
        stay, flip = per_ta_stay_flip(ftype, out, int(lit), action, s)
        terms.append(stay if h_from == h_to else flip)
    p_feed = _prod(terms)
    if tuple(from_bits) == tuple(to_bits):
        return p_act * p_feed + (1 - p_act)
    return p_act * p_feed


@lru_cache(maxsize=None)
def _clause_row(from_index: int, x: tuple[int, ...], ftype: FeedbackType, p_act: float, s: float) -> np.ndarray:
    width = 2 * len(x)
    src = decode_state(from_index, width)
    row = np.array([
        clause_transition_prob(src, decode_state(t, width), x, ftype, p_act, s)
        for t in range(1, 2**width + 1)
    ])
    row.setflags(write=False)
    return row


# --------------------------------------------------------------------------
# Matrix construction


@dataclass(frozen=True)
class TransitionMatrix:
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.entries, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"transition matrix must be square, got {p.shape}")
        if p.min() < 0 or p.max() > 1:
            raise ValueError("transition probabilities must lie in [0, 1]")
        worst = np.abs(p.sum(axis=1) - 1).max()
        if worst > ROW_SUM_TOL:
            raise ValueError(f"rows do not sum to 1 (worst deviation {worst:.3e})")
        p.setflags(write=False)
        object.__setattr__(self, "entries", p)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __getitem__(self, key: tuple[int, int]) -> float:
        """1-based lookup, ``P[from, to]``."""
        i, j = key
        return float(self.entries[i - 1, j - 1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["from"] + list(range(1, self.dim + 1)))
        for i, row in enumerate(self.entries, start=1):
            w.writerow([i] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"dim": self.dim, "entries": [float(v) for v in self.entries.ravel()]})

    @classmethod
    def from_json(cls, text: str) -> "TransitionMatrix":
        d = json.loads(text)
        return cls(np.array(d["entries"], dtype=float).reshape(d["dim"], d["dim"]))


def build_chain(cfg: MachineConfig, dataset: Dataset = XOR_FULL) -> TransitionMatrix:
    """One-step matrix of a machine with ``cfg.m`` clauses of two-state automata.

    Each clause moves independently given the sampled row; rows are mixed by
    the input distribution.
    """
    if cfg.N != 1:
        raise ValueError("exact chains are only built for two-state automata (N=1)")
    if cfg.m > 3:
        raise ValueError("exact chains beyond three clauses are too large; use simulation")
    width = cfg.width
    per_clause = 2**width
    dim = per_clause**cfg.m
    weights = cfg.weights(dataset)
    xs, ys = dataset.arrays()
    P = np.empty((dim, dim))
    for j in range(dim):
        clause_idx = [(j >> (width * (cfg.m - 1 - c))) & (per_clause - 1) for c in range(cfg.m)]
        clause_bits = np.array([decode_state(ci + 1, width) for ci in clause_idx])
        states = np.where(clause_bits == 1, 1, 2)
        terms = []
        for x, y, w in zip(xs, ys, weights):
            outs = clause_outputs(states, x, 1)
            p_act = float(gate_probability(int(outs.sum()), int(y), cfg))
            ftype = FeedbackType.TYPE_I if y == 1 else FeedbackType.TYPE_II
            rows = [_clause_row(ci + 1, tuple(int(v) for v in x), ftype, p_act, float(cfg.s)) for ci in clause_idx]
            joint = rows[0]
            for r in rows[1:]:
                joint = np.multiply.outer(joint, r).ravel()
            terms.append(w * joint)
        P[j] = _sum(terms)
    return TransitionMatrix(P)


def build_two_clause_matrix(s: float = 10.0, T: int = 1, input_dist: Sequence[float] | None = None) -> TransitionMatrix:
    cfg = MachineConfig(m=2, o=2, T=T, s=s, N=1,
                        input_dist=None if input_dist is None else tuple(input_dist))
    return build_chain(cfg, XOR_FULL)


def build_single_clause_matrix(
    dataset: Dataset = SUBPATTERN_A, u1_const: float = 0.5, u2_const: float = 0.5, s: float = 10.0
) -> TransitionMatrix:
    cfg = MachineConfig(m=1, o=2, s=s, N=1, fixed_gates=(u1_const, u2_const))
    return build_chain(cfg, dataset)


# --------------------------------------------------------------------------
# Limiting behaviour


@dataclass(frozen=True)
class Limit:
    limiting: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    last_change: float


def limiting_matrix(
    P: TransitionMatrix | np.ndarray, tol: float = 1e-12, max_iters: int = 64, residual_tol: float = 1e-9
) -> Limit:
    """Square ``P`` until no entry moves by ``tol`` or more.

    Rows are renormalised after every squaring; without that, row-sum
    rounding error doubles at each squaring.  Squaring alone can settle on a
    periodic chain (``P^2 = I`` for a 2-cycle), so the result must also be a
    fixed point, ``A P = A`` to within ``residual_tol``.
    """
    p = P.entries if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    a = p.copy()
    change = np.inf
    it = 0
    while it < max_iters:
        b = a @ a
        b /= b.sum(axis=1, keepdims=True)
        change = float(np.abs(b - a).max())
        a = b
        it += 1
        if change < tol:
            break
    else:
        raise NonConvergence(change, it)
    residual = float(np.abs(a @ p - a).max())
    if residual > residual_tol:
        raise NonConvergence(residual, it)
    return Limit(a, residual, it, change)


@dataclass(frozen=True)
class Classification:
    absorbing: tuple[int, ...]
    bullets: dict[str, bool]
    violations: dict[str, list[int]]

    @property
    def verdict(self) -> bool:
        return all(self.bullets.values())


def classify_states(P: TransitionMatrix | np.ndarray, A: np.ndarray, tol: float = ABSORBING_TOL) -> Classification:
    """Absorbing states (1-based) and the three limiting-matrix properties.

    b1: every absorbing state returns to itself with probability 1.
    b2: from every state, the absorbing states collect all the mass.
    b3: no mass is left on non-absorbing states.
    """
    p = P.entries if isinstance(P, TransitionMatrix) else np.asarray(P)
    A = np.asarray(A)
    absorbing = np.flatnonzero(np.diag(p) >= 1 - tol)
    transient = np.setdiff1d(np.arange(p.shape[0]), absorbing)
    b1_bad = absorbing[np.abs(A[absorbing, absorbing] - 1) > tol]
    b2_bad = np.flatnonzero(np.abs(A[:, absorbing].sum(axis=1) - 1) > tol)
    b3_bad = np.flatnonzero((A[:, transient] > tol).any(axis=1)) if transient.size else np.array([], int)
    violations = {
        "b1": [int(i) + 1 for i in b1_bad],
        "b2": [int(i) + 1 for i in b2_bad],
        "b3": [int(i) + 1 for i in b3_bad],
    }
    return Classification(
        absorbing=tuple(int(i) + 1 for i in absorbing),
        bullets={k: not v for k, v in violations.items()},
        violations=violations,
    )


@dataclass
class ChainReport:
    absorbing: list[int]
    bullets: dict[str, bool]
    residual: float
    iterations: int
    limiting: np.ndarray = field(repr=False)
    violations: dict[str, list[int]] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        return all(self.bullets.values())

    def to_dict(self) -> dict:
        return {
            "absorbing": list(self.absorbing),
            "bullets": dict(self.bullets),
            "residual": self.residual,
            "iterations": self.iterations,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def analyze(P: TransitionMatrix, tol: float = 1e-12, max_iters: int = 64, absorbing_tol: float = ABSORBING_TOL, config: dict | None = None) -> ChainReport:
    lim = limiting_matrix(P, tol, max_iters)
    cls = classify_states(P, lim.limiting, absorbing_tol)
    return ChainReport(
        absorbing=list(cls.absorbing),
        bullets=cls.bullets,
        residual=lim.residual,
        iterations=lim.iterations,
        limiting=lim.limiting,
        violations=cls.violations,
        config=config or {},
    )


# --------------------------------------------------------------------------
# Symmetries


def clause_swap_permutation(width: int = 4) -> np.ndarray:
    """0-based map ``a -> sigma(a)`` exchanging the two clauses."""
    per = 2**width
    idx = np.arange(per * per)
    return (idx % per) * per + idx // per


def input_swap_permutation(m: int = 2, o: int = 2) -> np.ndarray:
    """0-based map induced by exchanging ``x1`` and ``x2`` in every clause."""
    if o != 2:
        raise ValueError("input swap is defined for two inputs")
    width = 2 * o
    dim = 2 ** (width * m)
    perm = np.empty(dim, dtype=int)
    for a in range(dim):
        bits = decode_state(a + 1, width * m)
        out = []
        for c in range(m):
            h = bits[c * width:(c + 1) * width]
            out.extend((h[2], h[3], h[0], h[1]))
        perm[a] = encode_state(out) - 1
    return perm


def permuted(P: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """``Q[perm[a], perm[b]] = P[a, b]``."""
    Q = np.empty_like(P)
    Q[np.ix_(perm, perm)] = P
    return Q
