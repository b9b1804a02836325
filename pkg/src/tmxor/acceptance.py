"""Acceptance checks: one function per criterion, shared by pytest and the CLI.

Each check returns a :class:`CheckResult`; nothing here raises on failure.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from tmxor import core, dtmc, lab
from tmxor.core import SUBPATTERN_A, SUBPATTERN_B, XOR_FULL, Action, FeedbackType, MachineConfig, Mode

ACCEPTANCE_SEED = 2021

# Tolerances and budgets
THEOREM1_RESIDUAL = 1e-9
THEOREM1_SECONDS = 5.0
LEMMA_SECONDS = 1.0
ORACLE_TV = 0.01
ORACLE_SAMPLES = 100_000
ORACLE_STATES = 5
MC_RUNS = 200
MC_STEPS = 100_000
MC_FRACTION = 0.95
THEOREM6_SECONDS = 120.0
REMARK2_N = 100


@dataclass
class CheckResult:
    name: str
    group: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name:<22} {self.seconds:7.2f}s  {self.detail}"


# Tables 1-2 transcribed cell by cell: rows (Reward, Inaction, Penalty), columns
# (clause=1/lit=1, clause=1/lit=0, clause=0/lit=1, clause=0/lit=0).
_TYPE_I = {
    Action.INCLUDE: [("hi", "NA", "0", "0"), ("lo", "NA", "hi", "hi"), ("0", "NA", "lo", "lo")],
    Action.EXCLUDE: [("0", "lo", "lo", "lo"), ("lo", "hi", "hi", "hi"), ("hi", "0", "0", "0")],
}
_TYPE_II = {
    Action.INCLUDE: [("0", "NA", "0", "0"), ("1", "NA", "1", "1"), ("0", "NA", "0", "0")],
    Action.EXCLUDE: [("0", "0", "0", "0"), ("1", "0", "1", "1"), ("0", "1", "0", "0")],
}
_COLUMNS = [(1, 1), (1, 0), (0, 1), (0, 0)]


def _cell(sym: str, s: float) -> float:
    return {"hi": (s - 1) / s, "lo": 1 / s, "0": 0.0, "1": 1.0}[sym]


def check_feedback_tables() -> CheckResult:
    bad = []
    for s in (1, 2, 10, 100):
        for ftype, table in ((FeedbackType.TYPE_I, _TYPE_I), (FeedbackType.TYPE_II, _TYPE_II)):
            for action, rows in table.items():
                for col, (clause_out, lit) in enumerate(_COLUMNS):
                    syms = [rows[r][col] for r in range(3)]
                    where = f"{ftype.name}/{action.name}/C={clause_out}/lit={lit}/s={s}"
                    if syms[0] == "NA":
                        try:
                            core.feedback_probs(ftype, clause_out, lit, action, s)
                            bad.append(where + " NA accepted")
                        except core.NotApplicableCell:
                            pass
                        continue
                    want = tuple(_cell(v, s) for v in syms)
                    got = core.feedback_probs(ftype, clause_out, lit, action, s)
                    if tuple(got) != want:
                        bad.append(f"{where} {got} != {want}")
                    if sum(got) != 1.0:
                        bad.append(f"{where} sums to {sum(got)!r}")
    return CheckResult("feedback_tables", "feedback", not bad,
                       "all reachable cells exact, NA cells raise" if not bad else "; ".join(bad[:4]))


def check_gate_algebra() -> CheckResult:
    bad = []
    for T in (1, 2, 5):
        for f in range(-2 * T, 2 * T + 1):
            if core.u1(f, T) + core.u2(f, T) != 1.0:
                bad.append(f"u1+u2 != 1 at f={f}, T={T}")
        if core.u1(T, T) != 0.0 or core.u2(T, T) != 1.0 or core.u1(0, T) != 0.5:
            bad.append(f"anchor values wrong for T={T}")
    return CheckResult("gate_algebra", "gates", not bad, "u1+u2=1, u1(T)=0, u2(T)=1, u1(0)=1/2" if not bad else "; ".join(bad[:4]))


def check_theorem1() -> CheckResult:
    t0 = time.perf_counter()
    P = dtmc.build_two_clause_matrix(s=10, T=1)
    report = dtmc.analyze(P)
    secs = time.perf_counter() - t0
    ok = (report.verdict and report.absorbing == [106, 151]
          and report.residual < THEOREM1_RESIDUAL and secs < THEOREM1_SECONDS)
    detail = (f"absorbing={report.absorbing} bullets={report.bullets} "
              f"residual={report.residual:.2e} squarings={report.iterations}")
    return CheckResult("theorem1_chain", "dtmc", ok, detail, secs, report.to_dict())


def check_single_clause_lemmas() -> CheckResult:
    t0 = time.perf_counter()
    got = {}
    for ds in (SUBPATTERN_A, SUBPATTERN_B, XOR_FULL):
        rep = dtmc.analyze(dtmc.build_single_clause_matrix(ds, 0.5, 0.5, 10))
        got[ds.name] = [dtmc.action_string(dtmc.decode_state(i, 4)) for i in rep.absorbing]
    secs = time.perf_counter() - t0
    ok = (got == {"subpattern-a": ["EIIE"], "subpattern-b": ["IEEI"], "xor-full": []}
          and secs < LEMMA_SECONDS)
    return CheckResult("single_clause_lemmas", "lemmas", ok, f"absorbing forms {got}", secs)


def one_step_frequencies(state_index: int, samples: int, rng: np.random.Generator, cfg: MachineConfig) -> np.ndarray:
    """Empirical next-state distribution of the simulator from one chain state."""
    bits = np.array(dtmc.decode_state(state_index, cfg.m * cfg.width)).reshape(cfg.m, cfg.width)
    states = np.broadcast_to(np.where(bits == 1, 1, 2), (samples, cfg.m, cfg.width))
    xs, ys = XOR_FULL.arrays()
    rows = core.pick_rows(rng.random(samples), cfg.weights(XOR_FULL))
    gate_u = rng.random((samples, cfg.m))
    ta_u = rng.random((samples, cfg.m, cfg.width))
    nxt = core.advance(states, xs[rows], ys[rows], gate_u, ta_u, cfg)
    flat = (nxt == 1).reshape(samples, -1).astype(np.int64)
    weights = 1 << np.arange(flat.shape[1] - 1, -1, -1)
    idx = flat @ weights
    return np.bincount(idx, minlength=2 ** flat.shape[1]) / samples


def check_oracle_equivalence(seed: int = ACCEPTANCE_SEED) -> CheckResult:
    t0 = time.perf_counter()
    cfg = MachineConfig(m=2, T=1, s=10, N=1)
    P = dtmc.build_chain(cfg, XOR_FULL)
    rng = np.random.default_rng(seed)
    picks = rng.choice(np.arange(1, P.dim + 1), size=ORACLE_STATES, replace=False)
    tvs = {}
    for j in picks:
        freq = one_step_frequencies(int(j), ORACLE_SAMPLES, rng, cfg)
        tvs[int(j)] = 0.5 * float(np.abs(freq - P.entries[j - 1]).sum())
    secs = time.perf_counter() - t0
    ok = max(tvs.values()) < ORACLE_TV
    return CheckResult("oracle_equivalence", "oracle", ok,
                       "TV " + ", ".join(f"{k}:{v:.4f}" for k, v in tvs.items()), secs, {"tv": tvs})


def theorem6_spec(runs: int = MC_RUNS, steps: int = MC_STEPS) -> lab.ExperimentSpec:
    return lab.ExperimentSpec(
        MachineConfig(m=4, T=2, s=10, N=1), XOR_FULL, runs=runs, steps=steps,
        stride=0, stop=lab.StopRule.BOTH_SUBPATTERNS_AT_T, dwell=1000,
    )


def check_theorem6(seed: int = ACCEPTANCE_SEED) -> CheckResult:
    t0 = time.perf_counter()
    rep = lab.run_experiment(theorem6_spec(), seed)
    secs = time.perf_counter() - t0
    frac = rep.fraction_sustained
    ok = frac >= MC_FRACTION and secs < THEOREM6_SECONDS
    hits = sorted(t for t in rep.sustained_at if t is not None)
    med = hits[len(hits) // 2] if hits else None
    return CheckResult("theorem6_surrogate", "theorem6", ok,
                       f"sustained (n_A>=2, n_B>=2) in {frac:.3f} of runs, median onset {med}", secs)


def remark2_spec(runs: int = MC_RUNS, steps: int = MC_STEPS, N: int = REMARK2_N) -> lab.ExperimentSpec:
    return lab.ExperimentSpec(MachineConfig(m=5, T=3, s=10, N=N, Th=1), XOR_FULL,
                              runs=runs, steps=steps, stride=0)


def _silent(machine: core.Machine, j: int) -> bool:
    clause = machine.clause(j)
    return all(core.clause_eval(clause, x, Mode.TEST) == 0 for x, _ in XOR_FULL.rows)


def check_remark2(seed: int = ACCEPTANCE_SEED) -> CheckResult:
    t0 = time.perf_counter()
    spec = remark2_spec()
    rep = lab.run_experiment(spec, seed)
    cfg = spec.config
    k = cfg.m - cfg.T
    frac = rep.fraction_both(k)
    covered = (rep.counts[:, 0] >= k) & (rep.counts[:, 1] >= k)
    machines = lab.final_machines(rep, cfg)
    silent_runs = wrong_silent = correct_all = 0
    for ok_cov, mach in zip(covered, machines):
        correct = all(core.classify(mach, x) == y for x, y in XOR_FULL.rows)
        correct_all += correct
        if not ok_cov:
            continue
        leftovers = [j for j in range(cfg.m)
                     if not (np.array_equal(mach.actions[j], lab.FORM_A) or np.array_equal(mach.actions[j], lab.FORM_B))]
        if all(_silent(mach, j) for j in leftovers):
            silent_runs += 1
            wrong_silent += not correct
    secs = time.perf_counter() - t0
    ok = frac >= MC_FRACTION and wrong_silent == 0
    detail = (f"covered (n_A>=2, n_B>=2) in {frac:.3f}; runs whose leftover clauses are silent: "
              f"{silent_runs}, misclassified {wrong_silent}; Th=1 correct overall {correct_all}/{len(machines)}")
    return CheckResult("remark2_coverage", "remark2", ok, detail, secs)


def check_determinism(seed: int = ACCEPTANCE_SEED) -> CheckResult:
    t0 = time.perf_counter()
    spec = lab.ExperimentSpec(MachineConfig(m=4, T=2, s=10, N=1), runs=16, steps=5000,
                              stride=500, keep_trajectories=True)
    a = lab.run_experiment(spec, seed)
    b = lab.run_experiment(spec, seed)
    c1 = dtmc.analyze(dtmc.build_two_clause_matrix()).to_json()
    dtmc._clause_row.cache_clear()
    c2 = dtmc.analyze(dtmc.build_two_clause_matrix()).to_json()
    ok = (a.to_json() == b.to_json() and a.trajectories_csv() == b.trajectories_csv() and c1 == c2)
    return CheckResult("determinism", "determinism", ok,
                       "coverage, trajectory and chain reports byte-identical on re-run" if ok else "reports differ",
                       time.perf_counter() - t0)


def check_symmetry() -> CheckResult:
    P = dtmc.build_two_clause_matrix().entries
    swap_c = np.array_equal(dtmc.permuted(P, dtmc.clause_swap_permutation()), P)
    swap_x = np.array_equal(dtmc.permuted(P, dtmc.input_swap_permutation()), P)
    return CheckResult("symmetry", "symmetry", swap_c and swap_x,
                       f"clause swap exact={swap_c}, input swap exact={swap_x}")


CHECKS: list[tuple[str, Callable[[], CheckResult]]] = [
    ("dtmc", check_theorem1),
    ("lemmas", check_single_clause_lemmas),
    ("oracle", check_oracle_equivalence),
    ("feedback", check_feedback_tables),
    ("gates", check_gate_algebra),
    ("theorem6", check_theorem6),
    ("remark2", check_remark2),
    ("determinism", check_determinism),
    ("symmetry", check_symmetry),
]
GROUPS = [g for g, _ in CHECKS]


def run_checks(only: list[str] | None = None) -> list[CheckResult]:
    results = []
    for group, fn in CHECKS:
        if only and group not in only:
            continue
        t0 = time.perf_counter()
        res = fn()
        if not res.seconds:
            res.seconds = time.perf_counter() - t0
        results.append(res)
    return results
