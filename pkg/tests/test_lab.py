import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmxor import dtmc, lab
from tmxor.core import SUBPATTERN_A, SUBPATTERN_B, XOR_FULL, Machine, MachineConfig, train, u1
from tmxor.lab import ExperimentSpec, StopRule, blocking_probe, coverage_counts, run_experiment, time_to_threshold
from tmxor.seeding import run_rng


@settings(max_examples=50)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**31))
def test_coverage_partitions_m(m, N, seed):
    rng = np.random.default_rng(seed)
    states = rng.integers(1, 2 * N + 1, size=(7, m, 4))
    counts = coverage_counts(states, N)
    assert (counts.sum(axis=-1) == m).all()
    assert (counts >= 0).all()


def test_coverage_uses_include_sets_not_depth():
    states = np.array([[5, 3, 1, 6], [2, 4, 4, 1], [4, 4, 6, 5], [1, 1, 4, 4]])
    assert coverage_counts(states, 3).tolist() == [1, 1, 1, 1]


def test_zero_steps_all_empty():
    spec = ExperimentSpec(MachineConfig(m=3, T=2, N=4), runs=5, steps=0)
    rep = run_experiment(spec, 1)
    assert rep.counts[:, 2].tolist() == [3] * 5
    assert rep.censored == 5


def test_batch_matches_single_runs():
    cfg = MachineConfig(m=3, T=2, s=4.0, N=3)
    spec = ExperimentSpec(cfg, runs=5, steps=777, chunk=100)
    rep = run_experiment(spec, 31)
    for i in range(5):
        alone = train(cfg, XOR_FULL, 777, run_rng(31, i)).final
        assert np.array_equal(alone.states.ravel(), rep.final_states[i])


def test_run_streams_do_not_depend_on_run_count():
    cfg = MachineConfig(m=2, T=1, N=2)
    small = run_experiment(ExperimentSpec(cfg, runs=3, steps=500), 9)
    large = run_experiment(ExperimentSpec(cfg, runs=8, steps=500), 9)
    assert small.final_states == large.final_states[:3]


def test_report_deterministic():
    spec = ExperimentSpec(MachineConfig(m=4, T=2, N=1), runs=6, steps=2000, stride=400, keep_trajectories=True)
    a, b = run_experiment(spec, 4), run_experiment(spec, 4)
    assert a.to_json() == b.to_json()
    assert a.trajectories_csv() == b.trajectories_csv()
    assert run_experiment(spec, 5).to_json() != a.to_json()


def test_trajectory_csv_layout():
    spec = ExperimentSpec(MachineConfig(m=3, T=1, N=1), runs=2, steps=100, stride=50, keep_trajectories=True)
    lines = run_experiment(spec, 0).trajectories_csv().splitlines()
    assert lines[0] == "step,run,n_A,n_B,n_empty,n_other"
    steps = sorted({int(l.split(",")[0]) for l in lines[1:]})
    assert steps == [0, 50, 100]
    assert all(sum(map(int, l.split(",")[2:])) == 3 for l in lines[1:])


def test_two_clause_absorption_matches_chain():
    cfg = MachineConfig(m=2, T=1, s=10, N=1)
    spec = ExperimentSpec(cfg, runs=60, steps=20_000, stride=0, stop=StopRule.BOTH_SUBPATTERNS_AT_T, dwell=500)
    rep = run_experiment(spec, 17)
    chain = dtmc.analyze(dtmc.build_two_clause_matrix())
    ends = {dtmc.encode_state((np.array(s) == 1).astype(int)) for s in rep.final_states}
    assert rep.fraction_sustained == 1.0
    assert ends <= set(chain.absorbing)


def test_blocking_invariant_holds_during_training():
    spec = ExperimentSpec(MachineConfig(m=5, T=2, N=3), runs=10, steps=3000, check_blocking=True)
    run_experiment(spec, 3)


def test_custom_stop():
    spec = ExperimentSpec(MachineConfig(m=3, T=1, N=1), runs=4, steps=5000, stop=StopRule.CUSTOM,
                          custom_stop=lambda c: c[:, 3] >= 1)
    rep = run_experiment(spec, 2)
    for counts, t in zip(rep.final_counts, rep.stopped_at):
        assert counts[3] >= 1 or t == 5000


# --- named experiments ----------------------------------------------------------


@pytest.mark.parametrize("dataset", [SUBPATTERN_A, SUBPATTERN_B])
def test_lemma12_converges(dataset):
    assert lab.lemma12_experiment(dataset, m=1, s=10, steps=100_000, runs=200, seed=0) >= 0.99


def test_lemma12_multi_clause_deeper_automata():
    assert lab.lemma12_experiment(SUBPATTERN_B, m=3, s=10, steps=20_000, runs=40, seed=1, N=5) >= 0.99


def test_lemma12_zero_steps():
    assert lab.lemma12_experiment(SUBPATTERN_A, steps=0, runs=10) == 0.0


def test_lemma12_rejects_full_xor():
    with pytest.raises(ValueError):
        lab.lemma12_experiment(XOR_FULL)


def test_time_to_threshold_two_clauses():
    spec = ExperimentSpec(MachineConfig(m=2, T=1, s=10, N=1), runs=200, steps=100_000)
    times = time_to_threshold(spec, 6)
    assert times.fraction_hit >= 0.99
    assert len(times.hits()) + times.censored == 200


def test_time_to_threshold_budget_zero_all_censored():
    spec = ExperimentSpec(MachineConfig(m=3, T=2, N=1), runs=10, steps=0)
    assert time_to_threshold(spec, 0).censored == 10


def test_time_to_threshold_t_equals_m_reports_censoring():
    spec = ExperimentSpec(MachineConfig(m=3, T=3, s=10, N=1), runs=20, steps=3000)
    times = time_to_threshold(spec, 0)
    assert times.censored + len(times.hits()) == 20
    assert all(t <= 3000 for t in times.hits())


def test_time_to_threshold_rejects_t_above_m():
    spec = ExperimentSpec(MachineConfig(m=2, T=3, N=1), runs=2, steps=10)
    with pytest.raises(ValueError):
        time_to_threshold(spec, 0)


def test_blocking_probe_saturated():
    cfg = MachineConfig(m=2, T=1, s=10, N=1)
    m = Machine.from_clauses(cfg, ["EIIE", "EEEE"])
    probe = blocking_probe(m, ((0, 1), 1))
    assert probe.f_sum == 2 and probe.gate == 0.0 and probe.unchanged
    assert probe.gate == u1(probe.f_sum, cfg.T)


def test_blocking_probe_zero_sum_opens_gate():
    cfg = MachineConfig(m=2, T=1, s=10, N=1)
    m = Machine.from_clauses(cfg, ["IEEI", "IEEI"])
    with pytest.raises(lab.PreconditionError):
        blocking_probe(m, ((0, 1), 1))
    probe = blocking_probe(m, ((0, 1), 1), strict=False)
    assert probe.f_sum == 0 and probe.gate == 0.5 and probe.unchanged is None


def test_blocking_other_sub_pattern_still_trains():
    cfg = MachineConfig(m=2, T=1, s=10, N=1)
    m = Machine.from_clauses(cfg, ["EIIE", "EIIE"])
    assert blocking_probe(m, ((0, 1), 1)).gate == 0.0
    assert blocking_probe(m, ((1, 0), 1), strict=False).gate > 0


def test_blocking_probe_needs_positive_sample():
    m = Machine.from_clauses(MachineConfig(m=2), ["EIIE", "EIIE"])
    with pytest.raises(lab.PreconditionError):
        blocking_probe(m, ((0, 0), 0))


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(MachineConfig(), runs=0)
    with pytest.raises(ValueError):
        ExperimentSpec(MachineConfig(), stop=StopRule.CUSTOM)
