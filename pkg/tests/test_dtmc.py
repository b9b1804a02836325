import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tmxor import dtmc
from tmxor.core import (
    SUBPATTERN_A,
    SUBPATTERN_B,
    XOR_FULL,
    Action,
    Feedback,
    FeedbackType,
    MachineConfig,
    Mode,
    TaState,
    clause_eval,
    Clause,
    feedback_probs,
    literals,
    ta_update,
    u1,
    u2,
)
from tmxor.dtmc import (
    build_single_clause_matrix,
    build_two_clause_matrix,
    classify_states,
    clause_transition_prob,
    decode_state,
    encode_state,
    limiting_matrix,
    per_ta_stay_flip,
)


@pytest.fixture(scope="module")
def P2():
    return build_two_clause_matrix(s=10, T=1)


@pytest.fixture(scope="module")
def report2(P2):
    return dtmc.analyze(P2)


# --- indexing -----------------------------------------------------------------


@pytest.mark.parametrize(
    "bits, index",
    [
        ((0,) * 8, 1),
        ((1,) * 8, 256),
        ((0, 1, 1, 0, 1, 0, 0, 1), 106),
        ((1, 0, 0, 1, 0, 1, 1, 0), 151),
        ((0, 1, 1, 0), 7),
    ],
)
def test_encode_anchors(bits, index):
    assert encode_state(bits) == index
    assert decode_state(index, len(bits)) == bits


def test_index_seven_is_not_x1_and_x2():
    assert dtmc.action_string(decode_state(7, 4)) == "EIIE"


@given(st.integers(1, 256))
def test_encode_decode_inverse(i):
    assert encode_state(decode_state(i)) == i


@pytest.mark.parametrize("i", [0, 257])
def test_decode_out_of_range(i):
    with pytest.raises(ValueError):
        decode_state(i)


# --- one-step probabilities ---------------------------------------------------


def test_stay_flip_examples():
    assert per_ta_stay_flip(FeedbackType.TYPE_I, 1, 1, Action.INCLUDE, 10) == (1.0, 0.0)
    stay, flip = per_ta_stay_flip(FeedbackType.TYPE_I, 1, 1, Action.EXCLUDE, 10)
    assert (stay, flip) == pytest.approx((0.1, 0.9))
    assert per_ta_stay_flip(FeedbackType.TYPE_II, 1, 0, Action.EXCLUDE, 10) == (0.0, 1.0)


def test_clause_transition_examples():
    a = (0, 1, 1, 0)
    for p_act in (0.0, 0.3, 1.0):
        assert clause_transition_prob(a, a, (0, 1), FeedbackType.TYPE_I, p_act, 10) == 1.0
    assert clause_transition_prob(a, (0, 1, 1, 1), (0, 1), FeedbackType.TYPE_I, 0.7, 10) == 0.0
    for p_act in (0.25, 0.5, 1.0):
        got = clause_transition_prob((0, 0, 0, 0), (0, 0, 1, 0), (0, 1), FeedbackType.TYPE_I, p_act, 10)
        assert got == pytest.approx(0.09 * p_act, rel=1e-12)


def _enumerated_row(source: int, cfg: MachineConfig, dataset=XOR_FULL) -> np.ndarray:
    """Next-state distribution by walking every gate and feedback outcome."""
    width = 4
    bits = decode_state(source, cfg.m * width)
    tas = [TaState(1 if b else 2, 1) for b in bits]
    row = np.zeros(2 ** (cfg.m * width))
    weights = cfg.weights(dataset)
    for (x, y), w in zip(dataset.rows, weights):
        lits = list(literals(np.array(x)))
        outs = [clause_eval(Clause(tuple(t.state for t in tas[c * width:(c + 1) * width]), 1), x, Mode.TRAIN)
                for c in range(cfg.m)]
        f = sum(outs)
        if cfg.fixed_gates:
            p = cfg.fixed_gates[0] if y else cfg.fixed_gates[1]
        else:
            p = u1(f, cfg.T) if y else u2(f, cfg.T)
        ftype = FeedbackType.TYPE_I if y else FeedbackType.TYPE_II
        for gates in itertools.product((True, False), repeat=cfg.m):
            pg = np.prod([p if g else 1 - p for g in gates])
            if pg == 0:
                continue
            options = []
            for k, ta in enumerate(tas):
                c = k // width
                if not gates[c]:
                    options.append([(ta, 1.0)])
                    continue
                probs = feedback_probs(ftype, outs[c], int(lits[k % width]), ta.action, cfg.s)
                options.append([(ta_update(ta, fb), pr) for fb, pr in zip(Feedback, probs) if pr > 0])
            for combo in itertools.product(*options):
                pr = w * pg * np.prod([q for _, q in combo])
                nxt = encode_state([1 if t.action == Action.INCLUDE else 0 for t, _ in combo])
                row[nxt - 1] += pr
    return row


def test_two_clause_rows_match_outcome_enumeration(P2):
    cfg = MachineConfig(m=2, T=1, s=10, N=1)
    rng = np.random.default_rng(8)
    sources = [1, 106, 151, 256] + list(rng.choice(np.arange(2, 256), 20, replace=False))
    for j in sources:
        np.testing.assert_allclose(P2.entries[j - 1], _enumerated_row(int(j), cfg), atol=1e-15)


@pytest.mark.parametrize("ds", [SUBPATTERN_A, SUBPATTERN_B, XOR_FULL])
def test_single_clause_rows_match_outcome_enumeration(ds):
    cfg = MachineConfig(m=1, s=10, N=1, fixed_gates=(0.5, 0.5))
    P = build_single_clause_matrix(ds, 0.5, 0.5, 10)
    for j in range(1, 17):
        np.testing.assert_allclose(P.entries[j - 1], _enumerated_row(j, cfg, ds), atol=1e-15)


def test_nonuniform_inputs_and_other_hyperparameters():
    dist = (0.1, 0.2, 0.3, 0.4)
    P = build_two_clause_matrix(s=3.5, T=2, input_dist=dist)
    cfg = MachineConfig(m=2, T=2, s=3.5, N=1, input_dist=dist)
    for j in (1, 50, 106, 200):
        np.testing.assert_allclose(P.entries[j - 1], _enumerated_row(j, cfg), atol=1e-15)


# --- matrix properties --------------------------------------------------------


def test_absorbing_diagonals(P2):
    assert P2[106, 106] == 1.0
    assert P2[151, 151] == 1.0


@pytest.mark.parametrize("s, T", [(1, 1), (2, 1), (10, 1), (10, 2), (100, 3), (4.5, 1)])
def test_rows_stochastic(s, T):
    P = build_two_clause_matrix(s=s, T=T).entries
    assert np.abs(P.sum(axis=1) - 1).max() <= 1e-12
    assert P.min() >= 0 and P.max() <= 1


def test_symmetries_exact(P2):
    P = P2.entries
    assert np.array_equal(dtmc.permuted(P, dtmc.clause_swap_permutation()), P)
    perm = dtmc.input_swap_permutation()
    assert np.array_equal(dtmc.permuted(P, perm), P)
    absorbing = {106, 151}
    assert {int(perm[i - 1]) + 1 for i in absorbing} == absorbing


def test_transition_matrix_rejects_non_stochastic():
    with pytest.raises(ValueError):
        dtmc.TransitionMatrix(np.array([[0.5, 0.4], [0.0, 1.0]]))


# --- limiting matrix ------------------------------------------------------------


def test_identity_limit():
    lim = limiting_matrix(np.eye(5))
    assert np.array_equal(lim.limiting, np.eye(5))
    cls = classify_states(np.eye(5), lim.limiting)
    assert cls.absorbing == (1, 2, 3, 4, 5) and cls.verdict


def test_two_cycle_fails_fixed_point():
    with pytest.raises(dtmc.NonConvergence) as info:
        limiting_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert info.value.residual == 1.0


def test_three_cycle_exhausts_squarings():
    cycle = np.roll(np.eye(3), 1, axis=1)
    with pytest.raises(dtmc.NonConvergence) as info:
        limiting_matrix(cycle, max_iters=10)
    assert info.value.iterations == 10


def test_theorem_one_chain(report2):
    assert report2.absorbing == [106, 151]
    assert report2.bullets == {"b1": True, "b2": True, "b3": True}
    assert report2.residual < 1e-9


def test_absorption_probabilities_match_linear_solve(P2, report2):
    P = P2.entries
    absorbing = np.array([105, 150])
    transient = np.setdiff1d(np.arange(256), absorbing)
    Q = P[np.ix_(transient, transient)]
    R = P[np.ix_(transient, absorbing)]
    B = np.linalg.solve(np.eye(len(transient)) - Q, R)
    np.testing.assert_allclose(report2.limiting[np.ix_(transient, absorbing)], B, atol=1e-9)


def test_limit_is_fixed_point(P2, report2):
    assert np.abs(report2.limiting @ P2.entries - report2.limiting).max() < 1e-9


def test_sub_pattern_a_column_seven():
    rep = dtmc.analyze(build_single_clause_matrix(SUBPATTERN_A, 0.5, 0.5, 10))
    A = rep.limiting
    assert rep.absorbing == [7]
    np.testing.assert_allclose(A[:, 6], 1.0, atol=1e-9)
    assert np.abs(np.delete(A, 6, axis=1)).max() < 1e-9


@pytest.mark.parametrize("gates", [(0.5, 0.5), (0.1, 0.9), (1.0, 0.2)])
def test_single_clause_lemmas_for_any_positive_gates(gates):
    a = dtmc.analyze(build_single_clause_matrix(SUBPATTERN_A, *gates, 10))
    b = dtmc.analyze(build_single_clause_matrix(SUBPATTERN_B, *gates, 10))
    full = dtmc.analyze(build_single_clause_matrix(XOR_FULL, *gates, 10))
    assert a.absorbing == [7] and a.verdict
    assert b.absorbing == [encode_state((1, 0, 0, 1))] and b.verdict
    assert full.absorbing == []


def test_classify_reports_violations():
    P = np.array([[1.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.0, 0.5, 0.5]])
    A = limiting_matrix(P).limiting
    cls = classify_states(P, A)
    assert cls.absorbing == (1,)
    assert not cls.bullets["b2"] and cls.violations["b2"] == [2, 3]


# --- dumps ----------------------------------------------------------------------


def test_csv_and_json_dumps():
    P = build_single_clause_matrix(SUBPATTERN_A)
    lines = P.to_csv().splitlines()
    assert lines[0].split(",") == ["from"] + [str(i) for i in range(1, 17)]
    assert len(lines) == 17
    row7 = [float(v) for v in lines[7].split(",")[1:]]
    assert row7 == list(P.entries[6])
    d = json.loads(P.to_json())
    assert d["dim"] == 16 and len(d["entries"]) == 256
    assert np.array_equal(dtmc.TransitionMatrix.from_json(P.to_json()).entries, P.entries)


def test_chain_report_json(report2):
    d = json.loads(report2.to_json())
    assert d["absorbing"] == [106, 151]
    assert set(d["bullets"]) == {"b1", "b2", "b3"}
    assert isinstance(d["iterations"], int) and d["residual"] < 1e-9
