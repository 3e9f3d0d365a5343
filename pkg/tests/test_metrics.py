import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import eq9, plain, random_instance, reference_ndcg
from qldiv.diversify import optselect
from qldiv.metrics import SubtopicJudgments, alpha_ndcg, ia_precision, utility_ratio


def test_ia_precision_hand_example():
    judg = SubtopicJudgments.uniform("t", {"t1": {"a", "b", "c"}, "t2": {"d"}})
    report = ia_precision(["a", "b", "c", "d", "x"], judg, cutoffs=(5,))
    assert report[5] == pytest.approx(0.4, abs=1e-12)


def test_ia_precision_bounds():
    judg = SubtopicJudgments.uniform("t", {"t1": {"a", "b"}, "t2": {"a", "b"}})
    assert ia_precision(["x", "y"], judg, (2,))[2] == 0.0
    assert ia_precision(["a", "b"], judg, (2,))[2] == 1.0


def test_ia_precision_ignores_order_below_last_relevant():
    judg = SubtopicJudgments.uniform("t", {"t1": {"a"}, "t2": {"b"}})
    one = ia_precision(["a", "b", "x", "y", "z"], judg, (3, 5))
    two = ia_precision(["a", "b", "z", "y", "x"], judg, (3, 5))
    assert one.values == two.values


def test_empty_judgments_error():
    with pytest.raises(ValueError):
        alpha_ndcg(["a"], SubtopicJudgments("t", ()))
    with pytest.raises(ValueError):
        ia_precision(["a"], SubtopicJudgments("t", ()))


def test_duplicate_ranking_error():
    judg = SubtopicJudgments.uniform("t", {"t1": {"a"}})
    with pytest.raises(ValueError):
        alpha_ndcg(["a", "a"], judg)


@pytest.mark.parametrize("seed", range(20))
def test_alpha_zero_single_subtopic_is_ndcg(seed):
    rng = np.random.default_rng(seed)
    docs = [f"d{i}" for i in range(30)]
    relevant = set(rng.choice(docs, size=int(rng.integers(1, 12)), replace=False).tolist())
    ranking = rng.permutation(docs).tolist()
    cutoffs = (5, 10, 20)
    report = alpha_ndcg(ranking, SubtopicJudgments.uniform("t", {"only": relevant}), 0.0, cutoffs)
    for c in cutoffs:
        assert report[c] == pytest.approx(reference_ndcg(ranking, relevant, c), abs=1e-9)


def test_greedy_ideal_scores_one():
    subs = {"t1": {"a", "b"}, "t2": {"b", "c"}, "t3": {"d"}}
    judg = SubtopicJudgments.uniform("t", subs)
    # greedy: b covers two subtopics, d is then worth 1 while a and c are worth 1/2
    report = alpha_ndcg(["b", "d", "a", "c"], judg, 0.5, (1, 2, 3, 4, 5))
    assert all(v == pytest.approx(1.0) for v in report.values.values())


def test_covering_beats_redundant():
    judg = SubtopicJudgments.uniform("t", {"t1": {"a", "b"}, "t2": {"c"}})
    covering = alpha_ndcg(["a", "c", "b", "x"], judg, 0.5, (5,))[5]
    redundant = alpha_ndcg(["a", "b", "x", "c"], judg, 0.5, (5,))[5]
    assert covering > redundant


def test_alpha_ndcg_hand_value():
    judg = SubtopicJudgments.uniform("t", {"t1": {"a", "b"}, "t2": {"c"}})
    gains = [1.0, 0.5, 0.0, 1.0]
    dcg = sum(g / math.log2(i + 2) for i, g in enumerate(gains))
    ideal = 1.0 + 1.0 / math.log2(3) + 0.5 / 2.0
    assert alpha_ndcg(["a", "b", "x", "c"], judg, 0.5, (5,))[5] == pytest.approx(dcg / ideal, abs=1e-12)


@given(
    st.permutations([f"d{i}" for i in range(12)]),
    st.lists(st.sets(st.sampled_from([f"d{i}" for i in range(15)]), min_size=1, max_size=5), min_size=1, max_size=4),
    st.floats(0.0, 1.0),
)
def test_metric_ranges(ranking, subs, alpha):
    judg = SubtopicJudgments.uniform("t", {f"s{i}": docs for i, docs in enumerate(subs)})
    for v in alpha_ndcg(ranking, judg, alpha, (1, 5, 20)).values.values():
        assert 0.0 <= v <= 1.0
    for v in ia_precision(ranking, judg, (1, 5, 20)).values.values():
        assert 0.0 <= v <= 1.0


def test_short_ranking_not_padded():
    judg = SubtopicJudgments.uniform("t", {"t1": {"a"}})
    assert ia_precision(["a"], judg, (5,))[5] == pytest.approx(0.2)


def test_utility_ratio_self_is_one():
    inp = random_instance(np.random.default_rng(0), 10, 3, 4)
    assert utility_ratio(inp.doc_ids, inp.candidates, inp, 4) == 1.0


def test_utility_ratio_independent_sum():
    inp = random_instance(np.random.default_rng(1), 10, 2, 4)
    out = optselect(inp)
    _, rel, probs, rows = plain(inp)
    num = sum(eq9(rel[inp.position(d)], probs, rows[inp.position(d)], inp.lam) for d in out.selected)
    den = sum(eq9(rel[i], probs, rows[i], inp.lam) for i in range(4))
    assert utility_ratio(out, inp.candidates, inp, 4) == pytest.approx(num / den, abs=1e-9)


def test_utility_ratio_errors():
    inp = random_instance(np.random.default_rng(2), 5, 2, 3)
    with pytest.raises(ValueError):
        utility_ratio(inp.doc_ids[:2], inp.candidates, inp, 3)
    zero = random_instance(np.random.default_rng(2), 5, 2, 3, lam=1.0, zero_frac=1.0)
    with pytest.raises(ZeroDivisionError):
        utility_ratio(zero.doc_ids, zero.candidates, zero, 3)
