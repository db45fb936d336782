import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agc.errors import EmptyGraph, ShapeMismatch
from agc.graph import build_graph
from agc.metrics import (
    MetricsReport,
    accuracy_hungarian,
    aggregate,
    ari,
    conductance,
    contingency,
    evaluate,
    f1_macro,
    homogeneity_completeness,
    modularity,
    mutual_information,
    nmi,
)
from agc.metrics import ContingencyTable

from conftest import BARBELL_SPLIT, random_graph
import oracles

SAME = ([0, 0, 1, 1], [0, 0, 1, 1])
CROSSED = ([0, 0, 1, 1], [0, 1, 0, 1])


def table(counts):
    return ContingencyTable(np.asarray(counts, dtype=np.int64))


def test_contingency_examples():
    assert contingency(*SAME).counts.tolist() == [[2, 0], [0, 2]]
    assert contingency(*CROSSED).counts.tolist() == [[1, 1], [1, 1]]
    with pytest.raises(ShapeMismatch):
        contingency([], [])
    with pytest.raises(ShapeMismatch):
        contingency([0, 1], [0])


def test_accuracy_examples():
    assert accuracy_hungarian(contingency([0, 0, 1, 1], [1, 1, 0, 0]))[0] == 1.0
    assert accuracy_hungarian(contingency(*CROSSED))[0] == 0.5
    acc, matching = accuracy_hungarian(table([[2, 0, 1], [0, 2, 1]]))
    assert acc == pytest.approx(4 / 6)
    assert sorted(matching.tolist()) == [-1, 0, 1]


def test_accuracy_matches_exhaustive():
    rng = np.random.default_rng(0)
    for _ in range(100):
        counts = rng.integers(0, 6, size=(rng.integers(1, 6), rng.integers(1, 6)))
        counts[0, 0] += 1
        acc, _ = accuracy_hungarian(table(counts))
        assert acc == oracles.exhaustive_matching(counts) / counts.sum()


def test_nmi_examples():
    assert nmi(contingency(*SAME)) == pytest.approx(1.0)
    assert nmi(contingency(*CROSSED)) == pytest.approx(0.0, abs=1e-15)
    assert nmi(contingency([0, 0, 0], [1, 1, 1])) == 0.0
    counts = np.array([[3, 1], [0, 4]])
    mi = oracles.mutual_information_direct(counts)
    expect = mi / ((oracles.entropy_direct(counts.sum(1)) + oracles.entropy_direct(counts.sum(0))) / 2)
    assert mutual_information(table(counts)) == pytest.approx(mi, abs=1e-12)
    assert nmi(table(counts)) == pytest.approx(expect, abs=1e-10)


def test_ari_examples():
    assert ari(contingency(*SAME)) == pytest.approx(1.0)
    assert ari(contingency(*CROSSED)) == pytest.approx(-0.5)
    assert ari(contingency([0, 0, 0], [0, 0, 0])) == 0.0


def test_f1_examples():
    t = contingency(*SAME)
    assert f1_macro(t, accuracy_hungarian(t)[1]) == pytest.approx(1.0)
    t = contingency(*CROSSED)
    assert f1_macro(t, accuracy_hungarian(t)[1]) == pytest.approx(0.5)
    # three classes, one predicted cluster: two classes stay unmatched
    t = contingency([0, 0, 1, 2], [0, 0, 0, 0])
    _, matching = accuracy_hungarian(t)
    assert matching.tolist() == [0]
    # class 0: precision 2/4, recall 1 -> 2/3; the others score 0
    assert f1_macro(t, matching) == pytest.approx((2 / 3) / 3)


def test_homogeneity_completeness_examples():
    assert homogeneity_completeness(contingency(*SAME)) == pytest.approx((1.0, 1.0))
    assert homogeneity_completeness(contingency(*CROSSED)) == pytest.approx((0.0, 0.0), abs=1e-15)
    h, c = homogeneity_completeness(contingency([0, 0, 1, 1], [0, 1, 2, 3]))
    assert h == pytest.approx(1.0) and c < 1.0
    assert homogeneity_completeness(contingency([0, 0], [0, 0])) == (1.0, 1.0)


def test_modularity_examples(barbell):
    assert modularity(barbell, np.zeros(6, int)) == 0.0
    assert modularity(barbell, BARBELL_SPLIT) == pytest.approx(5 / 14, abs=1e-12)
    d = barbell.degrees.astype(float)
    assert modularity(barbell, np.arange(6)) == pytest.approx(-(d**2).sum() / 14**2, abs=1e-12)
    with pytest.raises(EmptyGraph):
        modularity(build_graph([], 3), np.zeros(3, int))


def test_conductance_examples(barbell):
    assert conductance(barbell, np.zeros(6, int)) == 0.0
    assert conductance(barbell, BARBELL_SPLIT) == pytest.approx(1 / 7, abs=1e-12)
    assert conductance(barbell, np.arange(6)) == 1.0


def test_conductance_isolated_cluster_contributes_zero():
    g = build_graph([(0, 1)], 3)
    # cluster {2} has zero volume; cluster {0,1} has no boundary
    assert conductance(g, np.array([0, 0, 1])) == 0.0


def test_structural_metrics_match_oracles():
    rng = np.random.default_rng(9)
    for _ in range(40):
        n = int(rng.integers(2, 20))
        g = random_graph(rng, n, rng.uniform(0.1, 0.6))
        labels = rng.integers(0, int(rng.integers(1, 5)), size=n)
        assert modularity(g, labels) == pytest.approx(oracles.modularity_double_sum(g, labels), abs=1e-12)
        assert conductance(g, labels) == pytest.approx(oracles.conductance_enumerated(g, labels), abs=1e-15)


def test_evaluate_barbell(barbell):
    report = evaluate(barbell, BARBELL_SPLIT, BARBELL_SPLIT)
    assert report.acc == report.nmi == pytest.approx(1.0)
    assert report.ari == pytest.approx(1.0)
    assert report.modularity == pytest.approx(5 / 14)
    assert report.conductance == pytest.approx(1 / 7)
    assert report.k_pred == report.k_true == 2


def test_evaluate_without_truth(barbell):
    report = evaluate(barbell, BARBELL_SPLIT)
    assert not report.supervised
    data = report.to_dict()
    assert data["acc"] is None and data["nmi"] is None
    assert data["modularity"] == pytest.approx(5 / 14)


def test_evaluate_skips_unlabeled(barbell):
    truth = np.array([0, 0, -1, 1, 1, -1])
    report = evaluate(barbell, BARBELL_SPLIT, truth)
    assert report.acc == 1.0 and report.k_true == 2


def test_report_round_trip():
    report = MetricsReport(0.3, 0.1, 2, acc=0.9, seconds=1.5, peak_mem_bytes=10)
    assert MetricsReport.from_dict(report.to_dict()) == report
    assert list(report.to_dict(profile=False)) == list(MetricsReport.KEY_ORDER[:-2])


def test_aggregate_population_sd(barbell):
    rng = np.random.default_rng(0)
    reports = [evaluate(barbell, rng.integers(0, 2, 6), BARBELL_SPLIT) for _ in range(5)]
    agg = aggregate(reports)
    for key in ("acc", "nmi", "modularity", "conductance"):
        values = [getattr(r, key) for r in reports]
        mean = sum(values) / 5
        sd = math.sqrt(sum((v - mean) ** 2 for v in values) / 5)
        assert agg[key]["mean"] == pytest.approx(mean, abs=1e-12)
        assert agg[key]["std"] == pytest.approx(sd, abs=1e-12)
    assert "seconds" not in agg


labelings = st.integers(2, 25).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 4), min_size=n, max_size=n),
                        st.lists(st.integers(0, 4), min_size=n, max_size=n))
)


@settings(max_examples=150, deadline=None)
@given(labelings, st.permutations(range(5)))
def test_relabel_invariance_and_symmetry(case, perm):
    truth, pred = map(np.array, case)
    base = contingency(truth, pred)
    relabeled = contingency(truth, np.array(perm)[pred])
    assert abs(nmi(relabeled) - nmi(base)) < 1e-12
    assert abs(ari(relabeled) - ari(base)) < 1e-12
    assert accuracy_hungarian(relabeled)[0] == accuracy_hungarian(base)[0]
    swapped = contingency(pred, truth)
    assert abs(nmi(swapped) - nmi(base)) < 1e-12
    assert abs(ari(swapped) - ari(base)) < 1e-12
    for value in (nmi(base), accuracy_hungarian(base)[0], *homogeneity_completeness(base)):
        assert -1e-12 <= value <= 1 + 1e-12
    assert -1 - 1e-12 <= ari(base) <= 1 + 1e-12


def test_agrees_with_scikit_learn():
    skm = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(1)
    for _ in range(50):
        truth = rng.integers(0, 4, size=60)
        pred = rng.integers(0, 5, size=60)
        t = contingency(truth, pred)
        assert nmi(t) == pytest.approx(skm.normalized_mutual_info_score(truth, pred), abs=1e-10)
        assert ari(t) == pytest.approx(skm.adjusted_rand_score(truth, pred), abs=1e-10)
        h, c = homogeneity_completeness(t)
        assert h == pytest.approx(skm.homogeneity_score(truth, pred), abs=1e-10)
        assert c == pytest.approx(skm.completeness_score(truth, pred), abs=1e-10)
