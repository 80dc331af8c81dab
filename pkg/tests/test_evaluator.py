from __future__ import annotations

import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gadgetforge.errors import LengthMismatch, NoVulnerableClasses
from gadgetforge.evaluator import (ConfusionCounts, MetricSet, MetricValue, ResultRow, aggregate, confusion,
                                   emit_report, evaluate_predictions, metrics, read_report_csv, report_csv)

from oracles import metrics_fractions


def test_confusion_examples():
    assert confusion([1, 0, 1], [1, 0, 1]) == ConfusionCounts(TP=2, FP=0, TN=1, FN=0)
    assert confusion([0] * 4, [1] * 4).FN == 4
    c = confusion([0, 1, 2, 2], [1, 0, 2, 0], positive=2)
    assert c == ConfusionCounts(TP=1, FP=1, TN=2, FN=0)
    with pytest.raises(LengthMismatch):
        confusion([1], [1, 0])


def test_metric_examples():
    m = metrics(ConfusionCounts(TP=9, FP=1, TN=7, FN=3))
    assert m.Precision.value == pytest.approx(0.9)
    assert m.Recall.value == pytest.approx(0.75)
    assert m.F1.value == pytest.approx(0.8182, abs=1e-4)
    assert m.FPR.value == pytest.approx(0.125) and m.FNR.value == pytest.approx(0.25)
    perfect = metrics(ConfusionCounts(TP=3, FP=0, TN=4, FN=0))
    assert perfect.as_dict() == {"FPR": 0, "FNR": 0, "Precision": 1, "Recall": 1, "F1": 1}
    degenerate = metrics(ConfusionCounts(TP=0, FP=0, TN=5, FN=2))
    assert not degenerate.Precision.defined and degenerate.Precision.value == 0.0
    assert degenerate.Precision.render() == "n/a"


def test_all_small_confusions_match_rational_oracle():
    for tp, fp, tn, fn in itertools.product(range(6), repeat=4):
        got = metrics(ConfusionCounts(tp, fp, tn, fn))
        for name, want in metrics_fractions(tp, fp, tn, fn).items():
            v = getattr(got, name)
            if want is None:
                assert not v.defined and v.value == 0.0
            else:
                assert v.defined and abs(v.value - float(want)) <= 1e-12


def test_aggregate_examples():
    a, b = ConfusionCounts(TP=1, FP=0, FN=1), ConfusionCounts(TP=3, FP=1, FN=0)
    sets = [metrics(a), metrics(b)]
    assert aggregate(sets, [a, b], "macro").Precision.value == pytest.approx(0.875)
    assert aggregate(sets, [a, b], "global").Precision.value == pytest.approx(0.8)
    assert aggregate(sets[:1], [a], "global") == sets[0]
    macro_one = aggregate(sets[:1], [a], "macro")
    for n in ("Precision", "Recall", "F1"):
        assert getattr(macro_one, n) == getattr(sets[0], n)
    assert aggregate([sets[1]] * 2, [b, b], "macro").F1 == sets[1].F1
    with pytest.raises(NoVulnerableClasses):
        aggregate([], [], "global")


counts = st.builds(ConfusionCounts, *(st.integers(0, 30) for _ in range(4)))


@given(st.lists(counts, min_size=1, max_size=4), st.randoms())
def test_aggregate_invariances(cs, rnd):
    sets = [metrics(c) for c in cs]
    order = list(range(len(cs)))
    rnd.shuffle(order)
    assert aggregate(sets, cs, "macro") == aggregate([sets[i] for i in order], [cs[i] for i in order], "macro")
    total = ConfusionCounts()
    for c in cs:
        total = total + c
    assert aggregate(sets, cs, "global") == aggregate([metrics(total)], [total], "global")


@given(counts)
def test_metric_identities(c):
    m = metrics(c)
    if m.Recall.defined:
        assert m.Recall.value + m.FNR.value == pytest.approx(1.0)
    if m.FPR.defined:
        assert c.TN / (c.TN + c.FP) + m.FPR.value == pytest.approx(1.0)
    if m.F1.defined:
        assert 0.0 <= m.F1.value <= 1.0
        assert (m.F1.value == 0.0) == (m.Precision.value * m.Recall.value == 0.0)


def test_evaluate_predictions_multiclass_rows():
    out = evaluate_predictions([0, 1, 2, 2, 1], [0, 1, 2, 1, 1], ("NV", "BE", "RME"))
    assert list(out) == ["BE", "RME", "global", "macro"]
    assert not out["macro"].FPR.defined
    assert list(evaluate_predictions([0, 1], [0, 1], ("NV", "V"))) == ["V"]


def _ms(f1):
    v = MetricValue(f1)
    return MetricSet(v, v, v, v, v)


def test_report_folds_average_and_round_trip():
    rows = [ResultRow("group1", "transformer", str(i + 1), "V", _ms(f)) for i, f in enumerate((0.93, 0.94, 0.95))]
    text_csv, text = emit_report(rows)
    assert "transformer[avg]" in text and "94.00%" in text.splitlines()[-1]
    assert read_report_csv(text_csv) == rows
    single = emit_report([ResultRow("g", "m", "test", "V", metrics(ConfusionCounts(0, 0, 5, 2)))])[1]
    lines = single.strip().splitlines()
    assert len(lines) == 3 + 5 and "n/a" in single and "0.00%" in lines[3]
    assert report_csv(rows).splitlines()[0] == "group,model,fold,class,metric,value,defined"
    with pytest.raises(ValueError):
        emit_report([])
