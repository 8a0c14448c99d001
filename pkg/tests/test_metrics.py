import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cervispec.errors import ValidationError
from cervispec.metrics import (ConfusionCounts, EvalReport, confusion, read_report_csv,
                               reference_table, report_csv, sens_spec, text_table,
                               threshold_sweep, tradeoff_csv, variability)


def test_confusion_all_correct():
    c = confusion([1, 0, 1, 0], [1, 0, 1, 0])
    assert c.false_negative == 0 and c.false_positive == 0


def test_confusion_all_sil_on_negatives():
    c = confusion([1] * 5, [0] * 5)
    assert c.false_positive == 5 and c.true_negative == 0


def test_confusion_hand_tally():
    pred = [1, 1, 0, 0, 1, 0]
    truth = [1, 0, 0, 1, 1, 0]
    # manual: idx0 TP, idx1 FP, idx2 TN, idx3 FN, idx4 TP, idx5 TN
    assert confusion(pred, truth) == ConfusionCounts(2, 1, 2, 1)


def test_confusion_errors():
    with pytest.raises(ValidationError):
        confusion([1, 0], [1])
    with pytest.raises(ValidationError):
        confusion([], [])
    with pytest.raises(ValidationError):
        ConfusionCounts(-1, 0, 0, 0)


def test_sens_spec_headline():
    s, p = sens_spec(ConfusionCounts(91, 9, 67, 33))
    assert s == 91.0 and p == 67.0


def test_sens_spec_perfect_and_undefined():
    assert sens_spec(ConfusionCounts(3, 0, 4, 0)) == (100.0, 100.0)
    with pytest.raises(ValidationError, match="sensitivity"):
        sens_spec(ConfusionCounts(0, 0, 4, 1))
    with pytest.raises(ValidationError, match="specificity"):
        sens_spec(ConfusionCounts(3, 1, 0, 0))


@settings(max_examples=100, deadline=None)
@given(data=st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_count_conservation_and_bounds(data):
    pred, truth = zip(*data)
    c = confusion(pred, truth)
    assert c.total == len(data)
    assert c.true_positive + c.false_negative == sum(truth)
    if 0 < sum(truth) < len(truth):
        s, p = sens_spec(c)
        assert 0 <= s <= 100 and 0 <= p <= 100


def test_variability_examples():
    m, s = variability([60, 70])
    assert m == 65 and abs(s - 7.0710678118654755) < 1e-12
    assert variability([4, 4, 4]) == (4.0, 0.0)
    assert variability([3.3]) == (3.3, 0.0)
    with pytest.raises(ValidationError):
        variability([])


def test_variability_two_pass_oracle():
    vals = list(np.random.default_rng(0).uniform(40, 100, 10))
    mean = sum(vals) / len(vals)
    var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    m, s = variability(vals)
    assert abs(m - mean) < 1e-12 and abs(s - math.sqrt(var)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_threshold_sweep_monotone(seed):
    rng = np.random.default_rng(seed)
    scores = rng.random(40)
    truth = rng.integers(0, 2, 40)
    truth[:2] = [0, 1]
    rows = threshold_sweep(scores, truth, np.linspace(0.01, 0.99, 25))
    sens = [r[1] for r in rows]
    spec = [r[2] for r in rows]
    assert all(a >= b for a, b in zip(sens, sens[1:]))
    assert all(a <= b for a, b in zip(spec, spec[1:]))


def test_reference_table():
    rows = {r.method: r for r in reference_table()}
    colpo = rows["Colposcopy (human expert)"]
    assert (colpo.specificity, colpo.specificity_std) == (48.0, 23.0)
    assert (colpo.sensitivity, colpo.sensitivity_std) == (94.0, 6.0)
    pap = rows["Pap smear (human expert)"]
    assert (pap.specificity, pap.specificity_std, pap.sensitivity, pap.sensitivity_std) == \
        (68.0, 21.0, 62.0, 23.0)
    msa = rows["2-step MSA"]
    assert (msa.specificity, msa.sensitivity) == (65.0, 84.0)
    assert all(r.source == "literature" for r in rows.values())


def _reports():
    return [EvalReport("one-step-rbf", "average", 1.0, [60.0, 62.0], [85.0, 84.0]),
            EvalReport("one-step-rbf", "average", 2.5, [90.0, 92.0], [66.0, 68.0]),
            EvalReport("one-step-rbf", "median", 2.5, [91.0], [67.0])]


def test_report_csv_and_round_trip():
    text = report_csv(_reports())
    lines = text.splitlines()
    assert lines[0] == "method,combiner,cost,sensitivity,specificity,sens_std,spec_std"
    assert lines[1] == "one-step-rbf,average,1,61.0,84.5,1.4,0.7"
    assert lines[3].endswith(",0.0,0.0")
    rows = read_report_csv(text + "# trailing comment\n")
    assert [r["cost"] for r in rows] == [1.0, 2.5, 2.5]
    assert report_csv(_reports(), with_method=False).splitlines()[0] == \
        "combiner,cost,sensitivity,specificity,sens_std,spec_std"


def test_tradeoff_csv_sorted_by_cost():
    reps = list(reversed(_reports()))
    text = tradeoff_csv(reps, "average")
    assert text.splitlines() == ["specificity,sensitivity", "84.5,61.0", "67.0,91.0"]


def test_text_table_keeps_literature_separate():
    text = text_table(_reports())
    assert "[literature]" in text
    assert text.index("one-step-rbf") < text.index("2-step MSA")
    assert "[literature]" not in text_table(_reports(), include_reference=False)
