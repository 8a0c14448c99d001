from dataclasses import replace

import numpy as np
import pytest

from cervispec import pipeline as pl
from cervispec.dimred import REDUCED_PAIRS_ALGO1, REDUCED_PAIRS_ALGO2
from cervispec.errors import ValidationError
from cervispec.models import (NON_SIL, SIL, CostPolicy, LogisticModel, TrainConfig, kmeans,
                              nearest_center_widths)
from cervispec.preprocess import normalize, select_columns
from cervispec.spectra import Histology, SynthConfig, synthesize_dataset

H = Histology
FAST = pl.PipelineConfig(rbf_train=TrainConfig(1.0, 300, 20, 1e-4),
                         mlp_train=TrainConfig(2.0, 300, 25, 1e-5),
                         pool_size=3, repetitions=2)


class Stub:
    """Classifier with a fixed verdict that counts how often it is asked."""
    kind = "stub"

    def __init__(self, verdict_sil: bool):
        self.s = 0.9 if verdict_sil else 0.1
        self.calls = 0

    def outputs(self, X):
        X = np.atleast_2d(X)
        self.calls += len(X)
        return np.tile([1 - self.s, self.s], (len(X), 1))


@pytest.mark.parametrize("v1,v2,expected", [
    (False, False, NON_SIL), (False, True, NON_SIL), (True, False, NON_SIL), (True, True, SIL)])
def test_two_step_truth_table(v1, v2, expected):
    s1, s2 = Stub(v1), Stub(v2)
    ts = pl.TwoStepClassifier(s1, s2)
    assert pl.two_step_classify(ts, np.zeros(3), np.zeros(3)) == expected
    assert s1.calls == 1
    assert s2.calls == (1 if v1 else 0)


def test_two_step_predict_only_forwards_positives():
    class Half(Stub):
        def outputs(self, X):
            X = np.atleast_2d(X)
            self.calls += len(X)
            s = np.where(X[:, 0] > 0, 0.9, 0.1)
            return np.column_stack([1 - s, s])
    s1, s2 = Half(True), Stub(True)
    X = np.array([[1.0], [-1.0], [2.0], [-3.0]])
    out = pl.two_step_predict(pl.TwoStepClassifier(s1, s2), X, X)
    assert list(out) == [1, 0, 1, 0]
    assert s2.calls == 2


def test_one_step_features(canonical):
    train, _ = canonical
    fm = pl.build_one_step_features(train)
    assert fm.shape == (len(train), 26)
    tags = [lab[0] for lab in fm.column_labels]
    assert tags == ["normalized"] * 13 + ["normalized_mean_scaled"] * 13
    p1 = [lab[1:] for lab in fm.column_labels[:13]]
    p2 = [lab[1:] for lab in fm.column_labels[13:]]
    assert p1 == list(REDUCED_PAIRS_ALGO1) and p2 == list(REDUCED_PAIRS_ALGO2)
    assert set(p1) ^ set(p2) == {(380, 640), (460, 640), (380, 600), (460, 660)}
    ref = select_columns(normalize(train), REDUCED_PAIRS_ALGO1)
    assert np.array_equal(fm.values[:, 0], ref.values[:, 0])


def test_constituent_spec_pairing():
    with pytest.raises(ValidationError):
        pl.ConstituentSpec("algo1", "normalized_mean_scaled", "reduced13_algo1", H.NormalSquamous)
    with pytest.raises(ValidationError):
        pl.ConstituentSpec("algo2", "normalized_mean_scaled", "reduced13_algo2", H.NormalSquamous)
    assert pl.ALGO2.negative_class is H.NormalColumnar


def test_trim_table1_counts(canonical):
    train, _ = canonical
    fm = pl.training_rows(pl.build_one_step_features(train), False)
    groups = pl.trim_groups(fm.histologies())
    counts = {g: int(np.sum(groups == g)) for g in set(groups)}
    assert counts == {"NS": 94, "NC": 13, "SIL": 58}
    t = pl.trim_training_set(fm, seed=3)
    tg = pl.trim_groups(t.histologies())
    assert t.shape[0] == 39
    assert {g: int(np.sum(tg == g)) for g in set(tg)} == {"NS": 13, "NC": 13, "SIL": 13}
    assert t == pl.trim_training_set(fm, seed=3)
    assert t != pl.trim_training_set(fm, seed=4)


def test_trim_balanced_and_errors():
    ds = synthesize_dataset(SynthConfig(counts={H.NormalSquamous: 4, H.HighGradeSIL: 4}))
    fm = normalize(ds)
    t = pl.trim_training_set(fm, seed=0)
    assert t == fm
    with pytest.raises(ValidationError, match="absent"):
        pl.trim_training_set(fm, seed=0, classes=["NS", "SIL", "NC"])


def test_one_step_frozen_kernels_equal_trimmed_kmeans(canonical):
    train, _ = canonical
    fn, tcfg = pl.one_step_trainer(train, FAST, CostPolicy(2.5))
    net = fn(tcfg.with_seed(5))
    fm = pl.training_rows(pl.build_one_step_features(train), False)
    trimmed = pl.trim_training_set(fm, seed=5)
    C = kmeans(trimmed.values, 10, 5)
    assert np.array_equal(net.centers, C)
    assert np.array_equal(net.widths, nearest_center_widths(C, 1, fm.values))
    assert net.input_dim == 26


def test_run_one_step_report_structure(canonical):
    train, test = canonical
    reps = pl.run_one_step(FAST, train, test, CostPolicy(2.5))
    assert [r.combiner for r in reps] == ["single", "average", "median"]
    for r in reps:
        assert len(r.sensitivities) == FAST.repetitions
        assert 0 <= r.sensitivity[0] <= 100 and r.specificity[1] >= 0
        assert r.config["seeds"] == [[0, 1, 2], [3, 4, 5]]
        assert r.config["pool_size"] == 3
    again = pl.run_one_step(FAST, train, test, CostPolicy(2.5))
    assert [r.row() for r in again] == [r.row() for r in reps]


def test_extreme_cost_saturates_sensitivity(canonical):
    train, test = canonical
    cfg = replace(FAST, repetitions=1)
    reps = pl.run_one_step(cfg, train, test, CostPolicy(sil_cost=1e4))
    for r in reps:
        assert r.sensitivity[0] == 100.0


def test_exclude_inflammation_from_test(canonical):
    train, test = canonical
    cfg = replace(FAST, repetitions=1, pool_size=1)
    base = pl.run_one_step(cfg, train, test)
    excl = pl.run_one_step(replace(cfg, exclude_inflammation_from_test=True), train, test)
    assert base[0].sensitivity == excl[0].sensitivity
    assert excl[0].config["exclude_inflammation_from_test"] is True


def test_cost_sweep_contract(canonical):
    train, test = canonical
    cfg = replace(FAST, repetitions=1, pool_size=2)
    one = pl.cost_sweep(cfg, train, test, [2.0])
    assert len([r for r in one if r.combiner == "average"]) == 1
    dup = pl.cost_sweep(cfg, train, test, [3.0, 1.0, 3.0])
    avg = [r for r in dup if r.combiner == "average"]
    assert [r.cost for r in avg] == [1.0, 3.0, 3.0]
    assert avg[1].row() == avg[2].row()
    with pytest.raises(ValidationError):
        pl.cost_sweep(cfg, train, test, [])
    with pytest.raises(ValidationError):
        pl.cost_sweep(cfg, train, test, [1.0, -2.0])


def test_one_step_classifier_dimension():
    from cervispec.ensemble import Ensemble
    with pytest.raises(ValidationError):
        pl.OneStepClassifier(Ensemble((LogisticModel(np.ones(13), 0.0),)))


def test_fit_one_step_predicts(canonical):
    train, test = canonical
    clf = pl.fit_one_step(train, replace(FAST, pool_size=2))
    labels, scores = clf.predict(test)
    assert labels.shape == (len(test),) and np.all((scores >= 0) & (scores <= 1))


def test_constituents_and_two_step_run(canonical):
    train, test = canonical
    cfg = replace(FAST, repetitions=1, pool_size=2)
    r1 = pl.run_constituent(pl.ALGO1, train, test, cfg, CostPolicy(2.0))
    assert r1[0].method == "algo1-rbf"
    pcs = replace(pl.ALGO1, feature_set="pcs", preset="logistic")
    r2 = pl.run_constituent(pcs, train, test, cfg, CostPolicy(2.0))
    assert r2[0].method == "algo1-logistic"
    two = pl.run_two_step(train, test, cfg)
    assert [r.method for r in two] == ["two-step"] * 3
    assert two[0].config["seeds_step1"] == [[0, 1]]


def test_pca_feature_recipe_uses_significant_pcs(canonical):
    train, _ = canonical
    spec = replace(pl.ALGO1, feature_set="pcs", preset="rbf_pcs")
    rec = pl.ConstituentFeatures(spec)
    base = pl.two_class_rows(rec.full_matrix(train), H.NormalSquamous)
    rec.fit(base)
    out = rec.transform(base)
    assert out.shape[1] == 3 == len(rec.selected)
    assert all(lab.startswith("PC") for lab in out.column_labels)


def test_mixed_family_pool(canonical):
    train, test = canonical
    cfg = replace(FAST, repetitions=1, pool_size=4)
    reps = pl.run_one_step(cfg, train, test, family="mixed")
    assert reps[0].method == "one-step-mixed"
