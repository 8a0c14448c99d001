import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cervispec.dimred import REDUCED_PAIRS_ALGO1
from cervispec.errors import ValidationError
from cervispec.preprocess import (FeatureMatrix, concatenate, from_dataset, load_feature_matrix,
                                  mean_scale, normalize, save_feature_matrix, select_columns)
from cervispec.spectra import Histology, SynthConfig, synthesize_dataset

NS = Histology.NormalSquamous


def fm_from(values, labels, patients=None, tag="raw"):
    values = np.asarray(values, float)
    patients = patients or [f"p{i}" for i in range(len(values))]
    keys = tuple((p, f"s{i}", NS) for i, p in enumerate(patients))
    return FeatureMatrix(values, tuple(labels), keys, tag)


def test_block_scaled_by_max():
    fm = fm_from([[2, 4, 8, 1, 3]], [(337, 400), (337, 405), (337, 410), (380, 400), (380, 405)])
    out = normalize(fm)
    assert np.array_equal(out.values[0], [0.25, 0.5, 1.0, 1 / 3, 1.0])
    assert out.preprocessing_tag == "normalized"


def test_normalized_idempotent_on_fixed_point():
    fm = fm_from([[0.25, 0.5, 1.0]], [(337, 400), (337, 405), (337, 410)])
    assert np.array_equal(normalize(fm).values, fm.values)


def test_zero_block_error_names_sample_and_excitation():
    fm = fm_from([[1, 2, 3], [0, 0, 0]], [(337, 400), (337, 405), (337, 410)],
                 patients=["A", "B"])
    with pytest.raises(ValidationError, match=r"B/s1.*337"):
        normalize(fm)


def test_normalize_dataset_blocks_have_unit_max():
    ds = synthesize_dataset(SynthConfig())
    out = normalize(ds)
    for ex, sl in ds.grid.block_slices().items():
        assert np.all(out.values[:, sl].max(axis=1) == 1.0)


def test_area_and_global_policies():
    fm = fm_from([[1, 3, 2, 2]], [(337, 400), (337, 405), (380, 400), (380, 405)])
    area = normalize(fm, policy="area")
    assert np.allclose(area.values, [[0.25, 0.75, 0.5, 0.5]])
    glob = normalize(fm, granularity="global")
    assert np.allclose(glob.values, [[1 / 3, 1, 2 / 3, 2 / 3]])
    with pytest.raises(ValidationError):
        normalize(fm, policy="median")


@settings(max_examples=50, deadline=None)
@given(x=arrays(np.float64, (4, 6), elements=st.floats(0.01, 100)),
       c=st.floats(0.01, 100), row=st.integers(0, 3))
def test_normalize_properties(x, c, row):
    labels = [(337, 400 + 5 * i) for i in range(3)] + [(460, 500 + 5 * i) for i in range(3)]
    fm = fm_from(x, labels)
    n1 = normalize(fm)
    # idempotence
    assert np.allclose(normalize(n1).values, n1.values, rtol=0, atol=1e-15)
    # scale invariance of one sample's block
    y = x.copy()
    y[row, :3] *= c
    n2 = normalize(fm_from(y, labels))
    assert np.allclose(n2.values[row, :3], n1.values[row, :3], rtol=1e-12, atol=0)
    assert np.all(n1.values.max(axis=1) == 1.0)


def test_mean_scale_two_identical_rows_to_zero():
    fm = fm_from([[0.5, 1.0], [0.5, 1.0]], [(337, 400), (337, 405)], ["A", "A"], "normalized")
    assert np.all(mean_scale(fm).values == 0.0)


def test_mean_scale_single_site_zero():
    fm = fm_from([[0.5, 1.0], [1.0, 0.2], [0.3, 1.0]], [(337, 400), (337, 405)],
                 ["A", "B", "B"], "normalized")
    out = mean_scale(fm)
    assert np.all(out.values[0] == 0.0)
    assert out.preprocessing_tag == "normalized_mean_scaled"


def test_mean_scale_requires_normalized():
    fm = fm_from([[1.0, 2.0]], [(337, 400), (337, 405)])
    with pytest.raises(ValidationError):
        mean_scale(fm)


def test_mean_scale_three_patient_means_zero():
    ds = synthesize_dataset(SynthConfig(counts={NS: 9, Histology.LowGradeSIL: 3}, n_patients=3))
    out = mean_scale(normalize(ds))
    pids = np.array(out.patient_ids())
    assert len(set(pids)) == 3
    for p in set(pids):
        # oracle: recompute means with a plain loop
        rows = [out.values[i] for i in range(len(pids)) if pids[i] == p]
        col_means = [sum(r[j] for r in rows) / len(rows) for j in range(out.shape[1])]
        assert max(abs(m) for m in col_means) < 1e-12


@settings(max_examples=30, deadline=None)
@given(x=arrays(np.float64, (6, 4), elements=st.floats(0.0, 1.0)),
       groups=st.lists(st.sampled_from("ABC"), min_size=6, max_size=6))
def test_mean_scale_zero_sum_property(x, groups):
    fm = fm_from(x, [(337, 400 + 5 * i) for i in range(4)], groups, "normalized")
    out = mean_scale(fm).values
    for g in set(groups):
        rows = np.array(groups) == g
        assert np.all(np.abs(out[rows].sum(axis=0)) < 1e-12)


def test_mean_scale_global_reference():
    fm = fm_from([[1.0, 0.0], [0.0, 1.0]], [(337, 400), (337, 405)], ["A", "B"], "normalized")
    out = mean_scale(fm, reference="global_mean")
    assert np.allclose(out.values, [[0.5, -0.5], [-0.5, 0.5]])
    out = mean_scale(fm, reference="global_mean", reference_mean=[1.0, 1.0])
    assert np.allclose(out.values, [[0.0, -1.0], [-1.0, 0.0]])


def test_select_table2_algo1():
    fm = from_dataset(synthesize_dataset(SynthConfig(counts={NS: 3})))
    sub = select_columns(fm, REDUCED_PAIRS_ALGO1)
    assert sub.shape == (3, 13)
    assert set(sub.column_labels) == {(337, 410), (337, 430), (337, 510), (337, 580),
                                      (380, 410), (380, 430), (380, 510), (380, 580),
                                      (380, 640), (460, 580), (460, 600), (460, 620),
                                      (460, 640)}
    assert sub.row_keys == fm.row_keys


def test_select_identity_and_unknown():
    fm = from_dataset(synthesize_dataset(SynthConfig(counts={NS: 2})))
    assert select_columns(fm, fm.column_labels) == fm
    with pytest.raises(ValidationError):
        select_columns(fm, [(500, 500)])


def test_concatenate_labels():
    fm = fm_from([[1.0, 2.0]], [(337, 400), (337, 405)])
    cat = concatenate([fm, fm], ["a", "b"])
    assert cat.column_labels == (("a", 337, 400), ("a", 337, 405),
                                 ("b", 337, 400), ("b", 337, 405))


def test_feature_matrix_shape_validation():
    with pytest.raises(ValidationError):
        FeatureMatrix(np.zeros((2, 3)), ((1, 1),) * 2, (("p", "s", NS),) * 2)


def test_feature_matrix_csv_round_trip(tmp_path):
    ds = synthesize_dataset(SynthConfig(counts={NS: 4, Histology.HighGradeSIL: 2}))
    for fm in (normalize(ds), mean_scale(normalize(ds)),
               concatenate([normalize(ds), normalize(ds)], ["n", "m"])):
        save_feature_matrix(fm, tmp_path / "f.csv")
        text = (tmp_path / "f.csv").read_text()
        assert text.startswith(f"# preprocessing_tag={fm.preprocessing_tag}\n")
        assert load_feature_matrix(tmp_path / "f.csv") == fm
