"""Spectral pre-processing: normalization and mean-scaling.

Both operations produce a :class:`FeatureMatrix`, a row-per-sample table
that remembers where each column came from (a wavelength pair, a principal
component, or a tagged pair when feature sets are concatenated).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .spectra import Dataset, Histology

TAGS = ("raw", "normalized", "normalized_mean_scaled", "concatenated", "scores")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    column_labels: tuple
    row_keys: tuple
    preprocessing_tag: str = "raw"

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, ndmin=2)
        if vals.size == 0:
            vals = vals.reshape(len(self.row_keys), len(self.column_labels))
        labels = tuple(self.column_labels)
        keys = tuple((str(p), str(s), Histology(h)) for p, s, h in self.row_keys)
        if vals.shape != (len(keys), len(labels)):
            raise ValidationError(
                f"values shape {vals.shape} does not match "
                f"{len(keys)} row keys x {len(labels)} column labels")
        if self.preprocessing_tag not in TAGS:
            raise ValidationError(f"unknown preprocessing tag {self.preprocessing_tag!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "column_labels", labels)
        object.__setattr__(self, "row_keys", keys)

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (self.column_labels == other.column_labels and self.row_keys == other.row_keys
                and self.preprocessing_tag == other.preprocessing_tag
                and np.array_equal(self.values, other.values))

    def histologies(self) -> list:
        return [k[2] for k in self.row_keys]

    def targets(self) -> np.ndarray:
        return np.array([int(k[2].is_sil) for k in self.row_keys], dtype=int)

    def patient_ids(self) -> list:
        return [k[0] for k in self.row_keys]

    def rows(self, mask_or_index) -> "FeatureMatrix":
        idx = np.arange(len(self.row_keys))[mask_or_index]
        return FeatureMatrix(self.values[idx], self.column_labels,
                             tuple(self.row_keys[i] for i in idx), self.preprocessing_tag)

    def with_values(self, values, column_labels=None, tag=None) -> "FeatureMatrix":
        return FeatureMatrix(values,
                             self.column_labels if column_labels is None else column_labels,
                             self.row_keys, tag or self.preprocessing_tag)


def from_dataset(ds: Dataset) -> FeatureMatrix:
    keys = tuple((s.patient_id, s.site_id, s.histology) for s in ds.samples)
    return FeatureMatrix(ds.intensity_matrix(), tuple(ds.grid.pairs()), keys, "raw")


def _excitation_blocks(labels) -> dict:
    blocks = {}
    for j, lab in enumerate(labels):
        if not (isinstance(lab, tuple) and len(lab) == 2):
            raise ValidationError(f"column {lab!r} is not a wavelength pair")
        blocks.setdefault(lab[0], []).append(j)
    return blocks


def normalize(data, policy: str = "peak", granularity: str = "per_excitation") -> FeatureMatrix:
    """Scale each spectrum so its peak (or area) within each excitation block is 1.

    ``data`` may be a Dataset or a wavelength-pair FeatureMatrix.  With
    ``granularity="global"`` the whole 160-pair vector is scaled at once.
    """
    fm = from_dataset(data) if isinstance(data, Dataset) else data
    if policy not in ("peak", "area"):
        raise ValidationError(f"unknown normalization policy {policy!r}")
    if granularity == "per_excitation":
        blocks = _excitation_blocks(fm.column_labels)
    elif granularity == "global":
        blocks = {"all": list(range(len(fm.column_labels)))}
    else:
        raise ValidationError(f"unknown normalization granularity {granularity!r}")
    X = fm.values
    if not np.all(np.isfinite(X)):
        raise ValidationError("non-finite intensity in input")
    out = np.empty_like(X)
    for ex, cols in blocks.items():
        block = X[:, cols]
        ref = block.max(axis=1) if policy == "peak" else block.sum(axis=1)
        bad = np.flatnonzero(~(ref > 0))
        if bad.size:
            key = fm.row_keys[bad[0]]
            raise ValidationError(
                f"sample {key[0]}/{key[1]} has an all-zero block at excitation {ex}; "
                "normalization undefined")
        out[:, cols] = block / ref[:, None]
    return fm.with_values(out, tag="normalized")


def mean_scale(fm: FeatureMatrix, reference: str = "per_patient",
               reference_mean=None) -> FeatureMatrix:
    """Subtract a reference mean spectrum from each normalized row.

    ``per_patient`` subtracts the mean over the same patient's sites, so a
    patient with a single site maps to a zero row.  ``global_mean`` subtracts
    ``reference_mean`` (defaults to the mean of ``fm`` itself).
    """
    if fm.preprocessing_tag != "normalized":
        raise ValidationError(
            f"mean_scale expects a normalized matrix, got {fm.preprocessing_tag!r}")
    X = fm.values
    out = np.empty_like(X)
    if reference == "per_patient":
        pids = np.array(fm.patient_ids(), dtype=object)
        for p in dict.fromkeys(pids):
            rows = pids == p
            out[rows] = X[rows] - X[rows].mean(axis=0)
    elif reference == "global_mean":
        mu = X.mean(axis=0) if reference_mean is None else np.asarray(reference_mean, float)
        out = X - mu
    else:
        raise ValidationError(f"unknown mean-scaling reference {reference!r}")
    return fm.with_values(out, tag="normalized_mean_scaled")


def select_columns(fm: FeatureMatrix, pairs) -> FeatureMatrix:
    """Column subset in the order given by ``pairs``."""
    index = {lab: j for j, lab in enumerate(fm.column_labels)}
    cols = []
    for p in pairs:
        key = tuple(p) if isinstance(p, (list, tuple)) else p
        if key not in index:
            raise ValidationError(f"unknown column {key!r}")
        cols.append(index[key])
    return fm.with_values(fm.values[:, cols], tuple(fm.column_labels[j] for j in cols))


def concatenate(parts, prefixes) -> FeatureMatrix:
    """Stack matrices side by side; each label becomes ``(prefix, *label)``."""
    keys = parts[0].row_keys
    for p in parts[1:]:
        if p.row_keys != keys:
            raise ValidationError("cannot concatenate matrices with different rows")
    labels = []
    for p, pre in zip(parts, prefixes):
        for lab in p.column_labels:
            labels.append((pre,) + (lab if isinstance(lab, tuple) else (lab,)))
    return FeatureMatrix(np.hstack([p.values for p in parts]), tuple(labels), keys,
                         "concatenated")


# ---------------------------------------------------------------------------
# CSV with provenance header
# ---------------------------------------------------------------------------

def _label_to_str(lab) -> str:
    if isinstance(lab, tuple):
        if len(lab) == 2:
            return f"I_{lab[0]}_{lab[1]}"
        return f"{lab[0]}:" + _label_to_str(tuple(lab[1:]) if len(lab) > 2 else lab[1])
    return str(lab)


def _label_from_str(s: str):
    if ":" in s:
        pre, rest = s.split(":", 1)
        inner = _label_from_str(rest)
        return (pre,) + (inner if isinstance(inner, tuple) else (inner,))
    if s.startswith("I_"):
        _, ex, em = s.split("_")
        return (int(ex), int(em))
    return s


def save_feature_matrix(fm: FeatureMatrix, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# preprocessing_tag={fm.preprocessing_tag}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", "site_id", "histology"]
                   + [_label_to_str(l) for l in fm.column_labels])
        for key, row in zip(fm.row_keys, fm.values):
            w.writerow([key[0], key[1], key[2].value] + [repr(float(v)) for v in row])


def load_feature_matrix(path) -> FeatureMatrix:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# preprocessing_tag="):
            raise ValidationError(f"{path}: missing provenance header line")
        tag = first.split("=", 1)[1]
        reader = csv.reader(fh)
        header = next(reader)
        labels = tuple(_label_from_str(h) for h in header[3:])
        keys, rows = [], []
        for row in reader:
            if row:
                keys.append((row[0], row[1], Histology.parse(row[2])))
                rows.append([float(v) for v in row[3:]])
    values = np.array(rows, dtype=float).reshape(len(rows), len(labels))
    return FeatureMatrix(values, labels, tuple(keys), tag)
