"""Synthesize the canonical train/test cohorts and walk through pre-processing.

Run:  python3 demos/01_spectra_and_preprocessing.py
"""
import numpy as np

from cervispec.preprocess import mean_scale, normalize
from cervispec.spectra import Histology, canonical_datasets

train, test = canonical_datasets(42)
print(f"grid: {train.grid.n_pairs} (excitation, emission) pairs")
for name, ds in (("train", train), ("test", test)):
    counts = {h.short: 0 for h in Histology}
    for s in ds.samples:
        counts[s.histology.short] += 1
    print(f"{name:5s} {len(ds.samples):3d} spectra, {len(set(ds.patient_ids()))} patients: {counts}")

# peak normalization: each excitation block tops out at exactly 1
norm = normalize(train)
ex = np.array([lab[0] for lab in norm.column_labels])
peaks = [norm.values[:, ex == e].max(axis=1) for e in np.unique(ex)]
print("per-excitation maxima all 1:", bool(np.all(np.concatenate(peaks) == 1.0)))

# mean scaling removes the per-patient level
scaled = mean_scale(norm, "per_patient")
pid = np.array([k[0] for k in scaled.row_keys])
first = pid[0]
print(f"patient {first}: mean of scaled rows = "
      f"{scaled.values[pid == first].mean(axis=0).max():.3f} (max over columns)")

# class means at the brightest pair separate the classes by integrated intensity
X = train.intensity_matrix()
hs = np.array([s.histology.short for s in train.samples])
col = X.mean(axis=0).argmax()
for h in ("NS", "NC", "LG", "HG", "Infl"):
    if np.any(hs == h):
        print(f"  mean raw intensity at brightest pair, {h:4s}: {X[hs == h, col].mean():.3f}")
