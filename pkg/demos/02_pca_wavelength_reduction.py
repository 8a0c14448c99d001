"""PCA on normalized spectra, t-test component selection and loading-based
wavelength reduction for the NS-vs-SIL problem.

Run:  python3 demos/02_pca_wavelength_reduction.py
"""
from cervispec import dimred
from cervispec.pipeline import two_class_rows
from cervispec.preprocess import normalize
from cervispec.spectra import Histology, canonical_datasets

train, _ = canonical_datasets(42)
fm = two_class_rows(normalize(train), Histology.NormalSquamous)
print(f"NS vs SIL training matrix: {fm.shape}")

k = min(fm.shape[0] - 1, fm.shape[1])
model = dimred.fit_pca(fm, k)
ratio = model.eigenvalues / model.total_variance
print("variance explained by PC1..PC5:", " ".join(f"{r:.3f}" for r in ratio[:5]))

scores = dimred.project(model, fm)
sel = dimred.select_components(scores, fm.targets(), alpha=0.05)
best = sorted(sel.indices, key=lambda j: sel.p_values[j])[:3]
print(f"{len(sel.indices)} PCs significant at alpha=0.05; three smallest p:",
      ", ".join(f"PC{j + 1} (p={sel.p_values[j]:.1e})" for j in best))

top3 = dimred.ComponentSelection(tuple(sorted(best)), sel.p_values, sel.t_statistics, 0.05)
loadings = dimred.component_loadings(model, fm, top3)
pairs = dimred.reduce_wavelengths(loadings, top_k=13)
print("13 pairs most correlated with those PCs:", pairs)
print("fixed reduced set used downstream:      ", list(dimred.REDUCED_PAIRS_ALGO1))
# the synthetic bands differ from real tissue, so the data-driven picks need not match
print("overlap:", len(set(pairs) & set(dimred.REDUCED_PAIRS_ALGO1)), "of 13")
