"""PCA, t-test component selection and loading-based wavelength reduction."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import ValidationError
from .preprocess import FeatureMatrix, _label_from_str, _label_to_str

#: Reduced 13-pair set for constituent algorithm (1) (normalized spectra).
REDUCED_PAIRS_ALGO1 = (
    (337, 410), (337, 430), (337, 510), (337, 580),
    (380, 410), (380, 430), (380, 510), (380, 580), (380, 640),
    (460, 580), (460, 600), (460, 620), (460, 640),
)
#: Reduced 13-pair set for constituent algorithm (2) (normalized, mean-scaled).
REDUCED_PAIRS_ALGO2 = (
    (337, 410), (337, 430), (337, 510), (337, 580),
    (380, 410), (380, 430), (380, 510), (380, 580), (380, 600),
    (460, 580), (460, 600), (460, 620), (460, 660),
)


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean_vector: np.ndarray
    components: np.ndarray          # (features, k), columns are eigenvectors
    eigenvalues: np.ndarray         # (k,), descending
    total_variance: float
    feature_labels: tuple = ()

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance <= 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / self.total_variance


@dataclass(frozen=True, eq=False)
class ComponentSelection:
    indices: tuple          # 0-based PC indices
    p_values: np.ndarray
    t_statistics: np.ndarray
    alpha: float


@dataclass(frozen=True, eq=False)
class LoadingMatrix:
    values: np.ndarray      # (features, selected components)
    feature_labels: tuple
    component_indices: tuple


def fit_pca(fm: FeatureMatrix, n_components: int | None = None,
            rank_tol: float = 1e-12) -> PcaModel:
    """Eigendecomposition of the sample covariance of the mean-centered columns.

    Each eigenvector is signed so that its entry of largest magnitude is
    positive.  Components whose eigenvalue is numerically zero are dropped
    with a warning.
    """
    X = np.asarray(fm.values, dtype=float)
    n, p = X.shape
    if n < 2:
        raise ValidationError("PCA needs at least 2 rows")
    limit = min(n - 1, p)
    if n_components is None:
        n_components = limit
    if not 0 <= n_components <= limit:
        raise ValidationError(f"n_components must be in [0, {limit}], got {n_components}")
    mu = X.mean(axis=0)
    Xc = X - mu
    cov = Xc.T @ Xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = float(np.trace(cov))

    scale = max(evals[0], 0.0) if evals.size else 0.0
    rank = int(np.sum(evals > rank_tol * max(scale, 1e-300)))
    if rank < n_components:
        warnings.warn(f"data rank {rank} is below requested {n_components} components; "
                      f"returning {rank}", RuntimeWarning, stacklevel=2)
        n_components = rank
    V = evecs[:, :n_components].copy()
    for j in range(n_components):
        if V[np.argmax(np.abs(V[:, j])), j] < 0:
            V[:, j] = -V[:, j]
    return PcaModel(mu, V, evals[:n_components].copy(), total, tuple(fm.column_labels))


def project(model: PcaModel, fm: FeatureMatrix, k: int | None = None) -> FeatureMatrix:
    """Scores of ``fm`` on the first ``k`` components, columns ``PC1..PCk``."""
    k = model.n_components if k is None else k
    if not 0 <= k <= model.n_components:
        raise ValidationError(f"k must be in [0, {model.n_components}], got {k}")
    if fm.values.shape[1] != model.mean_vector.shape[0]:
        raise ValidationError(f"dimension mismatch: matrix has {fm.values.shape[1]} columns, "
                              f"model expects {model.mean_vector.shape[0]}")
    if model.feature_labels and tuple(fm.column_labels) != model.feature_labels:
        raise ValidationError("column labels differ from the ones the PCA was fitted on")
    scores = (fm.values - model.mean_vector) @ model.components[:, :k]
    return FeatureMatrix(scores, tuple(f"PC{j + 1}" for j in range(k)), fm.row_keys, "scores")


def reconstruct(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, float)
    return scores @ model.components[:, :scores.shape[1]].T + model.mean_vector


def pooled_t(a: np.ndarray, b: np.ndarray):
    """Unpaired two-sample t statistic with pooled variance, and its d.o.f."""
    na, nb = len(a), len(b)
    df = na + nb - 2
    sp2 = ((na - 1) * np.var(a, ddof=1) + (nb - 1) * np.var(b, ddof=1)) / df
    diff = np.mean(a) - np.mean(b)
    se = np.sqrt(sp2 * (1.0 / na + 1.0 / nb))
    if se == 0:
        return (0.0 if diff == 0 else np.copysign(np.inf, diff)), df
    return diff / se, df


def select_components(scores: FeatureMatrix, labels, alpha: float = 0.05) -> ComponentSelection:
    """Keep PCs whose SIL vs non-SIL score means differ at one-sided level ``alpha``.

    The one-sided alternative points in the direction of the observed mean
    difference, so ``p = P(T >= |t|)``.
    """
    y = np.asarray(labels).astype(int)
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    S = np.asarray(scores.values if isinstance(scores, FeatureMatrix) else scores, float)
    pos, neg = S[y == 1], S[y == 0]
    if len(pos) < 2 or len(neg) < 2:
        raise ValidationError("each class needs at least 2 samples for the t-test")
    ts, ps = [], []
    for j in range(S.shape[1]):
        t, df = pooled_t(pos[:, j], neg[:, j])
        ts.append(t)
        ps.append(float(stats.t.sf(abs(t), df)))
    ps = np.array(ps)
    chosen = tuple(int(j) for j in np.flatnonzero(ps < alpha))
    return ComponentSelection(chosen, ps, np.array(ts), alpha)


def _pearson_columns(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    Ac = A - A.mean(axis=0)
    Bc = B - B.mean(axis=0)
    na = np.sqrt((Ac ** 2).sum(axis=0))
    nb = np.sqrt((Bc ** 2).sum(axis=0))
    num = Ac.T @ Bc
    den = np.outer(na, nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return np.clip(r, -1.0, 1.0), na


def component_loadings(model: PcaModel, fm: FeatureMatrix,
                       selection: ComponentSelection) -> LoadingMatrix:
    """Pearson correlation of every feature column with every selected PC's scores."""
    if not selection.indices:
        raise ValidationError("no components selected")
    k = max(selection.indices) + 1
    scores = project(model, fm, k).values[:, list(selection.indices)]
    X = np.asarray(fm.values, float)
    r, norms = _pearson_columns(X, scores)
    flat = np.flatnonzero(norms == 0)
    if flat.size:
        warnings.warn(f"{flat.size} zero-variance feature column(s); loading set to 0",
                      RuntimeWarning, stacklevel=2)
    return LoadingMatrix(r, tuple(fm.column_labels), tuple(selection.indices))


def reduce_wavelengths(loadings: LoadingMatrix, threshold: float | None = None,
                       top_k: int | None = None) -> list:
    """Pairs most strongly correlated with the selected PCs, sorted ascending.

    Strength is the largest absolute loading over the selected PCs.  With
    ``threshold`` every pair whose strength is >= threshold is kept; with
    ``top_k`` the k strongest, ties broken by (excitation, emission).
    """
    if (threshold is None) == (top_k is None):
        raise ValidationError("give exactly one of threshold / top_k")
    strength = np.abs(loadings.values).max(axis=1)
    labels = list(loadings.feature_labels)
    if threshold is not None:
        if not 0.0 <= threshold <= 1.0:
            raise ValidationError(f"threshold must lie in [0, 1], got {threshold}")
        keep = [labels[i] for i in range(len(labels)) if strength[i] >= threshold]
    else:
        if not 0 <= top_k <= len(labels):
            raise ValidationError(f"top_k must be in [0, {len(labels)}], got {top_k}")
        order = sorted(range(len(labels)), key=lambda i: (-strength[i], labels[i]))
        keep = [labels[i] for i in order[:top_k]]
    return sorted(keep)


# ---------------------------------------------------------------------------
# CSV with header metadata
# ---------------------------------------------------------------------------

def save_pca(model: PcaModel, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("# pca_model version=1\n")
        fh.write(f"# total_variance={model.total_variance!r}\n")
        fh.write("# eigenvalues=" + " ".join(repr(float(v)) for v in model.eigenvalues) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "mean"] + [f"PC{j + 1}" for j in range(model.n_components)])
        labels = model.feature_labels or tuple(f"f{i}" for i in range(len(model.mean_vector)))
        for i, lab in enumerate(labels):
            w.writerow([_label_to_str(lab), repr(float(model.mean_vector[i]))]
                       + [repr(float(v)) for v in model.components[i]])


def load_pca(path) -> PcaModel:
    meta = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            if "=" in line:
                k, v = line[1:].strip().split("=", 1)
                meta[k] = v
        elif line:
            body.append(line)
    rows = list(csv.reader(body))[1:]
    labels = tuple(_label_from_str(r[0]) for r in rows)
    mu = np.array([float(r[1]) for r in rows])
    comps = np.array([[float(v) for v in r[2:]] for r in rows]).reshape(len(rows), -1)
    evals = np.array([float(v) for v in meta.get("eigenvalues", "").split()])
    return PcaModel(mu, comps, evals, float(meta["total_variance"]), labels)


def save_loadings(lm: LoadingMatrix, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("# loading_matrix version=1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature"] + [f"PC{j + 1}" for j in lm.component_indices])
        for lab, row in zip(lm.feature_labels, lm.values):
            w.writerow([_label_to_str(lab)] + [repr(float(v)) for v in row])


def load_loadings(path) -> LoadingMatrix:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        body = [l for l in fh.read().splitlines() if l and not l.startswith("#")]
    rows = list(csv.reader(body))
    comps = tuple(int(h[2:]) - 1 for h in rows[0][1:])
    labels = tuple(_label_from_str(r[0]) for r in rows[1:])
    vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).reshape(len(labels), -1)
    return LoadingMatrix(vals, labels, comps)
