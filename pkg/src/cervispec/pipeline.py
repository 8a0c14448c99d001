"""Composite decision schemes built from the base classifiers.

* constituent algorithm (1): normalized spectra, SIL vs normal squamous;
* constituent algorithm (2): normalized + mean-scaled spectra, SIL vs normal columnar;
* the two-step cascade: (1) first, and only its SIL calls go on to (2);
* the one-step classifier on the 26 concatenated reduced features;
* cost sweeps of the one-step RBF ensemble.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import dimred
from .ensemble import Ensemble, build_ensemble, combine_average, combine_median
from .errors import ValidationError
from .metrics import EvalReport, confusion, sens_spec
from .models import (NON_SIL, PRESETS, SIL, CostPolicy, KernelInit, TrainConfig, classify,
                     predict, sil_score, train_logistic, train_mlp, train_rbf)
from .preprocess import (FeatureMatrix, concatenate, from_dataset, mean_scale, normalize,
                         select_columns)
from .spectra import Dataset, Histology

NS, NC, INFL = Histology.NormalSquamous, Histology.NormalColumnar, Histology.Inflammation

FEATURE_SETS = ("full160", "pcs", "reduced13_algo1", "reduced13_algo2")


@dataclass(frozen=True)
class ConstituentSpec:
    id: str = "algo1"
    preprocessing: str = "normalized"
    feature_set: str = "reduced13_algo1"
    negative_class: Histology = NS
    preset: str = "rbf_algo1"
    n_pcs: int = 3

    def __post_init__(self):
        pairing = {"algo1": ("normalized", NS), "algo2": ("normalized_mean_scaled", NC)}
        if self.id not in pairing:
            raise ValidationError(f"unknown constituent {self.id!r}")
        if (self.preprocessing, self.negative_class) != pairing[self.id]:
            raise ValidationError(
                f"{self.id} must use {pairing[self.id][0]} pre-processing against "
                f"{pairing[self.id][1].value}")
        if self.feature_set not in FEATURE_SETS:
            raise ValidationError(f"unknown feature set {self.feature_set!r}")
        if self.preset not in PRESETS:
            raise ValidationError(f"unknown model preset {self.preset!r}")


ALGO1 = ConstituentSpec()
ALGO2 = ConstituentSpec("algo2", "normalized_mean_scaled", "reduced13_algo2", NC, "rbf_algo2")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything an experiment needs besides the data."""
    rbf_train: TrainConfig = field(default_factory=lambda: TrainConfig(
        learning_rate=1.0, max_epochs=1500, stop_patience=20, min_rel_improvement=1e-4))
    mlp_train: TrainConfig = field(default_factory=lambda: TrainConfig(
        learning_rate=2.0, max_epochs=3000, stop_patience=25, min_rel_improvement=1e-5))
    cost: CostPolicy = field(default_factory=lambda: CostPolicy(sil_cost=2.5))
    pool_size: int = 20
    repetitions: int = 10
    base_seed: int = 0
    alpha: float = 0.05
    mean_scale_reference: str = "per_patient"
    exclude_inflammation_from_test: bool = False
    include_inflammation_in_training: bool = False

    def __post_init__(self):
        if self.pool_size < 1 or self.repetitions < 1:
            raise ValidationError("pool_size and repetitions must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def preprocessed(ds: Dataset, mode: str, reference: str = "per_patient") -> FeatureMatrix:
    fm = normalize(ds)
    if mode == "normalized":
        return fm
    if mode == "normalized_mean_scaled":
        return mean_scale(fm, reference)
    raise ValidationError(f"unknown pre-processing mode {mode!r}")


def build_one_step_features(ds: Dataset, reference: str = "per_patient") -> FeatureMatrix:
    """26 columns: the algorithm (1) pairs normalized, then the algorithm (2)
    pairs normalized and mean-scaled.  Labels are ``(tag, excitation, emission)``."""
    norm = normalize(ds)
    part1 = select_columns(norm, dimred.REDUCED_PAIRS_ALGO1)
    part2 = select_columns(mean_scale(norm, reference), dimred.REDUCED_PAIRS_ALGO2)
    return concatenate([part1, part2], ["normalized", "normalized_mean_scaled"])


class ConstituentFeatures:
    """Feature recipe for one constituent; PCA-based sets are fitted on training data."""

    def __init__(self, spec: ConstituentSpec, alpha: float = 0.05, reference="per_patient"):
        self.spec = spec
        self.alpha = alpha
        self.reference = reference
        self.pca = None
        self.selected = None

    def _base(self, ds):
        return preprocessed(ds, self.spec.preprocessing, self.reference)

    def fit(self, train: FeatureMatrix) -> "ConstituentFeatures":
        if self.spec.feature_set == "pcs":
            k = min(train.shape[0] - 1, train.shape[1])
            self.pca = dimred.fit_pca(train, k)
            scores = dimred.project(self.pca, train)
            sel = dimred.select_components(scores, train.targets(), self.alpha)
            order = sorted(sel.indices, key=lambda j: sel.p_values[j])[:self.spec.n_pcs]
            if not order:
                order = [int(np.argmin(sel.p_values))]
            self.selected = sorted(order)
        return self

    def transform(self, fm: FeatureMatrix) -> FeatureMatrix:
        fs = self.spec.feature_set
        if fs == "full160":
            return fm
        if fs == "reduced13_algo1":
            return select_columns(fm, dimred.REDUCED_PAIRS_ALGO1)
        if fs == "reduced13_algo2":
            return select_columns(fm, dimred.REDUCED_PAIRS_ALGO2)
        if self.pca is None:
            raise ValidationError("PCA feature recipe used before fit()")
        scores = dimred.project(self.pca, fm, max(self.selected) + 1)
        return select_columns(scores, [f"PC{j + 1}" for j in self.selected])

    def full_matrix(self, ds: Dataset) -> FeatureMatrix:
        return self._base(ds)


def _rows_where(fm: FeatureMatrix, keep) -> FeatureMatrix:
    mask = np.array([keep(h) for h in fm.histologies()], dtype=bool)
    return fm.rows(mask)


def two_class_rows(fm: FeatureMatrix, negative: Histology) -> FeatureMatrix:
    return _rows_where(fm, lambda h: h.is_sil or h == negative)


def training_rows(fm: FeatureMatrix, include_inflammation: bool) -> FeatureMatrix:
    return fm if include_inflammation else _rows_where(fm, lambda h: h != INFL)


def trim_groups(histologies) -> np.ndarray:
    """Group label per row for trimming: NS, NC, Infl, or SIL (both grades)."""
    return np.array(["SIL" if Histology(h).is_sil else Histology(h).short for h in histologies])


def trim_training_set(fm: FeatureMatrix, labels=None, seed: int = 0,
                      classes=None) -> FeatureMatrix:
    """Random class-balanced subsample: every class cut to the minority count.

    Used only to place RBF kernels, never to fit weights.  Row order of the
    kept rows follows ``fm``.
    """
    labels = trim_groups(fm.histologies()) if labels is None else np.asarray(labels)
    if len(labels) != fm.shape[0]:
        raise ValidationError("one label per row is required")
    classes = list(dict.fromkeys(labels.tolist())) if classes is None else list(classes)
    if not classes:
        raise ValidationError("cannot trim an empty training set")
    counts = {c: int(np.sum(labels == c)) for c in classes}
    empty = [c for c, n in counts.items() if n == 0]
    if empty:
        raise ValidationError(f"class(es) {empty} absent from training set")
    m = min(counts.values())
    rng = np.random.default_rng(seed)
    keep = []
    for c in sorted(classes, key=str):
        rows = np.flatnonzero(labels == c)
        keep.extend(rng.choice(rows, size=m, replace=False).tolist())
    return fm.rows(np.sort(np.array(keep, dtype=int)))


# ---------------------------------------------------------------------------
# training helpers
# ---------------------------------------------------------------------------

def make_trainer(preset: str, train_fm: FeatureMatrix, cfg: PipelineConfig, cost: CostPolicy,
                 trim_seed: int | None = None):
    """Return ``(train_fn, base TrainConfig)``; ``train_fn(tcfg)`` trains one member."""
    p = PRESETS[preset]
    y = train_fm.targets()
    family = p["family"]
    if family == "logistic":
        tcfg = cfg.rbf_train.with_cost(cost)
        return (lambda t: train_logistic(train_fm, y, t.cost)), tcfg
    if family == "mlp":
        tcfg = cfg.mlp_train.with_cost(cost)
        return (lambda t: train_mlp(t, train_fm, y, p["hidden_units"])), tcfg
    init: KernelInit = p["init"]
    tcfg = cfg.rbf_train.with_cost(cost)
    if init.policy == "kmeans_on_trimmed":
        def fn(t):
            trimmed = trim_training_set(train_fm, seed=t.seed if trim_seed is None else trim_seed)
            return train_rbf(t, train_fm, y, replace(init, init_points=trimmed.values))
        return fn, tcfg
    return (lambda t: train_rbf(t, train_fm, y, init)), tcfg


def _metrics(pred, truth):
    return sens_spec(confusion(pred, truth))


@dataclass
class PoolRun:
    """Test-set outputs of R pools of N members: shape (R, N, n_test, 2)."""
    outputs: np.ndarray
    seeds: list
    ensembles: list = field(default_factory=list, repr=False)

    def combined(self, combiner: str) -> np.ndarray:
        f = combine_average if combiner == "average" else combine_median
        return np.stack([f(o) for o in self.outputs])


def _run_pools(train_fn, tcfg, X_test, cfg: PipelineConfig, keep_models=False) -> PoolRun:
    outs, seeds, ens = [], [], []
    for r in range(cfg.repetitions):
        e = build_ensemble(train_fn, tcfg, cfg.pool_size, cfg.base_seed + r * cfg.pool_size)
        outs.append(e.member_outputs(X_test))
        seeds.append(list(e.member_seeds))
        if keep_models:
            ens.append(e)
    return PoolRun(np.stack(outs), seeds, ens)


def _reports(run: PoolRun, truth, cost: CostPolicy, method: str, echo: dict) -> list:
    th = cost.decision_threshold
    # "single" is the first member of each pool: one independent classifier per repetition
    single_s, single_p = [], []
    for rep in run.outputs:
        s, p = _metrics((sil_score(rep[0]) >= th).astype(int), truth)
        single_s.append(s)
        single_p.append(p)
    reports = [EvalReport(method, "single", cost.sil_cost, single_s, single_p, echo)]
    for comb in ("average", "median"):
        ss, pp = [], []
        for o in run.combined(comb):
            s, p = _metrics((sil_score(o) >= th).astype(int), truth)
            ss.append(s)
            pp.append(p)
        reports.append(EvalReport(method, comb, cost.sil_cost, ss, pp, echo))
    return reports


def _echo(cfg: PipelineConfig, cost: CostPolicy, **extra) -> dict:
    d = cfg.to_dict()
    d["cost"] = asdict(cost)
    d.update(extra)
    return d


def _test_rows(fm: FeatureMatrix, cfg: PipelineConfig) -> FeatureMatrix:
    if cfg.exclude_inflammation_from_test:
        return _rows_where(fm, lambda h: h != INFL)
    return fm


# ---------------------------------------------------------------------------
# constituent algorithms
# ---------------------------------------------------------------------------

def fit_constituent(spec: ConstituentSpec, train: Dataset, cfg: PipelineConfig,
                    cost: CostPolicy | None = None):
    """Feature recipe and (train_fn, TrainConfig) for one constituent."""
    cost = cost or cfg.cost
    recipe = ConstituentFeatures(spec, cfg.alpha, cfg.mean_scale_reference)
    base = two_class_rows(recipe.full_matrix(train), spec.negative_class)
    recipe.fit(base)
    fm = recipe.transform(base)
    train_fn, tcfg = make_trainer(spec.preset, fm, cfg, cost)
    return recipe, fm, train_fn, tcfg


def run_constituent(spec: ConstituentSpec, train: Dataset, test: Dataset,
                    cfg: PipelineConfig, cost: CostPolicy | None = None) -> list:
    """Evaluate one constituent on its own two-class test problem."""
    cost = cost or cfg.cost
    recipe, _, train_fn, tcfg = fit_constituent(spec, train, cfg, cost)
    test_fm = recipe.transform(two_class_rows(recipe.full_matrix(test), spec.negative_class))
    run = _run_pools(train_fn, tcfg, test_fm.values, cfg)
    label = f"{spec.id}-{PRESETS[spec.preset]['family']}"
    return _reports(run, test_fm.targets(), cost, label,
                    _echo(cfg, cost, constituent=asdict(spec), seeds=run.seeds))


# ---------------------------------------------------------------------------
# two-step cascade
# ---------------------------------------------------------------------------

@dataclass
class TwoStepClassifier:
    step1: object
    step2: object
    cost1: CostPolicy = field(default_factory=CostPolicy)
    cost2: CostPolicy = field(default_factory=CostPolicy)


def two_step_classify(ts: TwoStepClassifier, x1, x2) -> str:
    """Step 1 sees ``x1``; only if it says SIL does step 2 see ``x2`` and decide."""
    if classify(ts.step1, x1, ts.cost1)[0] == NON_SIL:
        return NON_SIL
    return classify(ts.step2, x2, ts.cost2)[0]


def two_step_predict(ts: TwoStepClassifier, X1, X2) -> np.ndarray:
    """Vectorised cascade; step 2 is evaluated on step-1 positives only."""
    first, _ = predict(ts.step1, X1, ts.cost1)
    out = np.zeros(len(first), dtype=int)
    pos = np.flatnonzero(first == 1)
    if pos.size:
        second, _ = predict(ts.step2, np.asarray(X2)[pos], ts.cost2)
        out[pos] = second
    return out


def run_two_step(train: Dataset, test: Dataset, cfg: PipelineConfig,
                 spec1: ConstituentSpec = ALGO1, spec2: ConstituentSpec = ALGO2,
                 cost1: CostPolicy | None = None, cost2: CostPolicy | None = None) -> list:
    """Each step is its own pool; reports single (first member of each step), ave and med."""
    cost1 = cost1 or cfg.cost
    cost2 = cost2 or CostPolicy()
    r1, _, fn1, t1 = fit_constituent(spec1, train, cfg, cost1)
    r2, _, fn2, t2 = fit_constituent(spec2, train, cfg, cost2)
    full1 = _test_rows(r1.full_matrix(test), cfg)
    full2 = _test_rows(r2.full_matrix(test), cfg)
    X1, X2 = r1.transform(full1).values, r2.transform(full2).values
    truth = full1.targets()
    run1 = _run_pools(fn1, t1, X1, cfg)
    run2 = _run_pools(fn2, t2, X2, cfg)

    def cascade(o1, o2):
        a = sil_score(o1) >= cost1.decision_threshold
        b = sil_score(o2) >= cost2.decision_threshold
        return (a & b).astype(int)

    echo = _echo(cfg, cost1, cost_step2=asdict(cost2), seeds_step1=run1.seeds,
                 seeds_step2=run2.seeds)
    reports = []
    ss, pp = [], []
    for rep1, rep2 in zip(run1.outputs, run2.outputs):
        s, p = _metrics(cascade(rep1[0], rep2[0]), truth)
        ss.append(s)
        pp.append(p)
    reports.append(EvalReport("two-step", "single", cost1.sil_cost, ss, pp, echo))
    for comb in ("average", "median"):
        ss, pp = [], []
        for o1, o2 in zip(run1.combined(comb), run2.combined(comb)):
            s, p = _metrics(cascade(o1, o2), truth)
            ss.append(s)
            pp.append(p)
        reports.append(EvalReport("two-step", comb, cost1.sil_cost, ss, pp, echo))
    return reports


# ---------------------------------------------------------------------------
# one-step classifier
# ---------------------------------------------------------------------------

@dataclass
class OneStepClassifier:
    ensemble: Ensemble
    reference: str = "per_patient"

    def __post_init__(self):
        if self.ensemble.input_dim != 26:
            raise ValidationError(f"one-step input must be 26-dimensional, "
                                  f"got {self.ensemble.input_dim}")

    def predict(self, ds: Dataset, cost: CostPolicy | None = None):
        return predict(self.ensemble, build_one_step_features(ds, self.reference), cost)


def one_step_trainer(train: Dataset, cfg: PipelineConfig, cost: CostPolicy,
                     family: str = "rbf"):
    fm = training_rows(build_one_step_features(train, cfg.mean_scale_reference),
                       cfg.include_inflammation_in_training)
    preset = {"rbf": "rbf_one_step", "mlp": "mlp_reduced"}[family]
    return make_trainer(preset, fm, cfg, cost)


def fit_one_step(train: Dataset, cfg: PipelineConfig, cost: CostPolicy | None = None,
                 combiner: str = "average", seed: int | None = None) -> OneStepClassifier:
    cost = cost or cfg.cost
    fn, tcfg = one_step_trainer(train, cfg, cost)
    e = build_ensemble(fn, tcfg, cfg.pool_size, cfg.base_seed if seed is None else seed,
                       combiner)
    return OneStepClassifier(e, cfg.mean_scale_reference)


def run_one_step(cfg: PipelineConfig, train: Dataset, test: Dataset,
                 cost: CostPolicy | None = None, family: str = "rbf") -> list:
    """R repetitions of N-member pools; reports single, average and median.

    ``family="mixed"`` pools N/2 RBFs with N/2 MLPs (members ordered by seed).
    """
    cost = cost or cfg.cost
    test_fm = _test_rows(build_one_step_features(test, cfg.mean_scale_reference), cfg)
    if family == "mixed":
        half = replace(cfg, pool_size=max(cfg.pool_size // 2, 1))
        fa, ta = one_step_trainer(train, cfg, cost, "rbf")
        fb, tb = one_step_trainer(train, cfg, cost, "mlp")
        ra = _run_pools(fa, ta, test_fm.values, half)
        rb = _run_pools(fb, tb, test_fm.values, half)
        run = PoolRun(np.concatenate([ra.outputs, rb.outputs], axis=1),
                      [a + b for a, b in zip(ra.seeds, rb.seeds)])
    else:
        fn, tcfg = one_step_trainer(train, cfg, cost, family)
        run = _run_pools(fn, tcfg, test_fm.values, cfg)
    return _reports(run, test_fm.targets(), cost, f"one-step-{family}",
                    _echo(cfg, cost, family=family, seeds=run.seeds))


def cost_sweep(cfg: PipelineConfig, train: Dataset, test: Dataset, costs,
               family: str = "rbf") -> list:
    """One-step evaluation per SIL cost; rows sorted by cost (stable for duplicates)."""
    costs = [float(c) for c in costs]
    if not costs:
        raise ValidationError("cost list is empty")
    if any(not c > 0 for c in costs):
        raise ValidationError("costs must be > 0")
    out = []
    for c in sorted(costs):
        out.extend(run_one_step(cfg, train, test, replace(cfg.cost, sil_cost=c), family))
    return out
