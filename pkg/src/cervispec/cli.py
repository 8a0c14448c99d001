"""Command-line front end.

Subcommands::

    generate            write synthetic train/test CSVs and their generator configs
    preprocess          normalize (and optionally mean-scale) a dataset CSV
    reduce-wavelengths  PCA + t-test + loadings on a training CSV; print pairs
    run                 one experiment; writes report.csv, report.txt, manifest.txt
    sweep               one-step cost sweep; writes sweep.csv and tradeoff curves
    report              pretty-print a report CSV with the literature rows

Every experiment key can be set in a flat ``key = value`` config file
(``--config``), by its own flag (``--pool-size 20``) or by ``--set key=value``.
The written manifest is itself a valid config and reproduces the run.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys
import traceback
import warnings
from dataclasses import replace
from pathlib import Path

from . import dimred, metrics, pipeline, preprocess
from .errors import TrainingDivergence, ValidationError
from .models import CostPolicy, TrainConfig
from .spectra import (TEST_COUNTS, TRAIN_COUNTS, Dataset, SynthConfig, load_dataset,
                      parse_key_values, save_dataset, synthesize_dataset)

OUTPUT_ROOT_ENV = "CERVISPEC_OUTPUT_ROOT"
CONFIG_VERSION = 1

#: Experiment keys with defaults; the order here is the manifest order.
DEFAULTS = {
    "dataset": "synthetic",
    "train_path": "",
    "test_path": "",
    "synth_seed": "42",
    "synth_config": "",
    "pipeline": "one-step",
    "family": "rbf",
    "feature_set": "reduced13",
    "n_pcs": "3",
    "alpha": "0.05",
    "costs": "2.5",
    "normal_cost": "1",
    "decision_threshold": "0.5",
    "step2_sil_cost": "1",
    "step2_normal_cost": "1",
    "combiners": "ave,med",
    "pool_size": "20",
    "repetitions": "10",
    "base_seed": "0",
    "mean_scale_reference": "per_patient",
    "exclude_inflammation_from_test": "false",
    "include_inflammation_in_training": "false",
    "rbf.learning_rate": "1.0",
    "rbf.max_epochs": "1500",
    "rbf.stop_patience": "20",
    "rbf.min_rel_improvement": "0.0001",
    "mlp.learning_rate": "2.0",
    "mlp.max_epochs": "3000",
    "mlp.stop_patience": "25",
    "mlp.min_rel_improvement": "1e-05",
}

PIPELINES = ("one-step", "two-step", "constituent1", "constituent2")


def _bool(v: str) -> bool:
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {v!r}")


def _costs(v: str) -> list:
    try:
        out = [float(x) for x in v.replace(" ", "").split(",") if x]
    except ValueError:
        raise ValidationError(f"bad cost list {v!r}") from None
    if not out or any(c <= 0 for c in out):
        raise ValidationError(f"costs must be a non-empty list of positive numbers, got {v!r}")
    return out


class ExperimentConfig:
    """Flat string key-value experiment description with typed accessors."""

    def __init__(self, values: dict | None = None):
        self.values = dict(DEFAULTS)
        if values:
            self.update(values)

    def update(self, values: dict):
        for k, v in values.items():
            if k == "format_version":
                if int(v) != CONFIG_VERSION:
                    raise ValidationError(f"unsupported config version {v}")
                continue
            if k not in DEFAULTS:
                raise ValidationError(f"unknown config key {k!r}")
            self.values[k] = str(v).strip()

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        if not p.exists():
            raise ValidationError(f"config file {p} does not exist")
        return cls(parse_key_values(p.read_text(encoding="utf-8")))

    def to_text(self, extra_comments=()) -> str:
        lines = ["# experiment manifest", f"format_version = {CONFIG_VERSION}"]
        lines += [f"{k} = {v}" for k, v in self.values.items()]
        lines += [f"# {c}" for c in extra_comments]
        return "\n".join(lines) + "\n"

    def __getitem__(self, k):
        return self.values[k]

    def validate(self):
        v = self.values
        if v["dataset"] not in ("synthetic", "file"):
            raise ValidationError("dataset must be 'synthetic' or 'file'")
        if v["dataset"] == "file":
            for k in ("train_path", "test_path"):
                if not v[k] or not Path(v[k]).exists():
                    raise ValidationError(f"{k} {v[k]!r} does not exist")
        if v["synth_config"] and not Path(v["synth_config"]).exists():
            raise ValidationError(f"synth_config {v['synth_config']!r} does not exist")
        if v["pipeline"] not in PIPELINES:
            raise ValidationError(f"pipeline must be one of {PIPELINES}")
        if int(v["pool_size"]) < 1 or int(v["repetitions"]) < 1:
            raise ValidationError("pool_size and repetitions must be >= 1")
        _costs(v["costs"])
        self.combiners()
        self.pipeline_config()

    def combiners(self) -> list:
        from .ensemble import combiner_name
        names = [c for c in self.values["combiners"].replace(" ", "").split(",") if c]
        if not names:
            raise ValidationError("at least one combiner is required")
        return [combiner_name(c) for c in names]

    def costs(self) -> list:
        return _costs(self.values["costs"])

    def cost_policy(self, sil_cost: float) -> CostPolicy:
        return CostPolicy(sil_cost, float(self["normal_cost"]), float(self["decision_threshold"]))

    def _train(self, prefix) -> TrainConfig:
        return TrainConfig(float(self[f"{prefix}.learning_rate"]), int(self[f"{prefix}.max_epochs"]),
                           int(self[f"{prefix}.stop_patience"]),
                           float(self[f"{prefix}.min_rel_improvement"]))

    def pipeline_config(self) -> pipeline.PipelineConfig:
        try:
            return pipeline.PipelineConfig(
                rbf_train=self._train("rbf"), mlp_train=self._train("mlp"),
                cost=self.cost_policy(self.costs()[0]),
                pool_size=int(self["pool_size"]), repetitions=int(self["repetitions"]),
                base_seed=int(self["base_seed"]), alpha=float(self["alpha"]),
                mean_scale_reference=self["mean_scale_reference"],
                exclude_inflammation_from_test=_bool(self["exclude_inflammation_from_test"]),
                include_inflammation_in_training=_bool(self["include_inflammation_in_training"]))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"bad numeric config value: {exc}") from None


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def synth_configs(seed: int, synth_config: str = ""):
    base = SynthConfig.load(synth_config) if synth_config else SynthConfig()
    train = replace(base, counts=dict(base.counts) if synth_config else dict(TRAIN_COUNTS),
                    seed=seed, id_prefix="P")
    test = replace(base, counts=dict(base.counts) if synth_config else dict(TEST_COUNTS),
                   seed=seed + 1, id_prefix="T")
    return train, test


def load_datasets(cfg: ExperimentConfig):
    if cfg["dataset"] == "file":
        train = load_dataset(cfg["train_path"], split_tag="train")
        test = load_dataset(cfg["test_path"], split_tag="test")
        return train, test
    a, b = synth_configs(int(cfg["synth_seed"]), cfg["synth_config"])
    return (Dataset(a.grid, synthesize_dataset(a).samples, "train"),
            Dataset(b.grid, synthesize_dataset(b).samples, "test"))


def _out_dir(args, command) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / f"cervispec-{command}"
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ValidationError(f"output directory {out} is not writable")
    return out


def _write(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}") from None


def _experiment(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for key in DEFAULTS:
        val = getattr(args, "opt_" + key.replace(".", "_"), None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "which", None):
        overrides["pipeline"] = args.which
    for item in args.set or []:
        if "=" not in item:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    cfg.update(overrides)
    cfg.validate()
    return cfg


def _seed_comments(reports) -> list:
    seen, out = set(), []
    for r in reports:
        for key in ("seeds", "seeds_step1", "seeds_step2"):
            blocks = r.config.get(key)
            if not blocks:
                continue
            text = "; ".join(f"{b[0]}..{b[-1]}" for b in blocks)
            line = f"{key} (per repetition): {text}"
            if line not in seen:
                seen.add(line)
                out.append(line)
    return out


def run_experiment(cfg: ExperimentConfig, costs=None) -> list:
    train, test = load_datasets(cfg)
    pc = cfg.pipeline_config()
    family = cfg["family"]
    reports = []
    for c in (costs or cfg.costs()):
        cost = cfg.cost_policy(c)
        name = cfg["pipeline"]
        if name == "one-step":
            if family not in ("rbf", "mlp", "mixed"):
                raise ValidationError(f"one-step supports families rbf, mlp, mixed; got {family!r}")
            reports += pipeline.run_one_step(pc, train, test, cost, family)
        elif name == "two-step":
            cost2 = CostPolicy(float(cfg["step2_sil_cost"]), float(cfg["step2_normal_cost"]),
                               float(cfg["decision_threshold"]))
            s1, s2 = _constituent_specs(cfg)
            reports += pipeline.run_two_step(train, test, pc, s1, s2, cost, cost2)
        else:
            spec = _constituent_specs(cfg)[0 if name == "constituent1" else 1]
            reports += pipeline.run_constituent(spec, train, test, pc, cost)
    wanted = {"single"} | set(cfg.combiners())
    return [r for r in reports if r.combiner in wanted]


def _constituent_specs(cfg: ExperimentConfig):
    family, fs = cfg["family"], cfg["feature_set"]
    n_pcs = int(cfg["n_pcs"])
    if family not in ("rbf", "mlp", "logistic"):
        raise ValidationError(f"constituent family must be rbf, mlp or logistic; got {family!r}")
    specs = []
    for base in (pipeline.ALGO1, pipeline.ALGO2):
        if fs == "reduced13":
            feature_set = "reduced13_" + base.id
        elif fs in ("pcs", "full160"):
            feature_set = fs
        else:
            raise ValidationError(f"feature_set must be reduced13, pcs or full160; got {fs!r}")
        if family == "logistic":
            preset = "logistic"
        elif family == "mlp":
            preset = "mlp_pcs" if fs == "pcs" else "mlp_reduced"
        else:
            preset = "rbf_pcs" if fs == "pcs" else ("rbf_algo1" if base.id == "algo1"
                                                    else "rbf_algo2")
        specs.append(replace(base, feature_set=feature_set, preset=preset, n_pcs=n_pcs))
    return specs


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    out = _out_dir(args, "generate")
    seed = args.seed if args.seed is not None else 42
    a, b = synth_configs(seed, args.synth_config or "")
    train, test = synthesize_dataset(a), synthesize_dataset(b)
    save_dataset(Dataset(train.grid, train.samples), out / "train.csv")
    save_dataset(Dataset(test.grid, test.samples), out / "test.csv")
    _write(out / "synth_train.cfg", a.to_text())
    _write(out / "synth_test.cfg", b.to_text())
    lines = ["# synthetic dataset manifest", f"seed = {seed}",
             f"train_seed = {a.seed}", f"test_seed = {b.seed}"]
    for name, ds in (("train", train), ("test", test)):
        lines += [f"{name}.count.{h.value} = {n}" for h, n in ds.tally().items()]
    _write(out / "manifest.txt", "\n".join(lines) + "\n")
    print(f"wrote {len(train)} training and {len(test)} test samples to {out}")
    return 0


def cmd_preprocess(args) -> int:
    ds = load_dataset(args.input)
    fm = pipeline.preprocessed(ds, args.mode, args.reference)
    if args.pairs != "all":
        pairs = dimred.REDUCED_PAIRS_ALGO1 if args.pairs == "algo1" else dimred.REDUCED_PAIRS_ALGO2
        fm = preprocess.select_columns(fm, pairs)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    preprocess.save_feature_matrix(fm, out)
    print(f"wrote {fm.shape[0]}x{fm.shape[1]} {fm.preprocessing_tag} matrix to {out}")
    return 0


def cmd_reduce(args) -> int:
    ds = load_dataset(args.input)
    spec = pipeline.ALGO1 if args.constituent == "algo1" else pipeline.ALGO2
    fm = pipeline.two_class_rows(pipeline.preprocessed(ds, spec.preprocessing),
                                 spec.negative_class)
    model = dimred.fit_pca(fm, min(fm.shape[0] - 1, fm.shape[1]))
    scores = dimred.project(model, fm)
    sel = dimred.select_components(scores, fm.targets(), args.alpha)
    if args.n_pcs:
        keep = sorted(sorted(sel.indices, key=lambda j: sel.p_values[j])[:args.n_pcs])
        sel = dimred.ComponentSelection(tuple(keep), sel.p_values, sel.t_statistics, sel.alpha)
    if not sel.indices:
        raise ValidationError(f"no principal component is significant at alpha={args.alpha}")
    loadings = dimred.component_loadings(model, fm, sel)
    if args.threshold is not None:
        pairs = dimred.reduce_wavelengths(loadings, threshold=args.threshold)
    else:
        pairs = dimred.reduce_wavelengths(loadings, top_k=args.top_k)
    print("# components: " + ", ".join(f"PC{j + 1} (p={sel.p_values[j]:.3g})"
                                        for j in sel.indices))
    for ex, em in pairs:
        print(f"{ex},{em}")
    return 0


def cmd_run(args) -> int:
    cfg = _experiment(args)
    out = _out_dir(args, "run")
    reports = run_experiment(cfg)
    manifest = cfg.to_text(_seed_comments(reports))
    echo = "".join("# " + line.lstrip("# ") + "\n" for line in manifest.splitlines()[1:])
    _write(out / "report.csv", metrics.report_csv(reports) + echo)
    _write(out / "report.txt", metrics.text_table(reports) + "\n" + echo)
    _write(out / "manifest.txt", manifest)
    sys.stdout.write(metrics.text_table(reports))
    return 0


def cmd_sweep(args) -> int:
    cfg = _experiment(args)
    if cfg["pipeline"] != "one-step":
        raise ValidationError("sweep runs the one-step pipeline; set pipeline = one-step")
    out = _out_dir(args, "sweep")
    reports = run_experiment(cfg, sorted(cfg.costs()))
    combs = cfg.combiners()
    rows = [r for comb in combs for r in reports if r.combiner == comb]
    _write(out / "sweep.csv", metrics.report_csv(rows, with_method=False))
    for comb in combs:
        _write(out / f"tradeoff_{comb}.csv", metrics.tradeoff_csv(rows, comb))
    _write(out / "manifest.txt", cfg.to_text(_seed_comments(reports)))
    sys.stdout.write(metrics.report_csv(rows, with_method=False))
    return 0


def cmd_report(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    rows = metrics.read_report_csv(text)
    stored = [_StoredReport(r) for r in rows]
    sys.stdout.write(metrics.text_table(stored, include_reference=not args.no_reference))
    return 0


class _StoredReport:
    """A report row re-read from CSV; keeps the stored std instead of recomputing."""

    def __init__(self, row):
        self._row = dict(row)
        self._row.setdefault("method", "one-step")
        self.method, self.combiner, self.cost = self._row["method"], row["combiner"], row["cost"]

    def row(self):
        return self._row


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_experiment_flags(p):
    p.add_argument("--config", help="flat key = value experiment config (or a manifest)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key, e.g. --set rbf.max_epochs=500")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ROOT_ENV}/cervispec-<cmd>)")
    for key in DEFAULTS:
        if "." in key:
            continue
        flag = "--" + key.replace("_", "-")
        p.add_argument(flag, dest="opt_" + key, metavar=key.upper(),
                       help=f"config key {key} (default {DEFAULTS[key]!r})")
    p.add_argument("--combiner", dest="opt_combiners", choices=["ave", "med", "ave,med"],
                   metavar="COMBINER", help="alias for --combiners: ave, med or ave,med")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cervispec", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write the synthetic train/test datasets")
    g.add_argument("--out")
    g.add_argument("--seed", type=int)
    g.add_argument("--synth-config", help="generator config file (key = value)")
    g.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess", help="normalize / mean-scale a dataset CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mode", choices=["normalized", "normalized_mean_scaled"],
                   default="normalized")
    p.add_argument("--reference", choices=["per_patient", "global_mean"], default="per_patient")
    p.add_argument("--pairs", choices=["all", "algo1", "algo2"], default="all")
    p.set_defaults(func=cmd_preprocess)

    r = sub.add_parser("reduce-wavelengths", help="select wavelength pairs by PC loadings")
    r.add_argument("--input", required=True, help="training dataset CSV")
    r.add_argument("--constituent", choices=["algo1", "algo2"], default="algo1")
    r.add_argument("--alpha", type=float, default=0.05)
    r.add_argument("--n-pcs", type=int, default=3,
                   help="keep at most this many significant PCs (0 = all)")
    grp = r.add_mutually_exclusive_group()
    grp.add_argument("--top-k", type=int, default=13)
    grp.add_argument("--threshold", type=float)
    r.set_defaults(func=cmd_reduce)

    for name, fn, helptext in (("run", cmd_run, "run one experiment"),
                               ("sweep", cmd_sweep, "one-step misclassification-cost sweep")):
        s = sub.add_parser(name, help=helptext)
        if name == "run":
            s.add_argument("which", nargs="?", choices=PIPELINES,
                           help="pipeline to run (same as --pipeline)")
        _add_experiment_flags(s)
        s.set_defaults(func=fn)

    rep = sub.add_parser("report", help="print a report CSV as an aligned table")
    rep.add_argument("--input", required=True)
    rep.add_argument("--no-reference", action="store_true", help="omit literature rows")
    rep.set_defaults(func=cmd_report)
    return parser


def _origin_module(exc) -> str:
    # wrapped errors (e.g. a member divergence re-raised by the ensemble) name the original
    while exc.__cause__ is not None:
        exc = exc.__cause__
    name = "cervispec"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        mod = frame.f_globals.get("__name__", "")
        if mod.startswith("cervispec."):
            name = mod
    return name


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sweep" and getattr(args, "opt_costs", None) is None and not args.config:
        args.opt_costs = "1,2,2.5,3,4,5"
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return args.func(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error [{_origin_module(exc)}]: {exc}", file=sys.stderr)
        return 1
    except (TrainingDivergence, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure [{_origin_module(exc)}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
