"""Confusion counts, sensitivity/specificity, variability and report output.

Positive class is SIL.  Percentages are kept at full precision internally
and rounded to one decimal only when written out.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class ConfusionCounts:
    true_positive: int
    false_negative: int
    true_negative: int
    false_positive: int

    def __post_init__(self):
        if min(self.true_positive, self.false_negative,
               self.true_negative, self.false_positive) < 0:
            raise ValidationError("confusion counts must be >= 0")

    @property
    def total(self) -> int:
        return self.true_positive + self.false_negative + self.true_negative + self.false_positive


def confusion(pred, truth) -> ConfusionCounts:
    p = np.asarray(pred).astype(int)
    t = np.asarray(truth).astype(int)
    if p.shape != t.shape:
        raise ValidationError(f"length mismatch: {p.size} predictions, {t.size} labels")
    if p.size == 0:
        raise ValidationError("no predictions")
    return ConfusionCounts(int(np.sum((p == 1) & (t == 1))), int(np.sum((p == 0) & (t == 1))),
                           int(np.sum((p == 0) & (t == 0))), int(np.sum((p == 1) & (t == 0))))


def sens_spec(c: ConfusionCounts):
    """(sensitivity %, specificity %)."""
    pos = c.true_positive + c.false_negative
    neg = c.true_negative + c.false_positive
    if pos == 0:
        raise ValidationError("sensitivity undefined: no SIL samples")
    if neg == 0:
        raise ValidationError("specificity undefined: no non-SIL samples")
    return 100.0 * c.true_positive / pos, 100.0 * c.true_negative / neg


def variability(values):
    """(mean, sample standard deviation); std is 0 for a single value."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValidationError("variability of an empty list")
    mean = float(v.mean())
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return mean, std


def threshold_sweep(scores, truth, thresholds):
    """(threshold, sensitivity, specificity) for fixed scores at each threshold."""
    s = np.asarray(scores, float)
    out = []
    for th in thresholds:
        out.append((float(th),) + sens_spec(confusion((s >= th).astype(int), truth)))
    return out


@dataclass
class EvalReport:
    """Sensitivity/specificity over repeated runs of one method."""
    method: str
    combiner: str
    cost: float
    sensitivities: list
    specificities: list
    config: dict = field(default_factory=dict)

    @property
    def sensitivity(self):
        return variability(self.sensitivities)

    @property
    def specificity(self):
        return variability(self.specificities)

    def row(self) -> dict:
        sm, ss = self.sensitivity
        pm, ps = self.specificity
        return {"method": self.method, "combiner": self.combiner, "cost": self.cost,
                "sensitivity": sm, "specificity": pm, "sens_std": ss, "spec_std": ps}


REPORT_COLUMNS = ("combiner", "cost", "sensitivity", "specificity", "sens_std", "spec_std")


def _fmt_cost(c) -> str:
    return repr(float(c)).rstrip("0").rstrip(".") if float(c) != int(c) else str(int(c))


def report_csv(reports, with_method: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((["method"] if with_method else []) + list(REPORT_COLUMNS))
    for r in reports:
        row = r.row()
        w.writerow(([row["method"]] if with_method else [])
                   + [row["combiner"], _fmt_cost(row["cost"])]
                   + [f"{row[k]:.1f}" for k in REPORT_COLUMNS[2:]])
    return buf.getvalue()


def tradeoff_csv(reports, combiner: str) -> str:
    """Two-column (specificity, sensitivity) curve for one combiner, by cost."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["specificity", "sensitivity"])
    for r in sorted((r for r in reports if r.combiner == combiner), key=lambda r: r.cost):
        w.writerow([f"{r.specificity[0]:.1f}", f"{r.sensitivity[0]:.1f}"])
    return buf.getvalue()


@dataclass(frozen=True)
class ReferenceRow:
    method: str
    specificity: float
    specificity_std: float | None
    sensitivity: float
    sensitivity_std: float | None
    source: str = "literature"


def reference_table() -> list:
    """Published comparison figures (specificity, sensitivity in %)."""
    return [
        ReferenceRow("2-step MSA", 65.0, None, 84.0, None),
        ReferenceRow("Pap smear (human expert)", 68.0, 21.0, 62.0, 23.0),
        ReferenceRow("Colposcopy (human expert)", 48.0, 23.0, 94.0, 6.0),
    ]


def _pm(mean, std):
    if std is None or (isinstance(std, float) and math.isnan(std)):
        return f"{mean:.1f}%"
    return f"{mean:.1f}% +/- {std:.1f}%"


def text_table(reports, include_reference: bool = True) -> str:
    """Aligned table: Algorithm | Specificity | Sensitivity."""
    rows = [("Algorithm", "Specificity", "Sensitivity")]
    for r in reports:
        row = r.row()
        rows.append((f"{r.method} {r.combiner} (cost {_fmt_cost(r.cost)})",
                     _pm(row["specificity"], row["spec_std"]),
                     _pm(row["sensitivity"], row["sens_std"])))
    n_computed = len(rows)
    if include_reference:
        for ref in reference_table():
            rows.append((f"{ref.method} [{ref.source}]", _pm(ref.specificity, ref.specificity_std),
                         _pm(ref.sensitivity, ref.sensitivity_std)))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    sep = "-+-".join("-" * w for w in widths)
    lines = []
    for i, r in enumerate(rows):
        lines.append(" | ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        if i == 0 or (i == n_computed - 1 and include_reference):
            lines.append(sep)
    return "\n".join(lines) + "\n"


def read_report_csv(text: str) -> list:
    """Parse ``report_csv`` output back into row dicts (values in %); ``#`` lines skipped."""
    out = []
    body = "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))
    for row in csv.DictReader(io.StringIO(body)):
        d = dict(row)
        for k in ("cost",) + REPORT_COLUMNS[2:]:
            d[k] = float(d[k])
        out.append(d)
    return out
