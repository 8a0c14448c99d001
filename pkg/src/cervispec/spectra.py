"""Fluorescence sample data model, CSV ingestion, splitting and synthesis.

A sample is a vector of calibrated intensities over excitation-emission
wavelength pairs.  The default grid has three excitation wavelengths
(337, 380, 460 nm) with 59, 56 and 45 emission wavelengths at 5 nm spacing,
160 pairs in total.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DatasetFormatError, ValidationError

log = logging.getLogger(__name__)

Pair = tuple  # (excitation nm, emission nm)


# ---------------------------------------------------------------------------
# wavelength grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WavelengthGrid:
    excitations: tuple
    emissions_per_excitation: tuple

    def __post_init__(self):
        exc = tuple(int(e) for e in self.excitations)
        ems = tuple(tuple(int(w) for w in block) for block in self.emissions_per_excitation)
        if len(exc) != len(ems):
            raise ValidationError("one emission list is required per excitation")
        if len(set(exc)) != len(exc):
            raise ValidationError(f"duplicate excitation wavelengths: {exc}")
        for ex, block in zip(exc, ems):
            if not block:
                raise ValidationError(f"excitation {ex} has no emission wavelengths")
            if any(b <= a for a, b in zip(block, block[1:])):
                raise ValidationError(f"emissions at excitation {ex} are not strictly increasing")
        object.__setattr__(self, "excitations", exc)
        object.__setattr__(self, "emissions_per_excitation", ems)

    @classmethod
    def default(cls) -> "WavelengthGrid":
        # emission ranges chosen so every reduced-set pair is on the grid
        starts = {337: 360, 380: 395, 460: 480}
        counts = {337: 59, 380: 56, 460: 45}
        return cls(
            tuple(starts),
            tuple(tuple(starts[ex] + 5 * i for i in range(counts[ex])) for ex in starts),
        )

    @property
    def n_pairs(self) -> int:
        return sum(len(b) for b in self.emissions_per_excitation)

    def pairs(self) -> list:
        return [(ex, em) for ex, block in zip(self.excitations, self.emissions_per_excitation)
                for em in block]

    def column_names(self) -> list:
        return [f"I_{ex}_{em}" for ex, em in self.pairs()]

    def block_slices(self) -> dict:
        """Map excitation -> slice of its columns in the flat intensity vector."""
        out, start = {}, 0
        for ex, block in zip(self.excitations, self.emissions_per_excitation):
            out[ex] = slice(start, start + len(block))
            start += len(block)
        return out

    def emissions(self, excitation) -> np.ndarray:
        return np.asarray(self.emissions_per_excitation[self.excitations.index(excitation)],
                          dtype=float)


# ---------------------------------------------------------------------------
# samples and datasets
# ---------------------------------------------------------------------------

class Histology(str, enum.Enum):
    NormalSquamous = "NormalSquamous"
    NormalColumnar = "NormalColumnar"
    Inflammation = "Inflammation"
    LowGradeSIL = "LowGradeSIL"
    HighGradeSIL = "HighGradeSIL"

    @property
    def is_sil(self) -> bool:
        return self in (Histology.LowGradeSIL, Histology.HighGradeSIL)

    @property
    def short(self) -> str:
        return _SHORT[self]

    @classmethod
    def parse(cls, token: str) -> "Histology":
        token = token.strip()
        try:
            return cls(token)
        except ValueError:
            pass
        for h, s in _SHORT.items():
            if token == s:
                return h
        raise ValueError(token)


_SHORT = {
    Histology.NormalSquamous: "NS",
    Histology.NormalColumnar: "NC",
    Histology.Inflammation: "Infl",
    Histology.LowGradeSIL: "LG",
    Histology.HighGradeSIL: "HG",
}

#: Canonical class counts per split.
TRAIN_COUNTS = {
    Histology.NormalSquamous: 94,
    Histology.NormalColumnar: 13,
    Histology.Inflammation: 15,
    Histology.LowGradeSIL: 23,
    Histology.HighGradeSIL: 35,
}
TEST_COUNTS = {
    Histology.NormalSquamous: 94,
    Histology.NormalColumnar: 14,
    Histology.Inflammation: 14,
    Histology.LowGradeSIL: 24,
    Histology.HighGradeSIL: 35,
}


@dataclass(frozen=True, eq=False)
class SpectralSample:
    patient_id: str
    site_id: str
    histology: Histology
    intensities: np.ndarray

    def __post_init__(self):
        arr = np.array(self.intensities, dtype=np.float64)
        if arr.ndim != 1:
            raise ValidationError("intensities must be a 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"non-finite intensity in sample {self.patient_id}/{self.site_id}")
        if np.any(arr < 0):
            raise ValidationError(f"negative intensity in sample {self.patient_id}/{self.site_id}")
        arr.setflags(write=False)
        object.__setattr__(self, "intensities", arr)
        object.__setattr__(self, "histology", Histology(self.histology))

    @property
    def is_sil(self) -> bool:
        return self.histology.is_sil

    def __eq__(self, other):
        if not isinstance(other, SpectralSample):
            return NotImplemented
        return (self.patient_id == other.patient_id and self.site_id == other.site_id
                and self.histology == other.histology
                and np.array_equal(self.intensities, other.intensities))

    def __hash__(self):
        return hash((self.patient_id, self.site_id, self.histology))


SPLIT_TAGS = ("train", "test", "unsplit")


@dataclass(frozen=True, eq=False)
class Dataset:
    grid: WavelengthGrid
    samples: tuple
    split_tag: str = "unsplit"

    def __post_init__(self):
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        if self.split_tag not in SPLIT_TAGS:
            raise ValidationError(f"split_tag must be one of {SPLIT_TAGS}")
        n = self.grid.n_pairs
        seen = set()
        for i, s in enumerate(samples):
            if len(s.intensities) != n:
                raise ValidationError(
                    f"sample {i} has {len(s.intensities)} intensities, grid has {n} pairs")
            if not str(s.patient_id):
                raise ValidationError(f"sample {i} has an empty patient id")
            key = (s.patient_id, s.site_id)
            if key in seen:
                raise ValidationError(f"duplicate (patient_id, site_id) {key}")
            seen.add(key)

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.grid == other.grid and self.split_tag == other.split_tag
                and self.samples == other.samples)

    def intensity_matrix(self) -> np.ndarray:
        if not self.samples:
            return np.zeros((0, self.grid.n_pairs))
        return np.vstack([s.intensities for s in self.samples])

    def histologies(self) -> list:
        return [s.histology for s in self.samples]

    def targets(self) -> np.ndarray:
        """Binary target, 1 = SIL."""
        return np.array([int(s.is_sil) for s in self.samples], dtype=int)

    def patient_ids(self) -> list:
        return [s.patient_id for s in self.samples]

    def subset(self, indices: Iterable[int], split_tag=None) -> "Dataset":
        return Dataset(self.grid, tuple(self.samples[i] for i in indices),
                       split_tag or self.split_tag)

    def tally(self) -> dict:
        c = Counter(s.histology for s in self.samples)
        return {h: c.get(h, 0) for h in Histology}


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

META_COLUMNS = ("patient_id", "site_id", "histology")


def save_dataset(ds: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(META_COLUMNS) + ds.grid.column_names())
        for s in ds.samples:
            w.writerow([s.patient_id, s.site_id, s.histology.value]
                       + [repr(float(v)) for v in s.intensities])


def load_dataset(path, grid: WavelengthGrid | None = None, split_tag="unsplit") -> Dataset:
    """Read a dataset CSV; errors name the offending row and column.

    Row numbers in messages are 1-based file lines (the header is line 1).
    """
    grid = grid or WavelengthGrid.default()
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"{path}: no such file")
    expected = grid.column_names()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        for col in META_COLUMNS:
            if col not in header:
                raise DatasetFormatError(f"{path}: missing column {col!r}")
        icols = [h for h in header if h.startswith("I_")]
        if len(icols) != len(expected):
            raise DatasetFormatError(
                f"{path}: length mismatch, header has {len(icols)} intensity columns, "
                f"grid expects {len(expected)}")
        for col in expected:
            if col not in header:
                raise DatasetFormatError(f"{path}: missing column {col!r}")
        meta_idx = [header.index(c) for c in META_COLUMNS]
        int_idx = [header.index(c) for c in expected]

        samples = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"{path}: row {lineno}: length mismatch, {len(row)} fields, "
                    f"header has {len(header)}")
            pid, sid, htok = (row[i].strip() for i in meta_idx)
            try:
                hist = Histology.parse(htok)
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: row {lineno}: unknown histology label {htok!r}") from None
            values = np.empty(len(int_idx))
            for k, j in enumerate(int_idx):
                try:
                    v = float(row[j])
                except ValueError:
                    raise DatasetFormatError(
                        f"{path}: row {lineno}, column {header[j]!r}: "
                        f"non-numeric intensity {row[j]!r}") from None
                if not math.isfinite(v) or v < 0:
                    raise DatasetFormatError(
                        f"{path}: row {lineno}, column {header[j]!r}: "
                        f"intensity must be finite and >= 0, got {row[j]!r}")
                values[k] = v
            if not pid:
                raise DatasetFormatError(f"{path}: row {lineno}: empty patient_id")
            samples.append(SpectralSample(pid, sid, hist, values))
    try:
        return Dataset(grid, tuple(samples), split_tag)
    except ValidationError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# train/test split
# ---------------------------------------------------------------------------

def split_train_test(ds: Dataset, fraction: float, by_patient: bool = True, seed: int = 0):
    """Random split into (train, test).

    The number of training units (patients, or samples when ``by_patient``
    is false) is ``round(fraction * n_units)`` clipped to ``[1, n_units - 1]``,
    so both halves are always non-empty.  Row order is preserved.
    """
    if ds.split_tag != "unsplit":
        raise ValidationError(f"dataset is already split ({ds.split_tag})")
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    if by_patient:
        patients = list(dict.fromkeys(ds.patient_ids()))
        if len(patients) < 2:
            raise ValidationError("patient-level split needs at least 2 patients")
        units = patients
    else:
        if len(ds) < 2:
            raise ValidationError("split needs at least 2 samples")
        units = list(range(len(ds)))
    n_train = min(max(int(round(fraction * len(units))), 1), len(units) - 1)
    order = rng.permutation(len(units))
    chosen = {units[i] for i in order[:n_train]}
    if by_patient:
        in_train = [s.patient_id in chosen for s in ds.samples]
    else:
        in_train = [i in chosen for i in range(len(ds))]
    train = ds.subset([i for i, t in enumerate(in_train) if t], "train")
    test = ds.subset([i for i, t in enumerate(in_train) if not t], "test")
    for name, part in (("train", train), ("test", test)):
        log.info("%s split: %s", name,
                 ", ".join(f"{h.short}={n}" for h, n in part.tally().items()))
    return train, test


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------

def _default_bands() -> dict:
    # (center nm, gaussian width nm, amplitude) per excitation.  Shapes differ
    # between classes (band ratios), not only overall brightness, since
    # normalization removes brightness.
    B = {}
    B[Histology.NormalSquamous] = {
        337: [(395, 22, 1.00), (455, 35, 0.80), (520, 45, 0.30)],
        380: [(440, 28, 0.75), (470, 35, 0.55), (610, 30, 0.12)],
        460: [(530, 30, 0.55), (590, 40, 0.28), (650, 30, 0.10)],
    }
    B[Histology.NormalColumnar] = {
        337: [(395, 22, 0.24), (455, 35, 0.38), (520, 45, 0.17)],
        380: [(440, 28, 0.30), (470, 35, 0.42), (610, 30, 0.16)],
        460: [(530, 30, 0.14), (590, 40, 0.13), (650, 30, 0.085)],
    }
    B[Histology.Inflammation] = {
        337: [(395, 22, 0.60), (455, 35, 0.66), (520, 45, 0.22)],
        380: [(440, 28, 0.40), (470, 35, 0.42), (610, 30, 0.10)],
        460: [(530, 30, 0.31), (590, 40, 0.20), (650, 30, 0.08)],
    }
    B[Histology.LowGradeSIL] = {
        337: [(395, 22, 0.55), (455, 35, 0.68), (520, 45, 0.23)],
        380: [(440, 28, 0.32), (470, 35, 0.38), (610, 30, 0.10)],
        460: [(530, 30, 0.30), (590, 40, 0.20), (650, 30, 0.08)],
    }
    B[Histology.HighGradeSIL] = {
        337: [(395, 22, 0.50), (455, 35, 0.70), (520, 45, 0.25)],
        380: [(440, 28, 0.36), (470, 35, 0.42), (610, 30, 0.12)],
        460: [(530, 30, 0.28), (590, 40, 0.21), (650, 30, 0.09)],
    }
    return B


@dataclass
class SynthConfig:
    """Parameters of the synthetic fluorescence generator.

    Each spectrum is a sum of Gaussian emission bands.  A band's amplitude is
    the class amplitude times a per-patient, per-band log-normal multiplier
    (``patient_scale``) times a per-site one (``site_scale``); each wavelength
    also gets a small per-site log-normal ripple of ``site_scale * ripple``.
    With both scales 0 every sample of a class is identical.
    """

    counts: dict = field(default_factory=lambda: dict(TRAIN_COUNTS))
    bands: dict = field(default_factory=_default_bands)
    patient_scale: float = 0.20
    site_scale: float = 0.25
    ripple: float = 0.25
    seed: int = 42
    n_patients: int | None = None
    id_prefix: str = "P"
    grid: WavelengthGrid = field(default_factory=WavelengthGrid.default)

    FORMAT_VERSION = 1

    def validate(self) -> None:
        if self.patient_scale < 0 or self.site_scale < 0 or self.ripple < 0:
            raise ValidationError("noise scales must be >= 0")
        for h, n in self.counts.items():
            if int(n) < 0:
                raise ValidationError(f"negative count for {h}")
        for h in Histology:
            if self.counts.get(h, 0) and h not in self.bands:
                raise ValidationError(f"no band parameters for {h.value}")
        for h, per_ex in self.bands.items():
            for ex, bands in per_ex.items():
                if ex not in self.grid.excitations:
                    raise ValidationError(f"band for unknown excitation {ex}")
                for c, w, a in bands:
                    if w <= 0 or a < 0:
                        raise ValidationError(f"bad band ({c}, {w}, {a}) for {h.value} at {ex}")
        check_class_ordering(self)

    # -- flat key-value text form -------------------------------------------------

    def to_text(self) -> str:
        lines = [f"# synthetic fluorescence generator config",
                 f"format_version = {self.FORMAT_VERSION}",
                 f"seed = {self.seed}",
                 f"patient_scale = {self.patient_scale!r}",
                 f"site_scale = {self.site_scale!r}",
                 f"ripple = {self.ripple!r}",
                 f"n_patients = {'auto' if self.n_patients is None else self.n_patients}",
                 f"id_prefix = {self.id_prefix}"]
        for h in Histology:
            lines.append(f"count.{h.value} = {int(self.counts.get(h, 0))}")
        for h in Histology:
            for ex, bands in sorted(self.bands.get(h, {}).items()):
                for i, (c, w, a) in enumerate(bands):
                    lines.append(f"band.{h.value}.{ex}.{i} = {float(c)!r} {float(w)!r} {float(a)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SynthConfig":
        kv = parse_key_values(text)
        version = int(kv.pop("format_version", cls.FORMAT_VERSION))
        if version != cls.FORMAT_VERSION:
            raise ValidationError(f"unsupported synth config version {version}")
        cfg = cls()
        counts, bands = {}, {}
        for key, val in kv.items():
            if key.startswith("count."):
                counts[_parse_hist(key[6:])] = int(val)
            elif key.startswith("band."):
                try:
                    _, hname, ex, idx = key.split(".")
                    c, w, a = (float(x) for x in val.split())
                except ValueError:
                    raise ValidationError(f"malformed band entry {key} = {val}") from None
                bands.setdefault(_parse_hist(hname), {}).setdefault(int(ex), []).append(
                    (int(idx), (c, w, a)))
            elif key in ("patient_scale", "site_scale", "ripple"):
                setattr(cfg, key, float(val))
            elif key == "seed":
                cfg.seed = int(val)
            elif key == "n_patients":
                cfg.n_patients = None if val == "auto" else int(val)
            elif key == "id_prefix":
                cfg.id_prefix = val
            else:
                raise ValidationError(f"unknown synth config key {key!r}")
        if counts:
            cfg.counts = {h: counts.get(h, 0) for h in Histology}
        if bands:
            cfg.bands = {h: {ex: [b for _, b in sorted(lst)] for ex, lst in per_ex.items()}
                         for h, per_ex in bands.items()}
        return cfg

    @classmethod
    def load(cls, path) -> "SynthConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _parse_hist(token):
    try:
        return Histology.parse(token)
    except ValueError:
        raise ValidationError(f"unknown histology {token!r}") from None


def parse_key_values(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {n}: expected 'key = value', got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def class_spectrum(bands_for_class: dict, grid: WavelengthGrid, band_scale=None) -> np.ndarray:
    """Noise-free spectrum of one class on ``grid``; ``band_scale[ex][b]`` multiplies band b."""
    parts = []
    for ex in grid.excitations:
        em = grid.emissions(ex)
        spec = np.zeros_like(em)
        for b, (c, w, a) in enumerate(bands_for_class.get(ex, [])):
            s = 1.0 if band_scale is None else band_scale[ex][b]
            spec = spec + a * s * np.exp(-0.5 * ((em - c) / w) ** 2)
        parts.append(spec)
    return np.concatenate(parts)


def integrated_class_means(cfg: SynthConfig) -> dict:
    """Integrated noise-free intensity per (class, excitation)."""
    out = {}
    blocks = cfg.grid.block_slices()
    for h, per_ex in cfg.bands.items():
        spec = class_spectrum(per_ex, cfg.grid)
        out[h] = {ex: float(spec[sl].sum()) for ex, sl in blocks.items()}
    return out


def check_class_ordering(cfg: SynthConfig, nc_hg_tolerance: float = 0.15) -> None:
    """NS > each SIL grade > NC at 337/460 nm; NC close to HG SIL at 380 nm."""
    m = integrated_class_means(cfg)
    need = [Histology.NormalSquamous, Histology.NormalColumnar,
            Histology.LowGradeSIL, Histology.HighGradeSIL]
    if any(h not in m for h in need):
        return
    ns, nc = m[Histology.NormalSquamous], m[Histology.NormalColumnar]
    for ex in (337, 460):
        if ex not in ns:
            continue
        for sil in (Histology.LowGradeSIL, Histology.HighGradeSIL):
            v = m[sil][ex]
            if not ns[ex] > v > nc[ex]:
                raise ValidationError(
                    f"infeasible class ordering at {ex} nm: need NS ({ns[ex]:.3g}) > "
                    f"{sil.short} ({v:.3g}) > NC ({nc[ex]:.3g})")
    if 380 in ns:
        hg = m[Histology.HighGradeSIL][380]
        if abs(nc[380] - hg) > nc_hg_tolerance * hg:
            raise ValidationError(
                f"infeasible class ordering at 380 nm: NC ({nc[380]:.3g}) must be within "
                f"{nc_hg_tolerance:.0%} of HG SIL ({hg:.3g})")


def synthesize_dataset(cfg: SynthConfig | None = None) -> Dataset:
    """Generate a labelled dataset from ``cfg``; deterministic for a fixed seed."""
    cfg = cfg or SynthConfig()
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    grid = cfg.grid

    # NS sites first, then abnormal, then NC, dealt round-robin over a
    # shuffled patient order, so every patient gets sites when possible.
    groups = [
        [Histology.NormalSquamous],
        [Histology.Inflammation, Histology.LowGradeSIL, Histology.HighGradeSIL],
        [Histology.NormalColumnar],
    ]
    total = sum(int(cfg.counts.get(h, 0)) for h in Histology)
    if total == 0:
        return Dataset(grid, ())
    n_pat = cfg.n_patients or max(1, min(total, round(total * 95 / 361)))
    labels, patient_of = [], []
    pos = 0
    for grp in groups:
        hs = [h for h in grp for _ in range(int(cfg.counts.get(h, 0)))]
        hs = [hs[i] for i in rng.permutation(len(hs))]
        order = rng.permutation(n_pat)
        for h in hs:
            labels.append(h)
            patient_of.append(int(order[pos % n_pat]))
            pos += 1

    width = len(str(n_pat))
    patient_band = {}
    for p in range(n_pat):
        patient_band[p] = {
            h: {ex: np.exp(cfg.patient_scale * rng.standard_normal(len(bands)))
                for ex, bands in cfg.bands[h].items()}
            for h in sorted(cfg.bands, key=lambda x: x.value)
        }
    patient_gain = np.exp(cfg.patient_scale * rng.standard_normal(n_pat))

    rows = []
    site_counter = Counter()
    for h, p in zip(labels, patient_of):
        scale = {ex: patient_band[p][h][ex] * np.exp(cfg.site_scale * rng.standard_normal(len(b)))
                 for ex, b in cfg.bands[h].items()}
        spec = class_spectrum(cfg.bands[h], grid, scale)
        ripple = np.exp(cfg.site_scale * cfg.ripple * rng.standard_normal(grid.n_pairs))
        gain = patient_gain[p] * np.exp(cfg.site_scale * rng.standard_normal())
        site_counter[p] += 1
        rows.append((p, site_counter[p], h, spec * ripple * gain))

    rows.sort(key=lambda r: (r[0], r[1]))
    samples = tuple(
        SpectralSample(f"{cfg.id_prefix}{p + 1:0{width}d}", f"S{s}", h, x)
        for p, s, h, x in rows)
    return Dataset(grid, samples)


def canonical_configs(seed: int = 42):
    """Train/test generator configs with the canonical counts and disjoint patient ids."""
    return (SynthConfig(counts=dict(TRAIN_COUNTS), seed=seed, id_prefix="P"),
            SynthConfig(counts=dict(TEST_COUNTS), seed=seed + 1, id_prefix="T"))


def canonical_datasets(seed: int = 42):
    """The canonical synthetic (train, test) pair."""
    a, b = canonical_configs(seed)
    return (Dataset(a.grid, synthesize_dataset(a).samples, "train"),
            Dataset(b.grid, synthesize_dataset(b).samples, "test"))


def binary_labels(histologies: Sequence) -> np.ndarray:
    return np.array([int(Histology(h).is_sil) for h in histologies], dtype=int)
