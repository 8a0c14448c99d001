"""Pooling independently trained classifiers with average / median combiners."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import TrainingDivergence, ValidationError
from .models import TrainConfig, model_from_dict, model_to_dict

COMBINERS = ("average", "median")
_ALIASES = {"ave": "average", "avg": "average", "average": "average",
            "med": "median", "median": "median"}


def combiner_name(name: str) -> str:
    try:
        return _ALIASES[name]
    except KeyError:
        raise ValidationError(f"unknown combiner {name!r}") from None


def _stack(outputs) -> np.ndarray:
    arr = np.asarray(outputs, dtype=float)
    if arr.ndim == 0 or arr.shape[0] == 0:
        raise ValidationError("cannot combine an empty pool")
    return arr


def combine_average(outputs) -> np.ndarray:
    """Componentwise arithmetic mean over the pool (axis 0)."""
    arr = _stack(outputs)
    return arr.sum(axis=0) / arr.shape[0]


def combine_median(outputs) -> np.ndarray:
    """Componentwise median: the middle order statistic for odd N, else the
    mean of the N/2-th and (N/2+1)-th."""
    arr = _stack(outputs)
    N = arr.shape[0]
    srt = np.sort(arr, axis=0)
    if N % 2:
        return srt[(N - 1) // 2].copy()
    return (srt[N // 2 - 1] + srt[N // 2]) / 2.0


_COMBINE = {"average": combine_average, "median": combine_median}


@dataclass(frozen=True, eq=False)
class Ensemble:
    members: tuple
    combiner: str = "average"
    member_seeds: tuple = ()
    allow_mixed: bool = False

    kind = "ensemble"

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValidationError("an ensemble needs at least one member")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "combiner", combiner_name(self.combiner))
        dims = {m.input_dim for m in members}
        if len(dims) != 1:
            raise ValidationError(f"members disagree on input dimension: {sorted(dims)}")
        if not self.allow_mixed and len({m.kind for m in members}) != 1:
            raise ValidationError("mixed member types need allow_mixed=True")

    @property
    def input_dim(self):
        return self.members[0].input_dim

    def __len__(self):
        return len(self.members)

    def member_outputs(self, X) -> np.ndarray:
        return np.stack([m.outputs(X) for m in self.members])

    def outputs(self, X) -> np.ndarray:
        return _COMBINE[self.combiner](self.member_outputs(X))

    def with_combiner(self, combiner: str) -> "Ensemble":
        return Ensemble(self.members, combiner, self.member_seeds, self.allow_mixed)

    def merged(self, other: "Ensemble") -> "Ensemble":
        return Ensemble(self.members + other.members, self.combiner,
                        self.member_seeds + other.member_seeds, allow_mixed=True)

    def to_dict(self) -> dict:
        return {"format": "cervispec-ensemble", "version": 1, "combiner": self.combiner,
                "member_seeds": list(self.member_seeds), "allow_mixed": self.allow_mixed,
                "members": [model_to_dict(m) for m in self.members]}

    @classmethod
    def from_dict(cls, d: dict) -> "Ensemble":
        if d.get("format") != "cervispec-ensemble":
            raise ValidationError("not a serialised ensemble")
        return cls(tuple(model_from_dict(m) for m in d["members"]), d["combiner"],
                   tuple(d["member_seeds"]), d.get("allow_mixed", False))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "Ensemble":
        return cls.from_dict(json.loads(text))


def build_ensemble(train_fn, cfg: TrainConfig, n_members: int = 20, base_seed: int = 0,
                   combiner: str = "average") -> Ensemble:
    """Train ``n_members`` models with seeds ``base_seed .. base_seed + N - 1``.

    ``train_fn(cfg)`` must train one model on a fixed training set using
    ``cfg.seed``.
    """
    if n_members < 1:
        raise ValidationError("pool size must be >= 1")
    seeds = tuple(range(base_seed, base_seed + n_members))
    members = []
    for m, s in enumerate(seeds):
        try:
            members.append(train_fn(cfg.with_seed(s)))
        except TrainingDivergence as exc:
            raise TrainingDivergence(exc.epoch, exc.learning_rate,
                                     f"ensemble member {m} (seed {s})") from exc
    return Ensemble(tuple(members), combiner, seeds)


def repeat_ensembles(train_fn, cfg: TrainConfig, n_members: int = 20, repetitions: int = 10,
                     base_seed: int = 0, seed_stride: int | None = None,
                     combiner: str = "average") -> list:
    """``repetitions`` ensembles on disjoint seed blocks, for variability estimates."""
    if repetitions < 1:
        raise ValidationError("repetitions must be >= 1")
    stride = n_members if seed_stride is None else seed_stride
    if stride < n_members:
        raise ValidationError(f"seed stride {stride} < pool size {n_members}: seeds would overlap")
    return [build_ensemble(train_fn, cfg, n_members, base_seed + r * stride, combiner)
            for r in range(repetitions)]
