"""Base classifiers: logistic discrimination, one-hidden-layer MLP, Gaussian RBF network.

All three expose ``outputs(X) -> (n, 2)`` class scores (column 0 = non-SIL,
column 1 = SIL).  The SIL score used for thresholding is column 1 divided
by the sum of both columns (negative RBF outputs are clipped at 0 first).

Training minimises a cost-weighted squared error for the networks,

    L = (1/n) * sum_i c_i * ||o_i - t_i||^2,

with ``c_i`` the misclassification cost of sample i's class, and maximises
the cost-weighted log-likelihood for the logistic model.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import TrainingDivergence, ValidationError
from .spectra import Histology

SIL, NON_SIL = "SIL", "non-SIL"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class CostPolicy:
    sil_cost: float = 1.0
    normal_cost: float = 1.0
    decision_threshold: float = 0.5

    def __post_init__(self):
        for name in ("sil_cost", "normal_cost"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be finite and > 0, got {v}")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValidationError(
                f"decision_threshold must lie in (0, 1), got {self.decision_threshold}")

    def sample_weights(self, targets) -> np.ndarray:
        y = np.asarray(targets)
        return np.where(y == 1, self.sil_cost, self.normal_cost).astype(float)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    max_epochs: int = 2000
    stop_patience: int = 25
    min_rel_improvement: float = 1e-4
    seed: int = 0
    cost: CostPolicy = field(default_factory=CostPolicy)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be > 0")
        if self.max_epochs < 1 or self.stop_patience < 1:
            raise ValidationError("max_epochs and stop_patience must be >= 1")
        if self.min_rel_improvement < 0:
            raise ValidationError("min_rel_improvement must be >= 0")

    def with_seed(self, seed: int) -> "TrainConfig":
        return TrainConfig(self.learning_rate, self.max_epochs, self.stop_patience,
                           self.min_rel_improvement, int(seed), self.cost)

    def with_cost(self, cost: CostPolicy) -> "TrainConfig":
        return TrainConfig(self.learning_rate, self.max_epochs, self.stop_patience,
                           self.min_rel_improvement, self.seed, cost)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["cost"] = CostPolicy(**d.get("cost", {}))
        return cls(**d)


def _as_array(features) -> np.ndarray:
    return np.asarray(getattr(features, "values", features), dtype=float)


def sigmoid(z):
    # split on sign so exp never overflows
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def one_hot(targets) -> np.ndarray:
    y = np.asarray(targets).astype(int)
    return np.column_stack([1 - y, y]).astype(float)


def sil_score(outputs) -> np.ndarray:
    """Normalised SIL score from raw 2-column outputs; 0.5 if both are <= 0."""
    o = np.clip(np.atleast_2d(np.asarray(outputs, float)), 0.0, None)
    s = o.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(s > 0, o[:, 1] / np.where(s > 0, s, 1.0), 0.5)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LogisticModel:
    weights: np.ndarray
    bias: float
    info: dict = field(default_factory=dict, compare=False)

    kind = "logistic"

    @property
    def input_dim(self):
        return self.weights.shape[0]

    def probability(self, X) -> np.ndarray:
        return sigmoid(np.atleast_2d(X) @ self.weights + self.bias)

    def outputs(self, X) -> np.ndarray:
        p = self.probability(X)
        return np.column_stack([1.0 - p, p])


@dataclass(frozen=True, eq=False)
class MlpNetwork:
    """``h = g(v x + b_h)``, ``o = f(w h + b_o)`` with logistic g and f."""
    input_to_hidden: np.ndarray     # v, (hidden, inputs)
    hidden_to_output: np.ndarray    # w, (outputs, hidden)
    hidden_bias: np.ndarray
    output_bias: np.ndarray
    info: dict = field(default_factory=dict, compare=False)

    kind = "mlp"

    def __post_init__(self):
        v, w = self.input_to_hidden, self.hidden_to_output
        if v.ndim != 2 or w.ndim != 2 or w.shape[1] != v.shape[0]:
            raise ValidationError(f"inconsistent layer shapes {v.shape}, {w.shape}")
        if self.hidden_bias.shape != (v.shape[0],) or self.output_bias.shape != (w.shape[0],):
            raise ValidationError("bias shapes do not match layer sizes")

    @property
    def hidden_count(self):
        return self.input_to_hidden.shape[0]

    @property
    def input_dim(self):
        return self.input_to_hidden.shape[1]

    def forward(self, X):
        X = np.atleast_2d(np.asarray(X, float))
        if X.shape[1] != self.input_dim:
            raise ValidationError(f"dimension mismatch: got {X.shape[1]} inputs, "
                                  f"network expects {self.input_dim}")
        h = sigmoid(X @ self.input_to_hidden.T + self.hidden_bias)
        o = sigmoid(h @ self.hidden_to_output.T + self.output_bias)
        return h, o

    def outputs(self, X):
        return self.forward(X)[1]


@dataclass(frozen=True, eq=False)
class RbfNetwork:
    """Gaussian kernels ``R_j(x) = exp(-||x - x_j||^2 / (2 sigma_j^2))``, linear outputs."""
    centers: np.ndarray             # (kernels, inputs)
    widths: np.ndarray              # (kernels,)
    output_weights: np.ndarray      # (outputs, kernels)
    output_bias: np.ndarray
    kernels_trainable: bool = True
    info: dict = field(default_factory=dict, compare=False)

    kind = "rbf"

    def __post_init__(self):
        if self.centers.ndim != 2 or self.widths.shape != (self.centers.shape[0],):
            raise ValidationError("centers/widths shape mismatch")
        if not np.all(self.widths > 0):
            raise ValidationError("kernel widths must be > 0")
        if self.output_weights.shape[1] != self.centers.shape[0]:
            raise ValidationError("output weights do not match kernel count")

    @property
    def input_dim(self):
        return self.centers.shape[1]

    @property
    def n_kernels(self):
        return self.centers.shape[0]

    def activations(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if X.shape[1] != self.input_dim:
            raise ValidationError(f"dimension mismatch: got {X.shape[1]} inputs, "
                                  f"centers have {self.input_dim}")
        d2 = _sq_dists(X, self.centers)
        return np.exp(-0.5 * d2 / self.widths ** 2)

    def outputs(self, X):
        return self.activations(X) @ self.output_weights.T + self.output_bias


def _sq_dists(X, C):
    # explicit differences: exactly 0 when a row equals a center
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def rbf_forward(net: RbfNetwork, x) -> np.ndarray:
    return net.outputs(np.asarray(x, float)[None, :])[0]


def mlp_forward(net: MlpNetwork, x) -> np.ndarray:
    return net.outputs(np.asarray(x, float)[None, :])[0]


def predict(model, X, cost: CostPolicy | None = None):
    """Vectorised thresholding: returns (labels 1=SIL, SIL scores)."""
    cost = cost or CostPolicy()
    scores = sil_score(model.outputs(_as_array(X)))
    return (scores >= cost.decision_threshold).astype(int), scores


def classify(model, x, cost: CostPolicy | None = None):
    """Label one sample; a score exactly at the threshold counts as SIL."""
    labels, scores = predict(model, np.atleast_2d(np.asarray(x, float)), cost)
    return (SIL if labels[0] else NON_SIL), float(scores[0])


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------

def kmeans(points, k: int, seed: int = 0, max_iter: int = 300) -> np.ndarray:
    """Lloyd's algorithm from k distinct randomly drawn rows.

    Stops at an assignment fixed point or after ``max_iter`` rounds.  An
    empty cluster is re-seeded with the point farthest from its centroid.
    """
    X = _as_array(points)
    n = X.shape[0]
    if k < 1:
        raise ValidationError("k must be >= 1")
    if k > n:
        raise ValidationError(f"k={k} exceeds the number of points ({n})")
    rng = np.random.default_rng(seed)
    C = X[rng.choice(n, size=k, replace=False)].copy()
    assign = None
    for _ in range(max_iter):
        new = np.argmin(_sq_dists(X, C), axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        taken = set()
        for j in range(k):
            members = assign == j
            if members.any():
                C[j] = X[members].mean(axis=0)
        for j in range(k):
            if not np.any(assign == j):
                d = ((X - C[assign]) ** 2).sum(axis=1)
                d[list(taken)] = -1.0
                far = int(np.argmax(d))
                taken.add(far)
                C[j] = X[far]
                assign[far] = j
    return C


# ---------------------------------------------------------------------------
# losses and gradients
# ---------------------------------------------------------------------------

def mlp_loss_and_grads(net: MlpNetwork, X, T, c):
    X = np.asarray(X, float)
    n = X.shape[0]
    h, o = net.forward(X)
    err = o - T
    loss = float(np.sum(c[:, None] * err ** 2) / n)
    d_o = 2.0 * c[:, None] * err / n
    dz2 = d_o * o * (1.0 - o)
    gw = dz2.T @ h
    gbo = dz2.sum(axis=0)
    dz1 = (dz2 @ net.hidden_to_output) * h * (1.0 - h)
    gv = dz1.T @ X
    gbh = dz1.sum(axis=0)
    return loss, {"input_to_hidden": gv, "hidden_to_output": gw,
                  "hidden_bias": gbh, "output_bias": gbo}


def rbf_loss_and_grads(net: RbfNetwork, X, T, c, kernel_grads: bool | None = None):
    X = np.asarray(X, float)
    n = X.shape[0]
    R = net.activations(X)
    o = R @ net.output_weights.T + net.output_bias
    err = o - T
    loss = float(np.sum(c[:, None] * err ** 2) / n)
    G = 2.0 * c[:, None] * err / n
    grads = {"output_weights": G.T @ R, "output_bias": G.sum(axis=0)}
    if net.kernels_trainable if kernel_grads is None else kernel_grads:
        dR = (G @ net.output_weights) * R                    # (n, K)
        s2 = net.widths ** 2
        grads["centers"] = (dR.T @ X - dR.sum(axis=0)[:, None] * net.centers) / s2[:, None]
        d2 = _sq_dists(X, net.centers)
        grads["widths"] = (dR * d2).sum(axis=0) / net.widths ** 3
    return loss, grads


def logistic_objective_and_grad(model: LogisticModel, X, y, c, l2: float = 0.0):
    """Mean cost-weighted log-likelihood minus ``l2/2 * ||w||^2``, and its gradient."""
    X = np.asarray(X, float)
    n = X.shape[0]
    z = X @ model.weights + model.bias
    # log p = -log(1+e^-z), log(1-p) = -log(1+e^z)
    ll = -(c * (y * np.logaddexp(0, -z) + (1 - y) * np.logaddexp(0, z))).sum() / n
    obj = float(ll - 0.5 * l2 * model.weights @ model.weights)
    r = c * (y - sigmoid(z)) / n
    return obj, X.T @ r - l2 * model.weights, float(r.sum())


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

class _PlateauStop:
    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.prev = None
        self.flat = 0

    def update(self, epoch, loss) -> bool:
        if not np.isfinite(loss):
            raise TrainingDivergence(epoch, self.cfg.learning_rate)
        if self.prev is not None:
            rel = (self.prev - loss) / max(abs(self.prev), 1e-300)
            self.flat = self.flat + 1 if rel < self.cfg.min_rel_improvement else 0
        self.prev = loss
        return self.flat >= self.cfg.stop_patience


def _check_targets(X, y):
    y = np.asarray(y).astype(int)
    if X.shape[0] != y.shape[0]:
        raise ValidationError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
    if not (np.any(y == 1) and np.any(y == 0)):
        raise ValidationError("training needs at least one sample of each class")
    return y


def init_mlp(n_inputs, n_hidden, seed, n_outputs=2) -> MlpNetwork:
    rng = np.random.default_rng(seed)
    a1, a2 = 1.0 / np.sqrt(n_inputs), 1.0 / np.sqrt(n_hidden)
    return MlpNetwork(rng.uniform(-a1, a1, (n_hidden, n_inputs)),
                      rng.uniform(-a2, a2, (n_outputs, n_hidden)),
                      np.zeros(n_hidden), np.zeros(n_outputs))


def train_mlp(cfg: TrainConfig, features, targets, hidden_units: int = 3) -> MlpNetwork:
    """Full-batch backpropagation on the cost-weighted squared error."""
    X = _as_array(features)
    y = _check_targets(X, targets)
    T, c = one_hot(y), cfg.cost.sample_weights(y)
    net = init_mlp(X.shape[1], hidden_units, cfg.seed)
    params = {k: getattr(net, k).copy() for k in
              ("input_to_hidden", "hidden_to_output", "hidden_bias", "output_bias")}
    stop = _PlateauStop(cfg)
    lr = cfg.learning_rate / float(c.mean())
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        net = MlpNetwork(**params)
        loss, grads = mlp_loss_and_grads(net, X, T, c)
        if stop.update(epoch, loss):
            break
        for k in params:
            params[k] = params[k] - lr * grads[k]
    net = MlpNetwork(**params, info={"epochs": epoch, "seed": cfg.seed,
                                     "config": cfg.to_dict()})
    if not all(np.all(np.isfinite(p)) for p in params.values()):
        raise TrainingDivergence(epoch, cfg.learning_rate, "non-finite weights")
    return net


@dataclass(frozen=True)
class KernelInit:
    """How RBF kernel centers are placed before training.

    ``kmeans_all``: k-means on all training rows.
    ``half_fixed_to_class``: half the kernels are copies of randomly chosen
    rows of ``fixed_class``; the rest come from k-means on all rows.
    ``kmeans_on_trimmed``: k-means on ``init_points`` (a class-balanced subset).
    """
    policy: str = "kmeans_all"
    n_kernels: int = 10
    trainable: bool = True
    fixed_class: Histology | None = None
    init_points: np.ndarray | None = field(default=None, compare=False)
    width_neighbors: int = 1

    def __post_init__(self):
        if self.policy not in ("kmeans_all", "half_fixed_to_class", "kmeans_on_trimmed"):
            raise ValidationError(f"unknown kernel-init policy {self.policy!r}")
        if self.n_kernels < 1:
            raise ValidationError("kernel count must be >= 1")


def nearest_center_widths(centers, neighbors: int = 1, X=None, floor: float = 1e-6):
    """sigma_j = mean distance to the ``neighbors`` nearest distinct other centers."""
    C = np.asarray(centers, float)
    K = C.shape[0]
    D = np.sqrt(_sq_dists(C, C))
    widths = np.empty(K)
    for j in range(K):
        d = np.sort(D[j][(np.arange(K) != j) & (D[j] > 1e-12)])
        if d.size:
            widths[j] = d[:neighbors].mean()
        elif X is not None and len(X):
            widths[j] = np.sqrt(((np.asarray(X) - C[j]) ** 2).sum(axis=1).mean())
        else:
            widths[j] = floor
    return np.maximum(widths, floor)


def init_kernels(X, init: KernelInit, seed: int, groups=None):
    rng = np.random.default_rng([seed, 7])
    K = init.n_kernels
    if K > X.shape[0]:
        raise ValidationError(f"{K} kernels but only {X.shape[0]} training rows")
    if init.policy == "kmeans_all":
        C = kmeans(X, K, seed)
    elif init.policy == "half_fixed_to_class":
        if groups is None or init.fixed_class is None:
            raise ValidationError("half_fixed_to_class needs a class and per-row histology")
        # compare enum members one by one; a numpy string array == enum is unreliable
        rows = np.array([i for i, g in enumerate(groups) if Histology(g) is init.fixed_class],
                        dtype=int)
        if rows.size == 0:
            raise ValidationError(f"class {init.fixed_class.value} absent from training set")
        n_fixed = min(K // 2, rows.size)
        fixed = X[rng.choice(rows, size=n_fixed, replace=False)]
        C = np.vstack([fixed, kmeans(X, K - n_fixed, seed)]) if K > n_fixed else fixed
    else:
        P = X if init.init_points is None else _as_array(init.init_points)
        if K > P.shape[0]:
            raise ValidationError(f"{K} kernels but only {P.shape[0]} trimmed rows")
        C = kmeans(P, K, seed)
    return C, nearest_center_widths(C, init.width_neighbors, X)


def _output_lipschitz(R, c):
    A = np.column_stack([R, np.ones(len(R))])
    H = 2.0 * (A * c[:, None]).T @ A / len(R)
    return float(np.linalg.eigvalsh(H)[-1])


def train_rbf(cfg: TrainConfig, features, targets, init: KernelInit | None = None,
              groups=None, kernel_lr_scale: float = 0.02) -> RbfNetwork:
    """Gradient descent on the cost-weighted squared error of an RBF network.

    The step is ``learning_rate / L`` where L is the largest curvature of the
    loss in the output weights at initialisation, so learning_rate in (0, 2)
    is stable for the output layer whatever the cost or kernel count.
    Centers and widths move at ``kernel_lr_scale`` times that step.
    Frozen kernels (``init.trainable`` false) are never touched.
    """
    init = init or KernelInit()
    X = _as_array(features)
    y = _check_targets(X, targets)
    if groups is None and hasattr(features, "histologies"):
        groups = features.histologies()
    T, c = one_hot(y), cfg.cost.sample_weights(y)
    C, S = init_kernels(X, init, cfg.seed, groups)
    rng = np.random.default_rng([cfg.seed, 11])
    W = rng.normal(0.0, 0.1, (2, C.shape[0]))
    b = np.full(2, 0.5)
    net = RbfNetwork(C, S, W, b, init.trainable)
    lr = cfg.learning_rate / max(_output_lipschitz(net.activations(X), c), 1e-12)
    params = {"centers": C, "widths": S, "output_weights": W, "output_bias": b}
    stop = _PlateauStop(cfg)
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        net = RbfNetwork(params["centers"], params["widths"], params["output_weights"],
                         params["output_bias"], init.trainable)
        loss, grads = rbf_loss_and_grads(net, X, T, c)
        if stop.update(epoch, loss):
            break
        for k, g in grads.items():
            step = lr if k.startswith("output") else lr * kernel_lr_scale
            params[k] = params[k] - step * g
        if init.trainable:
            params["widths"] = np.maximum(params["widths"], 1e-6)
    out = RbfNetwork(params["centers"], params["widths"], params["output_weights"],
                     params["output_bias"], init.trainable,
                     info={"epochs": epoch, "seed": cfg.seed, "config": cfg.to_dict(),
                           "init_policy": init.policy})
    if not np.all(np.isfinite(out.output_weights)):
        raise TrainingDivergence(epoch, cfg.learning_rate, "non-finite weights")
    return out


def linearly_separable(X, y) -> bool:
    """LP feasibility of s_i (w . x_i + b) >= 1."""
    X = np.asarray(X, float)
    s = np.where(np.asarray(y) == 1, 1.0, -1.0)
    A = -s[:, None] * np.column_stack([X, np.ones(len(X))])
    res = linprog(np.zeros(X.shape[1] + 1), A_ub=A, b_ub=-np.ones(len(X)),
                  bounds=[(None, None)] * (X.shape[1] + 1), method="highs")
    return res.status == 0


def train_logistic(features, targets, cost: CostPolicy | None = None, l2: float | None = None,
                   separable_l2: float = 1e-3, tol: float = 1e-8,
                   max_iter: int = 200) -> LogisticModel:
    """Maximise the cost-weighted log-likelihood.

    Ascent steps use the Newton direction with step halving, stopping when
    the gradient norm drops below ``tol``.  If the classes are linearly
    separable the unpenalised optimum is at infinity, so an L2 penalty of
    ``separable_l2`` is applied (with a warning) unless ``l2`` is given.
    """
    cost = cost or CostPolicy()
    X = _as_array(features)
    y = _check_targets(X, targets).astype(float)
    c = cost.sample_weights(y)
    n, p = X.shape
    if l2 is None:
        l2 = 0.0
        if linearly_separable(X, y):
            warnings.warn("classes are linearly separable; weights capped by an L2 penalty "
                          f"of {separable_l2}", RuntimeWarning, stacklevel=2)
            l2 = separable_l2
    A = np.column_stack([X, np.ones(n)])
    theta = np.zeros(p + 1)
    pen = np.r_[np.full(p, l2), 0.0]

    def evaluate(th):
        m = LogisticModel(th[:p], float(th[p]))
        obj, gw, gb = logistic_objective_and_grad(m, X, y, c, l2)
        return obj, np.r_[gw, gb]

    obj, g = evaluate(theta)
    it = 0
    for it in range(1, max_iter + 1):
        if np.linalg.norm(g) < tol:
            break
        pz = sigmoid(A @ theta)
        H = (A * (c * pz * (1 - pz))[:, None]).T @ A / n + np.diag(pen)
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(p + 1), g)
        except np.linalg.LinAlgError:
            step = g
        t = 1.0
        while t > 1e-10:
            new = theta + t * step
            new_obj, new_g = evaluate(new)
            if new_obj >= obj:
                break
            t *= 0.5
        else:
            break
        theta, obj, g = new, new_obj, new_g
        if not np.isfinite(obj):
            raise TrainingDivergence(it, 1.0, "logistic objective")
    return LogisticModel(theta[:p].copy(), float(theta[p]),
                         info={"iterations": it, "l2": l2, "grad_norm": float(np.linalg.norm(g)),
                               "cost": asdict(cost)})


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

#: Architecture presets: hidden units for MLPs, kernel init for RBFs.
PRESETS = {
    "mlp_pcs": {"family": "mlp", "hidden_units": 3},
    "mlp_reduced": {"family": "mlp", "hidden_units": 10},
    "rbf_pcs": {"family": "rbf", "init": KernelInit("kmeans_all", 3, trainable=True)},
    "rbf_algo1": {"family": "rbf", "init": KernelInit("kmeans_all", 10, trainable=True)},
    "rbf_algo2": {"family": "rbf", "init": KernelInit(
        "half_fixed_to_class", 10, trainable=False, fixed_class=Histology.NormalColumnar)},
    "rbf_one_step": {"family": "rbf", "init": KernelInit("kmeans_on_trimmed", 10,
                                                         trainable=False)},
    "logistic": {"family": "logistic"},
}


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _arr(a):
    return np.asarray(a, float).tolist()


def model_to_dict(model) -> dict:
    d = {"format": "cervispec-model", "version": FORMAT_VERSION, "kind": model.kind,
         "info": model.info}
    if model.kind == "logistic":
        d.update(weights=_arr(model.weights), bias=float(model.bias))
    elif model.kind == "mlp":
        d.update(input_to_hidden=_arr(model.input_to_hidden),
                 hidden_to_output=_arr(model.hidden_to_output),
                 hidden_bias=_arr(model.hidden_bias), output_bias=_arr(model.output_bias))
    elif model.kind == "rbf":
        d.update(centers=_arr(model.centers), widths=_arr(model.widths),
                 output_weights=_arr(model.output_weights), output_bias=_arr(model.output_bias),
                 kernels_trainable=bool(model.kernels_trainable))
    else:
        raise ValidationError(f"cannot serialise model kind {model.kind!r}")
    return d


def _mat(x):
    a = np.array(x, dtype=float)
    return a


def model_from_dict(d: dict):
    if d.get("format") != "cervispec-model":
        raise ValidationError("not a serialised model")
    if d.get("version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported model format version {d.get('version')}")
    info = d.get("info", {})
    kind = d["kind"]
    if kind == "logistic":
        return LogisticModel(_mat(d["weights"]), float(d["bias"]), info)
    if kind == "mlp":
        return MlpNetwork(_mat(d["input_to_hidden"]), _mat(d["hidden_to_output"]),
                          _mat(d["hidden_bias"]), _mat(d["output_bias"]), info)
    if kind == "rbf":
        C = _mat(d["centers"]).reshape(len(d["widths"]), -1)
        return RbfNetwork(C, _mat(d["widths"]),
                          _mat(d["output_weights"]).reshape(-1, len(d["widths"])),
                          _mat(d["output_bias"]), bool(d["kernels_trainable"]), info)
    raise ValidationError(f"unknown model kind {kind!r}")


def dump_model(model) -> str:
    return json.dumps(model_to_dict(model), indent=1, sort_keys=True)


def load_model(text: str):
    return model_from_dict(json.loads(text))
