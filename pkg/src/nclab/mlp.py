"""A small ReLU network with hand-written backprop and three classifier heads.

Heads:

* ``trainable`` -- an ordinary linear layer with bias.
* ``fixed_etf`` -- simplex ETF weights, frozen at construction, no bias.
* ``whitened`` -- batch ZCA whitening of the features followed by a linear
  layer. A simplified stand-in for Switchable Whitening: it only whitens,
  it does not switch between normalisers.

Samples are rows here (``n x input_dim``), unlike :mod:`nclab.gmm` where they
are columns.
"""

from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DegeneracyError, DimensionError, ParameterError, TrainingDivergedError
from .etf import make_etf
from .gmm import LabeledDataset
from .linalg import SeedSpec, as_seed, load_matrix_csv, save_matrix_csv
from .metrics import nc1_trace

ZCA_EPS = 1e-5
RUNNING_MOMENTUM = 0.9


class HeadKind(str, Enum):
    TRAINABLE = "trainable"
    FIXED_ETF = "fixed_etf"
    WHITENED = "whitened"

    @classmethod
    def parse(cls, value) -> "HeadKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"fixed": "fixed_etf", "etf": "fixed_etf", "sw": "whitened", "zca": "whitened"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ParameterError(f"unknown head kind {value!r}") from None


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden_dims: tuple = (32,)
    feature_dim: int = 16
    k: int = 4
    head: HeadKind = HeadKind.TRAINABLE
    seed: SeedSpec = SeedSpec()

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        object.__setattr__(self, "head", HeadKind.parse(self.head))
        object.__setattr__(self, "seed", as_seed(self.seed))
        dims = (self.input_dim, *self.hidden_dims, self.feature_dim)
        if any(d < 1 for d in dims):
            raise DimensionError(f"all layer widths must be >= 1, got {dims}")
        if self.k < 2:
            raise DimensionError("need k >= 2 classes")
        if self.head is HeadKind.FIXED_ETF and self.k > self.feature_dim:
            raise DimensionError("a fixed ETF head needs k <= feature_dim")

    @property
    def n_layers(self) -> int:
        return len(self.hidden_dims) + 1

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden_dims": list(self.hidden_dims),
                "feature_dim": self.feature_dim, "k": self.k, "head": self.head.value,
                "seed": [int(self.seed.base_seed), int(self.seed.stream_index)]}

    @classmethod
    def from_dict(cls, d) -> "MlpConfig":
        return cls(d["input_dim"], tuple(d.get("hidden_dims", (32,))), d.get("feature_dim", 16),
                   d.get("k", 4), d.get("head", "trainable"), as_seed(d.get("seed", 0)))


@dataclass(frozen=True)
class OptimizerSpec:
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 2e-4
    batch_size: int = 128
    epochs: int = 60

    def __post_init__(self):
        if not self.lr >= 0:
            raise ParameterError("lr must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ParameterError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ParameterError("weight_decay must be >= 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ParameterError("batch_size must be >= 1 and epochs >= 0")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    acc: float
    nc1_trace: float


@dataclass
class TrainState:
    config: MlpConfig
    params: dict                       # trainable arrays only
    frozen: dict = field(default_factory=dict)
    velocity: dict = field(default_factory=dict)
    running: dict = field(default_factory=dict)   # whitening statistics
    epoch: int = 0
    log: list = field(default_factory=list)

    @property
    def head_weights(self) -> np.ndarray:
        return self.frozen.get("head.weight", self.params.get("head.weight"))

    def copy(self) -> "TrainState":
        new = copy.deepcopy(self)
        for arr in new.frozen.values():
            arr.setflags(write=False)
        return new

    def save(self, directory) -> None:
        """JSON manifest plus one matrix CSV per array and ``train-log.csv``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        arrays = {}
        for group in ("params", "frozen", "velocity", "running"):
            for name, arr in getattr(self, group).items():
                fname = f"{group}.{name}.csv"
                save_matrix_csv(d / fname, np.atleast_2d(arr))
                arrays[f"{group}/{name}"] = {"file": fname, "shape": list(np.shape(arr))}
        manifest = {"config": self.config.to_dict(), "epoch": self.epoch, "arrays": arrays}
        (d / "manifest.json").write_text(json.dumps(manifest, indent=2))
        save_log_csv(d / "train-log.csv", self.log)

    @classmethod
    def load(cls, directory) -> "TrainState":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        state = cls(MlpConfig.from_dict(manifest["config"]), {}, epoch=manifest["epoch"])
        for key, info in manifest["arrays"].items():
            group, name = key.split("/", 1)
            arr = load_matrix_csv(d / info["file"]).reshape(info["shape"])
            getattr(state, group)[name] = arr
        if "head.weight" in state.frozen:
            state.frozen["head.weight"].setflags(write=False)
        log_path = d / "train-log.csv"
        if log_path.exists():
            state.log = load_log_csv(log_path)
        return state


def save_log_csv(path, log) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss", "acc", "nc1_trace"])
        for r in log:
            w.writerow([r.epoch, repr(r.loss), repr(r.acc), repr(r.nc1_trace)])


def load_log_csv(path) -> list:
    with open(path, newline="") as fh:
        return [EpochRecord(int(r["epoch"]), float(r["loss"]), float(r["acc"]), float(r["nc1_trace"]))
                for r in csv.DictReader(fh)]


def _uniform_layer(rng, fan_in, fan_out):
    bound = 1.0 / math.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
    b = rng.uniform(-bound, bound, size=fan_out)
    return w, b


def init_head(config: MlpConfig, seed) -> tuple[dict, dict, dict]:
    """Fresh head parameters: (trainable, frozen, running statistics)."""
    seed = as_seed(seed)
    if config.head is HeadKind.FIXED_ETF:
        w = make_etf(config.k, config.feature_dim, seed).weights.copy()
        w.setflags(write=False)
        return {}, {"head.weight": w}, {}
    w, b = _uniform_layer(seed.rng(), config.feature_dim, config.k)
    running = {}
    if config.head is HeadKind.WHITENED:
        running = {"mean": np.zeros(config.feature_dim), "cov": np.eye(config.feature_dim)}
    return {"head.weight": w, "head.bias": b}, {}, running


def init_state(config: MlpConfig) -> TrainState:
    """Backbone layers drawn uniform in ``+-1/sqrt(fan_in)``, head per kind."""
    rng = config.seed.child(0).rng()
    dims = (config.input_dim, *config.hidden_dims, config.feature_dim)
    params = {}
    for i in range(config.n_layers):
        w, b = _uniform_layer(rng, dims[i], dims[i + 1])
        params[f"layer{i}.weight"] = w
        params[f"layer{i}.bias"] = b
    head, frozen, running = init_head(config, config.seed.child(1))
    params.update(head)
    return TrainState(config, params, frozen, running=running)


def _as_batch(state, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != state.config.input_dim:
        raise DimensionError(f"batch must be n x {state.config.input_dim}, got {x.shape}")
    return x


def _inv_sqrt_parts(cov):
    ev, vec = np.linalg.eigh(0.5 * (cov + cov.T) + ZCA_EPS * np.eye(cov.shape[0]))
    if ev[0] <= 0:
        raise DegeneracyError("whitening covariance is not positive definite")
    return ev, vec


def _forward(state, x, train):
    cfg = state.config
    p = {**state.params, **state.frozen}
    acts = [x]
    pre = []
    h = x
    for i in range(cfg.n_layers):
        z = h @ p[f"layer{i}.weight"].T + p[f"layer{i}.bias"]
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    cache = {"acts": acts, "pre": pre}
    head_in = h
    if cfg.head is HeadKind.WHITENED:
        if train:
            if h.shape[0] < 2:
                raise DegeneracyError("whitened head needs a batch of at least 2 samples")
            mu = h.mean(axis=0)
            hc = h - mu
            cov = hc.T @ hc / h.shape[0]
        else:
            mu, cov = state.running["mean"], state.running["cov"]
            hc = h - mu
        ev, vec = _inv_sqrt_parts(cov)
        s = (vec / np.sqrt(ev)) @ vec.T
        head_in = hc @ s
        cache.update(hc=hc, s=s, ev=ev, vec=vec, mu=mu, cov=cov)
    logits = head_in @ p["head.weight"].T
    if "head.bias" in p:
        logits = logits + p["head.bias"]
    cache["head_in"] = head_in
    return h, logits, cache


def forward(state: TrainState, x_batch, train: bool = False):
    """Return ``(features, logits)``.

    ``train=True`` whitens with the batch's own statistics (needs >= 2
    rows); otherwise the running averages collected during training are used.
    """
    feats, logits, _ = _forward(state, _as_batch(state, x_batch), train)
    return feats, logits


def softmax_xent(logits, labels):
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    logp = z - logsum[:, None]
    n = logits.shape[0]
    loss = -float(np.mean(logp[np.arange(n), labels]))
    probs = np.exp(logp)
    return loss, probs


def _whiten_backward(d_head_in, cache):
    hc, s, ev, vec = cache["hc"], cache["s"], cache["ev"], cache["vec"]
    n = hc.shape[0]
    d_hc = d_head_in @ s
    g = hc.T @ d_head_in
    # derivative of A -> A^{-1/2}: divided differences of t^{-1/2} in the eigenbasis
    r = np.sqrt(ev)
    f = -1.0 / (np.outer(r, r) * (r[:, None] + r[None, :]))
    g_a = vec @ (f * (vec.T @ g @ vec)) @ vec.T
    d_hc += hc @ (g_a + g_a.T) / n
    return d_hc - d_hc.mean(axis=0)


def loss_and_grads(state: TrainState, x_batch, labels, train: bool = True):
    """Mean softmax cross-entropy and gradients for every trainable array.

    Frozen arrays (the fixed ETF head) get no entry in the gradient dict.
    """
    loss, grads, _ = _loss_and_grads(state, x_batch, labels, train)
    return loss, grads


def _loss_and_grads(state, x_batch, labels, train):
    cfg = state.config
    x = _as_batch(state, x_batch)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.shape[0] != x.shape[0]:
        raise DimensionError("one label per sample required")
    if labels.min() < 0 or labels.max() >= cfg.k:
        raise ParameterError(f"labels must lie in [0, {cfg.k})")
    _, logits, cache = _forward(state, x, train)
    loss, probs = softmax_xent(logits, labels)
    n = x.shape[0]
    d_logits = probs
    d_logits[np.arange(n), labels] -= 1.0
    d_logits /= n

    grads = {}
    w_head = state.head_weights
    if "head.weight" in state.params:
        grads["head.weight"] = d_logits.T @ cache["head_in"]
        grads["head.bias"] = d_logits.sum(axis=0)
    d_h = d_logits @ w_head
    if cfg.head is HeadKind.WHITENED:
        if train:
            d_h = _whiten_backward(d_h, cache)
        else:
            d_h = d_h @ cache["s"]

    acts, pre = cache["acts"], cache["pre"]
    for i in reversed(range(cfg.n_layers)):
        d_z = d_h * (pre[i] > 0)
        grads[f"layer{i}.weight"] = d_z.T @ acts[i]
        grads[f"layer{i}.bias"] = d_z.sum(axis=0)
        if i:
            d_h = d_z @ state.params[f"layer{i}.weight"]
    return loss, grads, cache


def predict(state: TrainState, x) -> np.ndarray:
    return np.argmax(forward(state, x)[1], axis=1)


def features_dataset(state: TrainState, ds: LabeledDataset) -> LabeledDataset:
    """Penultimate features of ``ds`` as a new (feature_dim x n) dataset."""
    feats, _ = forward(state, ds.x.T)
    return LabeledDataset(feats.T, ds.labels, ds.k)


def epoch_metrics(state: TrainState, ds: LabeledDataset) -> EpochRecord:
    feats, logits = forward(state, ds.x.T)
    loss, _ = softmax_xent(logits, ds.labels)
    acc = float(np.mean(np.argmax(logits, axis=1) == ds.labels))
    try:
        nc1 = nc1_trace(LabeledDataset(feats.T, ds.labels, ds.k))
    except DegeneracyError:
        nc1 = float("nan")
    return EpochRecord(state.epoch, loss, acc, nc1)


def _batches(n, batch_size, rng, min_size):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = perm[start:start + batch_size]
        if idx.size >= min_size:
            yield idx


def train(state: TrainState, dataset: LabeledDataset, opt: OptimizerSpec, seed=None) -> TrainState:
    """SGD with momentum and decoupled weight decay; returns a new state.

    Batch order is drawn from ``seed`` (default: the config seed) and the
    epoch number. After each epoch the whole training set is evaluated and
    an :class:`EpochRecord` is appended to the log.
    """
    if dataset.n < 1:
        raise ParameterError("empty training set")
    if dataset.p != state.config.input_dim or dataset.k != state.config.k:
        raise DimensionError(f"dataset (p={dataset.p}, k={dataset.k}) does not fit the network")
    state = state.copy()
    seed = as_seed(seed) if seed is not None else state.config.seed.child(2)
    x, y = dataset.x.T, dataset.labels
    whitened = state.config.head is HeadKind.WHITENED
    for name, arr in state.params.items():
        state.velocity.setdefault(name, np.zeros_like(arr))
    for _ in range(opt.epochs):
        epoch = state.epoch + 1
        rng = seed.child(epoch).rng()
        for idx in _batches(dataset.n, opt.batch_size, rng, 2 if whitened else 1):
            loss, grads, cache = _loss_and_grads(state, x[idx], y[idx], True)
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch)
            if whitened:
                m = RUNNING_MOMENTUM
                state.running["mean"] = m * state.running["mean"] + (1 - m) * cache["mu"]
                state.running["cov"] = m * state.running["cov"] + (1 - m) * cache["cov"]
            for name, g in grads.items():
                v = state.velocity[name]
                v *= opt.momentum
                v += g
                param = state.params[name]
                param -= opt.lr * v
                if opt.weight_decay:
                    param -= opt.lr * opt.weight_decay * param
        state.epoch = epoch
        rec = epoch_metrics(state, dataset)
        if not math.isfinite(rec.loss) or not all(np.all(np.isfinite(a)) for a in state.params.values()):
            raise TrainingDivergedError(epoch)
        state.log.append(rec)
    return state

