"""Pretrain on a source mixture, fine-tune on a target mixture, compare heads.

One *cell* is a (strategy, seed) pair. For a given seed every strategy sees
the same source sample, the same target domain and the same backbone
initialisation, so per-seed differences between strategies are paired.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DegeneracyError, NcLabError, ParameterError
from .gmm import GmmSpec, LabeledDataset, ShiftSpec, make_shifted_domain, random_spec, sample_gmm
from .linalg import SeedSpec, as_seed, save_matrix_csv
from .metrics import NcReport, nc_report, pooled_within_cov
from .mlp import HeadKind, MlpConfig, OptimizerSpec, TrainState, forward, init_head, init_state, train

STRATEGY_ORDER = (HeadKind.TRAINABLE, HeadKind.WHITENED, HeadKind.FIXED_ETF)
RESULT_COLUMNS = ("strategy", "seed", "domain_label", "pretrain_acc", "target_acc", "source_nc1", "target_nc1")


class ConfigError(NcLabError, ValueError):
    """An experiment config field is missing or invalid."""

    def __init__(self, field_name, message):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


def worker_count() -> int:
    """Worker cap from ``NC_LAB_THREADS`` (default: number of CPUs)."""
    raw = os.environ.get("NC_LAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentSpec:
    source: GmmSpec
    target: GmmSpec | ShiftSpec = ShiftSpec()
    strategies: tuple = STRATEGY_ORDER
    pretrain_opt: OptimizerSpec = OptimizerSpec(epochs=60)
    finetune_opt: OptimizerSpec = OptimizerSpec(epochs=30)
    n_source: int = 2000
    n_target_train: int = 400
    n_target_test: int = 1000
    seeds: tuple = tuple(SeedSpec(s) for s in range(5))
    target_head: HeadKind = HeadKind.TRAINABLE
    hidden_dims: tuple = (32,)
    feature_dim: int = 16
    whiten_finetune: bool = True

    def __post_init__(self):
        if not self.strategies:
            raise ConfigError("strategies", "at least one strategy is required")
        object.__setattr__(self, "strategies", tuple(HeadKind.parse(s) for s in self.strategies))
        if not self.seeds:
            raise ConfigError("seeds", "at least one seed is required")
        object.__setattr__(self, "seeds", tuple(as_seed(s) for s in self.seeds))
        object.__setattr__(self, "target_head", HeadKind.parse(self.target_head))
        if self.target_head is HeadKind.WHITENED:
            raise ConfigError("target_head", "must be trainable or fixed_etf")
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        for name in ("n_source", "n_target_train", "n_target_test"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if isinstance(self.target, GmmSpec) and (self.target.p, self.target.k) != (self.source.p, self.source.k):
            raise ConfigError("target", "target mixture must match the source dimension and class count")

    @property
    def domain_label(self) -> str:
        if isinstance(self.target, ShiftSpec):
            return "out_of_domain" if self.target.is_out_of_domain else "in_domain"
        return "explicit"

    def mlp_config(self, head, seed) -> MlpConfig:
        return MlpConfig(self.source.p, self.hidden_dims, self.feature_dim, self.source.k, head, seed)


@dataclass
class CellResult:
    strategy: HeadKind
    seed: SeedSpec
    domain_label: str
    pretrain_acc: float = float("nan")
    target_acc: float = float("nan")
    source_nc1: float = float("nan")
    target_nc1: float = float("nan")
    target_cov: np.ndarray | None = None
    source_log: list = field(default_factory=list)
    error: str | None = None

    def row(self) -> dict:
        return {"strategy": self.strategy.value, "seed": f"{self.seed.base_seed}:{self.seed.stream_index}",
                "domain_label": self.domain_label, "pretrain_acc": self.pretrain_acc,
                "target_acc": self.target_acc, "source_nc1": self.source_nc1, "target_nc1": self.target_nc1}


@dataclass
class ExperimentResult:
    cells: list

    def for_strategy(self, strategy) -> list:
        strategy = HeadKind.parse(strategy)
        return [c for c in self.cells if c.strategy is strategy and c.error is None]

    def median(self, strategy, metric: str) -> float:
        vals = [getattr(c, metric) for c in self.for_strategy(strategy)]
        return float(np.median(vals)) if vals else float("nan")

    def summary(self) -> list[dict]:
        out = []
        for s in dict.fromkeys(c.strategy for c in self.cells):
            out.append({"strategy": s.value, "cells": len(self.for_strategy(s)),
                        **{m: self.median(s, m) for m in RESULT_COLUMNS[3:]}})
        return out

    def failures(self) -> list:
        return [c for c in self.cells if c.error is not None]

    def write(self, out_dir) -> None:
        """``results.csv`` plus ``cov_<strategy>.csv`` (seed-averaged target C)."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "results.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
            w.writeheader()
            for c in self.cells:
                w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in c.row().items()})
        for s in dict.fromkeys(c.strategy for c in self.cells):
            covs = [c.target_cov for c in self.for_strategy(s) if c.target_cov is not None]
            if covs:
                save_matrix_csv(out / f"cov_{s.value}.csv", np.mean(covs, axis=0))


def pretrain(spec: ExperimentSpec, strategy, seed) -> tuple[TrainState, LabeledDataset]:
    """Train a fresh network with head ``strategy`` on a source sample.

    Returns the trained state and the source training set it saw.
    """
    seed = as_seed(seed)
    data = sample_gmm(spec.source, spec.n_source, seed.child(0))
    state = init_state(spec.mlp_config(strategy, seed.child(4)))
    return train(state, data, spec.pretrain_opt, seed.child(6)), data


def finetune(pretrained: TrainState, target_data: LabeledDataset, target_head, opt: OptimizerSpec,
             seed) -> TrainState:
    """Fine-tune every backbone layer (and the new head, if trainable) on target data.

    ``target_head`` is a head kind, which re-initialises the head for the
    target's class count, or ``"keep"`` to reuse the pretrained head as is.
    Optimiser momentum starts from zero either way.
    """
    seed = as_seed(seed)
    state = pretrained.copy()
    state.velocity = {}
    state.log = []
    state.epoch = 0
    if target_head != "keep":
        head = HeadKind.parse(target_head)
        cfg = replace(state.config, head=head, k=target_data.k)
        new_params, new_frozen, running = init_head(cfg, seed.child(0))
        state.params = {n: a for n, a in state.params.items() if not n.startswith("head.")}
        state.params.update(new_params)
        state.frozen = new_frozen
        state.running = running
        state.config = cfg
    return train(state, target_data, opt, seed.child(1))


def evaluate(state: TrainState, test_data: LabeledDataset) -> tuple[float, NcReport | None]:
    """Top-1 accuracy and the NC report of penultimate features.

    The report is None when some class has fewer than two test samples.
    """
    if test_data.n < 1:
        raise ParameterError("empty test set")
    feats, logits = forward(state, test_data.x.T)
    acc = float(np.mean(np.argmax(logits, axis=1) == test_data.labels))
    fds = LabeledDataset(feats.T, test_data.labels, test_data.k)
    w = state.head_weights if state.config.head is not HeadKind.WHITENED else None
    try:
        report = nc_report(fds, w)
    except DegeneracyError:
        report = None
    return acc, report


def target_domain(spec: ExperimentSpec, seed) -> GmmSpec:
    if isinstance(spec.target, GmmSpec):
        return spec.target
    return make_shifted_domain(spec.source, spec.target, as_seed(seed).child(1))


def run_cell(spec: ExperimentSpec, strategy, seed) -> CellResult:
    strategy = HeadKind.parse(strategy)
    seed = as_seed(seed)
    cell = CellResult(strategy, seed, spec.domain_label)
    try:
        state, source_data = pretrain(spec, strategy, seed)
        cell.pretrain_acc = state.log[-1].acc if state.log else float("nan")
        cell.source_nc1 = state.log[-1].nc1_trace if state.log else float("nan")
        cell.source_log = list(state.log)
        tgt = target_domain(spec, seed)
        tgt_train = sample_gmm(tgt, spec.n_target_train, seed.child(2))
        tgt_test = sample_gmm(tgt, spec.n_target_test, seed.child(3))
        head = spec.target_head
        if strategy is HeadKind.WHITENED and spec.whiten_finetune:
            head = HeadKind.WHITENED
        tuned = finetune(state, tgt_train, head, spec.finetune_opt, seed.child(5))
        cell.target_acc, report = evaluate(tuned, tgt_test)
        if report is not None:
            cell.target_nc1 = report.trace_ratio
            feats, _ = forward(tuned, tgt_test.x.T)
            cell.target_cov = pooled_within_cov(LabeledDataset(feats.T, tgt_test.labels, tgt_test.k))
    except NcLabError as exc:
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def run_experiment(spec: ExperimentSpec, out_dir=None, workers=None) -> ExperimentResult:
    """Run every (strategy, seed) cell; failures are recorded per cell."""
    grid = [(s, seed) for s in spec.strategies for seed in spec.seeds]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(lambda c: run_cell(spec, *c), grid))
    else:
        cells = [run_cell(spec, *c) for c in grid]
    result = ExperimentResult(cells)
    if out_dir is not None:
        result.write(out_dir)
    return result


# --- JSON configs -----------------------------------------------------------

def _opt_from(d, name, default):
    if d is None:
        return default
    try:
        return OptimizerSpec(**{**default.__dict__, **d})
    except (TypeError, ParameterError) as exc:
        raise ConfigError(name, str(exc)) from None


def _gmm_from(d, name) -> GmmSpec:
    if not isinstance(d, dict):
        raise ConfigError(name, "must be an object")
    try:
        if "random" in d:
            r = dict(d["random"])
            return random_spec(int(r.pop("k")), int(r.pop("p")), as_seed(r.pop("seed", 0)), **r)
        return GmmSpec.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(name, f"invalid mixture ({exc})") from None


def spec_from_dict(cfg: dict) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from parsed ``experiment.json`` content."""
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    known = {"source", "target", "strategies", "pretrain_opt", "finetune_opt", "n_source",
             "n_target_train", "n_target_test", "seeds", "target_head", "hidden_dims",
             "feature_dim", "whiten_finetune", "description"}
    extra = sorted(set(cfg) - known)
    if extra:
        raise ConfigError(extra[0], "unknown field")
    if "source" not in cfg:
        raise ConfigError("source", "required")
    source = _gmm_from(cfg["source"], "source")
    tgt = cfg.get("target", {"shift": {}})
    if isinstance(tgt, dict) and "shift" in tgt:
        try:
            target = ShiftSpec(**tgt["shift"])
        except (TypeError, ParameterError) as exc:
            raise ConfigError("target", str(exc)) from None
    else:
        target = _gmm_from(tgt, "target")
    kwargs = {}
    for name in ("n_source", "n_target_train", "n_target_test", "feature_dim"):
        if name in cfg:
            if not isinstance(cfg[name], int) or isinstance(cfg[name], bool):
                raise ConfigError(name, "must be an integer")
            kwargs[name] = cfg[name]
    for name in ("strategies", "target_head"):
        if name not in cfg:
            continue
        try:
            if name == "strategies":
                kwargs[name] = tuple(HeadKind.parse(s) for s in cfg[name])
            else:
                kwargs[name] = HeadKind.parse(cfg[name])
        except (ParameterError, TypeError) as exc:
            raise ConfigError(name, str(exc)) from None
    if "seeds" in cfg:
        try:
            kwargs["seeds"] = tuple(as_seed(s) for s in cfg["seeds"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("seeds", str(exc)) from None
    if "hidden_dims" in cfg:
        kwargs["hidden_dims"] = tuple(int(h) for h in cfg["hidden_dims"])
    if "whiten_finetune" in cfg:
        kwargs["whiten_finetune"] = bool(cfg["whiten_finetune"])
    kwargs["pretrain_opt"] = _opt_from(cfg.get("pretrain_opt"), "pretrain_opt", OptimizerSpec(epochs=60))
    kwargs["finetune_opt"] = _opt_from(cfg.get("finetune_opt"), "finetune_opt", OptimizerSpec(epochs=30))
    try:
        return ExperimentSpec(source=source, target=target, **kwargs)
    except NcLabError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("<root>", str(exc)) from None


def load_experiment(path) -> ExperimentSpec:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON ({exc})") from None
    return spec_from_dict(cfg)


def bundled_config(name: str) -> Path:
    """Path of a config shipped in ``nclab/configs``."""
    return Path(__file__).parent / "configs" / f"{name}.json"
