"""Simplex equiangular tight frame (ETF) classifier weights."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .linalg import SeedSpec, as_matrix, as_seed, haar_orthogonal, load_matrix_csv, save_matrix_csv

ETF_TOL = 1e-8


def centering_matrix(k: int) -> np.ndarray:
    """``I_k - (1/k) 1 1^T``."""
    if k < 2:
        raise DimensionError(f"centering_matrix needs k >= 2, got {k}")
    return np.eye(k) - np.full((k, k), 1.0 / k)


@dataclass(frozen=True)
class EtfClassifier:
    k: int
    p: int
    weights: np.ndarray
    seed: SeedSpec

    def __post_init__(self):
        self.weights.setflags(write=False)

    def save(self, csv_path, json_path=None):
        """Matrix CSV plus a JSON sidecar carrying the geometry and seed."""
        save_matrix_csv(csv_path, self.weights)
        if json_path is None:
            json_path = str(csv_path).rsplit(".", 1)[0] + ".json"
        meta = {"k": self.k, "p": self.p,
                "base_seed": int(self.seed.base_seed), "stream_index": int(self.seed.stream_index)}
        with open(json_path, "w") as fh:
            json.dump(meta, fh, indent=2)

    @classmethod
    def load(cls, csv_path, json_path=None):
        w = load_matrix_csv(csv_path)
        if json_path is None:
            json_path = str(csv_path).rsplit(".", 1)[0] + ".json"
        with open(json_path) as fh:
            meta = json.load(fh)
        if w.shape != (meta["k"], meta["p"]):
            raise DimensionError(f"weights {w.shape} disagree with sidecar k={meta['k']}, p={meta['p']}")
        return cls(meta["k"], meta["p"], w, SeedSpec(meta["base_seed"], meta["stream_index"]))


def make_etf(k: int, p: int, seed=SeedSpec(), q=None) -> EtfClassifier:
    """Fixed ETF weights ``sqrt(k/(k-1)) P Q`` with a Haar row-orthonormal Q.

    ``q`` overrides the random factor (it must be ``k x p`` with orthonormal
    rows); this is only meant for closed-form checks.
    """
    if k < 2:
        raise DimensionError(f"an ETF needs k >= 2 classes, got {k}")
    if k > p:
        raise DimensionError(f"make_etf needs k <= p, got k={k}, p={p}")
    seed = as_seed(seed)
    if q is None:
        q = haar_orthogonal(k, p, seed)
    else:
        q = as_matrix(q, "q")
        if q.shape != (k, p):
            raise DimensionError(f"q must be {k}x{p}, got {q.shape}")
    w = np.sqrt(k / (k - 1)) * centering_matrix(k) @ q
    return EtfClassifier(k, p, w, seed)


@dataclass(frozen=True)
class GeometryReport:
    k: int
    norm_deviation: float
    cosine_deviation: float
    gram_deviation: float

    @property
    def is_etf(self) -> bool:
        return max(self.norm_deviation, self.cosine_deviation, self.gram_deviation) < ETF_TOL

    def lines(self):
        return [
            f"k                 {self.k}",
            f"row norm dev      {self.norm_deviation:.3e}",
            f"pair cosine dev   {self.cosine_deviation:.3e}",
            f"gram dev          {self.gram_deviation:.3e}",
            f"is_etf            {self.is_etf}",
        ]


def verify_etf(w) -> GeometryReport:
    """Measure how far the rows of ``w`` are from a simplex ETF."""
    w = as_matrix(w, "w")
    k = w.shape[0]
    if k < 2:
        raise DimensionError("verify_etf needs at least two rows")
    norms = np.linalg.norm(w, axis=1)
    gram = w @ w.T
    safe = np.where(norms > 0, norms, 1.0)
    cos = gram / np.outer(safe, safe)
    off = ~np.eye(k, dtype=bool)
    target = -1.0 / (k - 1)
    ideal = (k / (k - 1)) * centering_matrix(k)
    return GeometryReport(
        k=k,
        norm_deviation=float(np.max(np.abs(norms - 1.0))),
        cosine_deviation=float(np.max(np.abs(cos[off] - target))),
        gram_deviation=float(np.max(np.abs(gram - ideal))),
    )
