"""Neural-collapse diagnostics on a labelled feature set."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, DimensionError
from .gmm import LabeledDataset
from .linalg import as_matrix


@dataclass(frozen=True)
class NcReport:
    trace_ratio: float
    nc2_deviation: float
    nc3_alignment: float | None    # None when no classifier was supplied
    class_means: np.ndarray

    def rows(self):
        return [("trace_ratio", self.trace_ratio),
                ("nc2_deviation", self.nc2_deviation),
                ("nc3_alignment", self.nc3_alignment)]

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "value"])
            for name, value in self.rows():
                w.writerow([name, "" if value is None else repr(float(value))])


def class_means(ds: LabeledDataset) -> np.ndarray:
    counts = ds.counts()
    if np.any(counts < 1):
        raise DegeneracyError(f"empty classes: {np.flatnonzero(counts < 1).tolist()}")
    sums = ds.x @ ds.onehot
    return sums / counts


def pooled_within_cov(ds: LabeledDataset) -> np.ndarray:
    """``sum_a (n_a/n) C_a`` with each ``C_a`` normalised by ``1/n_a``.

    The weighting cancels to ``(1/n) sum_i (x_i - m_{y_i})(x_i - m_{y_i})^T``.
    """
    counts = ds.counts()
    if np.any(counts < 2):
        raise DegeneracyError(f"classes with fewer than 2 samples: {np.flatnonzero(counts < 2).tolist()}")
    centered = ds.x - class_means(ds)[:, ds.labels]
    cov = centered @ centered.T / ds.n
    return 0.5 * (cov + cov.T)


def nc1_trace(ds: LabeledDataset) -> float:
    """``(1/p) tr C``, the within-class variability metric."""
    return float(np.trace(pooled_within_cov(ds))) / ds.p


def _centered_means(means) -> np.ndarray:
    means = as_matrix(means, "means")
    return means - means.mean(axis=1, keepdims=True)


def nc2_deviation(means) -> float:
    """Worst gap between pairwise cosines of centred means and ``-1/(k-1)``."""
    centered = _centered_means(means)
    k = centered.shape[1]
    if k < 2:
        raise DimensionError("nc2_deviation needs at least two class means")
    norms = np.linalg.norm(centered, axis=0)
    ref = np.linalg.norm(as_matrix(means), axis=0).max()
    if ref == 0.0 or np.any(norms <= 1e-12 * ref):
        raise DegeneracyError("a centered class mean has zero norm")
    unit = centered / norms
    cos = unit.T @ unit
    off = ~np.eye(k, dtype=bool)
    return float(np.max(np.abs(cos[off] + 1.0 / (k - 1))))


def nc3_alignment(w, means) -> float:
    """``|| W/||W||_F - M~^T/||M~||_F ||_F`` for classifier ``w`` (k x p)."""
    w = as_matrix(w, "w")
    centered = _centered_means(means)
    if w.shape != centered.T.shape:
        raise DimensionError(f"w is {w.shape} but means are {centered.shape}")
    wn = np.linalg.norm(w)
    mn = np.linalg.norm(centered)
    if wn == 0.0 or mn == 0.0:
        raise DegeneracyError("zero-norm classifier or centered means")
    return float(np.linalg.norm(w / wn - centered.T / mn))


def nc_report(ds: LabeledDataset, w=None) -> NcReport:
    """All metrics at once; ``nc3_alignment`` is left as None without ``w``."""
    means = class_means(ds)
    nc3 = nc3_alignment(w, means) if w is not None else None
    return NcReport(nc1_trace(ds), nc2_deviation(means), nc3, means)
