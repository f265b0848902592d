"""Random-feature kernels ``(1/p) E_W sigma(WX)^T sigma(WX)`` for quadratic activations.

For ``sigma(t) = a2 t^2 + a1 t`` the kernel splits into a term proportional
to ``X^T X`` with weight ``d1 = a1^2`` and a covariance-driven term with
weight ``d2 = 2 a2^2``. The second term is measured here only through the
part of the Monte-Carlo kernel that no multiple of ``X^T X`` explains
(:func:`covariance_term_residual`).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, DimensionError, ParameterError
from .etf import centering_matrix
from .gmm import LabeledDataset
from .linalg import SeedSpec, as_matrix, as_seed, haar_orthogonal, solve_ridge

MODES = ("plain", "etf")


@dataclass(frozen=True)
class PolyActivation:
    a1: float = 1.0
    a2: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.a1) and np.isfinite(self.a2)):
            raise ParameterError("activation coefficients must be finite")

    def __call__(self, t):
        return self.a2 * t * t + self.a1 * t


def poly_coeffs(act: PolyActivation) -> tuple[float, float]:
    """``(d1, d2) = (a1**2, 2 * a2**2)``."""
    return act.a1 ** 2, 2.0 * act.a2 ** 2


@dataclass(frozen=True)
class KernelEstimate:
    gram: np.ndarray
    draws: int
    projector_dim: int
    seed: SeedSpec
    mode: str = "plain"


def random_projector(m: int, p: int, seed, mode: str = "plain") -> np.ndarray:
    """One ``m x p`` random projector.

    ``plain``: ``sqrt(p/m) Q`` so that ``E[W^T W] = I``.
    ``etf``: ``sqrt(m/(m-1)) P_m Q``, the fixed-ETF-classifier form.
    """
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    if m > p:
        raise DimensionError(f"projector dimension m={m} exceeds p={p}")
    q = haar_orthogonal(m, p, seed)
    if mode == "plain":
        return np.sqrt(p / m) * q
    if m < 2:
        raise DimensionError("etf mode needs m >= 2")
    return np.sqrt(m / (m - 1)) * centering_matrix(m) @ q


def rf_kernel_mc(x, act: PolyActivation, m: int, draws: int, seed=SeedSpec(), mode: str = "plain") -> KernelEstimate:
    """Monte-Carlo estimate of the random-feature kernel for ``x`` (p x n).

    Draw ``j`` uses the stream ``seed.stream(j)``; draws are accumulated in
    index order so the estimate is bit-reproducible.
    """
    x = as_matrix(x, "x")
    p, n = x.shape
    if m < 1 or m > p:
        raise DimensionError(f"need 1 <= m <= p, got m={m}, p={p}")
    if draws < 1:
        raise ParameterError("draws must be >= 1")
    seed = as_seed(seed)
    acc = np.zeros((n, n))
    for j in range(draws):
        w = random_projector(m, p, seed.stream(j), mode)
        f = act(w @ x)
        acc += f.T @ f
    gram = acc / (p * draws)
    gram = 0.5 * (gram + gram.T)
    return KernelEstimate(gram, draws, m, seed, mode)


def linear_fit(gram, x) -> tuple[float, float]:
    """Best scalar ``c`` for ``gram ~ c X^T X`` and the relative residual."""
    x = as_matrix(x, "x")
    base = x.T @ x
    bn2 = float(np.sum(base * base))
    if bn2 == 0.0:
        raise DegeneracyError("X^T X is zero")
    gram = as_matrix(gram, "gram")
    if gram.shape != base.shape:
        raise DimensionError(f"gram {gram.shape} vs X^T X {base.shape}")
    c = float(np.sum(gram * base)) / bn2
    return c, float(np.linalg.norm(gram - c * base) / np.sqrt(bn2))


def covariance_term_residual(est, x) -> float:
    """``min_c ||K - c X^T X||_F / ||X^T X||_F`` for a kernel estimate ``K``."""
    gram = est.gram if isinstance(est, KernelEstimate) else est
    return linear_fit(gram, x)[1]


def _labels_onehot(labels, n):
    if isinstance(labels, LabeledDataset):
        onehot = labels.onehot
    else:
        labels = np.asarray(labels, dtype=np.int64).ravel()
        onehot = np.zeros((labels.size, labels.max() + 1))
        onehot[np.arange(labels.size), labels] = 1.0
    if onehot.shape[0] != n:
        raise DimensionError(f"{onehot.shape[0]} labels for {n} samples")
    return onehot


def train_test_split(n: int, split: float, seed) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < split < 1.0:
        raise ParameterError("split must lie strictly between 0 and 1")
    n_train = int(round(split * n))
    if n_train < 1 or n_train >= n:
        raise ParameterError(f"split {split} of {n} samples leaves an empty side")
    perm = as_seed(seed).rng().permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def mse_sweep(features, labels, a2_grid, m=None, draws=20, lam=1e-2, split=0.7,
              seed=SeedSpec(), mode="plain") -> list[tuple[float, float]]:
    """Test MSE of ridge regression on random features ``sigma(W x)/sqrt(p)``.

    ``sigma(t) = a2 t^2 + t``. Targets are one-hot class indicators; the
    error is the squared Euclidean distance between prediction and target,
    averaged over test samples and then over draws. Every grid point reuses
    the same projectors, so differences between grid points are paired.
    """
    x = as_matrix(features, "features")
    p, n = x.shape
    grid = [float(a) for a in a2_grid]
    if not grid:
        raise ParameterError("a2 grid is empty")
    m = p // 2 if m is None else m
    if draws < 1:
        raise ParameterError("draws must be >= 1")
    y = _labels_onehot(labels, n)
    seed = as_seed(seed)
    train, test = train_test_split(n, split, seed.child(0))
    proj_seed = seed.child(1)
    totals = np.zeros(len(grid))
    for j in range(draws):
        wx = random_projector(m, p, proj_seed.stream(j), mode) @ x
        for g, a2 in enumerate(grid):
            f = PolyActivation(1.0, a2)(wx).T / np.sqrt(p)
            beta = solve_ridge(f[train], y[train], lam)
            err = f[test] @ beta - y[test]
            totals[g] += np.mean(np.sum(err * err, axis=1))
    return list(zip(grid, (totals / draws).tolist()))


def parse_grid(text: str) -> list[float]:
    """Parse ``start:step:stop`` (both ends included) into a list of floats."""
    parts = text.replace("−", "-").split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:step:stop, got {text!r}")
    start, step, stop = (float(v) for v in parts)
    if start == stop:
        return [start]
    if step == 0 or (stop - start) / step < 0:
        raise ValueError(f"step {step} never reaches {stop} from {start}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    # snap tiny float drift (e.g. 5.551e-17 for zero) to the decimal grid
    return [float(np.round(start + i * step, 12)) for i in range(count)]


def save_sweep_csv(path, rows, draws, lam, seed) -> None:
    seed = as_seed(seed)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a2", "test_mse", "draws", "lambda", "seed"])
        for a2, mse in rows:
            w.writerow([repr(a2), repr(mse), draws, repr(float(lam)), f"{seed.base_seed}:{seed.stream_index}"])


def load_sweep_csv(path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        return [(float(r["a2"]), float(r["test_mse"])) for r in csv.DictReader(fh)]
