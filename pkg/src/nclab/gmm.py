"""Gaussian-mixture style feature model and domain-shifted variants.

A sample of class ``a`` is ``mu_a + C_a^{1/2} z`` where ``z`` is uniform on
the sphere of radius ``sqrt(p)`` (so ``E[z z^T] = I``), or standard normal
when ``noise="gaussian"``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegeneracyError, DimensionError, NotPSDError, ParameterError
from .linalg import PSD_CLAMP, SeedSpec, as_matrix, as_seed, gaussian_matrix, haar_orthogonal, sym_sqrt

NOISE_KINDS = ("sphere", "gaussian")


@dataclass(frozen=True)
class GmmSpec:
    means: np.ndarray          # p x k, column a is mu_a
    covs: tuple                # k matrices, p x p
    priors: np.ndarray         # k weights summing to 1

    def __post_init__(self):
        means = as_matrix(self.means, "means")
        p, k = means.shape
        covs = tuple(as_matrix(c, "cov") for c in self.covs)
        if len(covs) != k:
            raise DimensionError(f"{len(covs)} covariances for {k} classes")
        for a, c in enumerate(covs):
            if c.shape != (p, p):
                raise DimensionError(f"cov {a} has shape {c.shape}, expected {(p, p)}")
            if np.max(np.abs(c - c.T)) > 1e-10 * max(1.0, np.max(np.abs(c))):
                raise NotPSDError(f"cov {a} is not symmetric")
            if np.linalg.eigvalsh(0.5 * (c + c.T))[0] < -PSD_CLAMP:
                raise NotPSDError(f"cov {a} is not positive semidefinite")
        priors = np.asarray(self.priors, dtype=np.float64).ravel()
        if priors.shape != (k,) or np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-12:
            raise ParameterError("priors must be k nonnegative reals summing to 1")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "priors", priors)

    @property
    def p(self) -> int:
        return self.means.shape[0]

    @property
    def k(self) -> int:
        return self.means.shape[1]

    def mixture_cov(self) -> np.ndarray:
        """Prior-weighted within-class covariance ``sum_a prior_a C_a``."""
        return sum(w * c for w, c in zip(self.priors, self.covs))

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "covs": [c.tolist() for c in self.covs],
                "priors": self.priors.tolist()}

    @classmethod
    def from_dict(cls, d) -> "GmmSpec":
        return cls(np.array(d["means"], dtype=float), tuple(np.array(c, dtype=float) for c in d["covs"]),
                   np.array(d["priors"], dtype=float))


def isotropic_spec(means, sigma2=1.0, priors=None) -> GmmSpec:
    means = as_matrix(means, "means")
    p, k = means.shape
    priors = np.full(k, 1.0 / k) if priors is None else priors
    return GmmSpec(means, tuple(sigma2 * np.eye(p) for _ in range(k)), priors)


def random_spec(k: int, p: int, seed, mean_norm=3.0, cov_trace_ratio=1.0, anisotropy=0.0) -> GmmSpec:
    """A random balanced mixture for experiments.

    Class means are ``mean_norm``-length random directions. Each class gets
    its own covariance with eigen-directions from a Haar draw and spectrum
    proportional to ``exp(-anisotropy * i / p)``, scaled so that
    ``tr(C_a) / p == cov_trace_ratio``.
    """
    if k < 1 or p < 1:
        raise DimensionError("k and p must be >= 1")
    seed = as_seed(seed)
    dirs = gaussian_matrix(p, k, seed.child(0))
    means = mean_norm * dirs / np.linalg.norm(dirs, axis=0)
    spectrum = np.exp(-anisotropy * np.arange(p) / p)
    spectrum *= cov_trace_ratio * p / spectrum.sum()
    covs = []
    for a in range(k):
        u = haar_orthogonal(p, p, seed.child(1, a))
        c = (u.T * spectrum) @ u
        covs.append(0.5 * (c + c.T))
    return GmmSpec(means, tuple(covs), np.full(k, 1.0 / k))


@dataclass(frozen=True)
class LabeledDataset:
    x: np.ndarray              # p x n, one sample per column
    labels: np.ndarray         # n ints in [0, k)
    k: int
    onehot: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = as_matrix(self.x, "x")
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if labels.shape[0] != x.shape[1]:
            raise DimensionError(f"{labels.shape[0]} labels for {x.shape[1]} samples")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ParameterError(f"labels must lie in [0, {self.k})")
        onehot = np.zeros((labels.size, self.k))
        onehot[np.arange(labels.size), labels] = 1.0
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "onehot", onehot)

    @property
    def p(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(self.x[:, idx], self.labels[idx], self.k)

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"f{i}" for i in range(self.p)] + ["label"])
            for col, lab in zip(self.x.T, self.labels):
                w.writerow([repr(float(v)) for v in col] + [int(lab)])

    @classmethod
    def load_csv(cls, path, k=None) -> "LabeledDataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            p = len(header) - 1
            if p < 1 or header[-1] != "label" or header[:-1] != [f"f{i}" for i in range(p)]:
                raise ValueError(f"{path}: header must be f0,...,f{{p-1}},label")
            feats, labels = [], []
            for lineno, row in enumerate(reader, 2):
                if not row:
                    continue
                if len(row) != p + 1:
                    raise ValueError(f"{path}:{lineno}: ragged row")
                feats.append([float(v) for v in row[:-1]])
                labels.append(int(row[-1]))
        labels = np.array(labels, dtype=np.int64)
        k = int(labels.max()) + 1 if k is None else k
        return cls(np.array(feats).T, labels, k)


def sample_sphere(p: int, n: int, seed) -> np.ndarray:
    """``p x n`` matrix whose columns are uniform on the radius-sqrt(p) sphere."""
    g = gaussian_matrix(p, n, seed)
    norms = np.linalg.norm(g, axis=0)
    if np.any(norms == 0):
        raise DegeneracyError("zero Gaussian column while sampling the sphere")
    return g * (np.sqrt(p) / norms)


def stratified_counts(priors, n: int, rng: np.random.Generator) -> np.ndarray:
    """Floor of ``n * prior`` plus the remainder given to the largest fractional parts.

    Ties among fractional parts are broken by a seeded random order.
    """
    raw = np.asarray(priors) * n
    counts = np.floor(raw).astype(np.int64)
    rem = n - counts.sum()
    if rem:
        frac = raw - counts
        tiebreak = rng.permutation(len(frac))
        order = np.lexsort((tiebreak, -frac))
        counts[order[:rem]] += 1
    return counts


def sample_gmm(spec: GmmSpec, n: int, seed, noise: str = "sphere") -> LabeledDataset:
    """Draw ``n`` labelled samples with exact (stratified) class counts."""
    if n < spec.k:
        raise ParameterError(f"need n >= k ({spec.k}), got {n}")
    if noise not in NOISE_KINDS:
        raise ParameterError(f"noise must be one of {NOISE_KINDS}")
    seed = as_seed(seed)
    rng = seed.child(0).rng()
    counts = stratified_counts(spec.priors, n, rng)
    labels = rng.permutation(np.repeat(np.arange(spec.k), counts))
    if noise == "sphere":
        z = sample_sphere(spec.p, n, seed.child(1))
    else:
        z = gaussian_matrix(spec.p, n, seed.child(1))
    x = spec.means[:, labels].copy()
    for a in range(spec.k):
        idx = labels == a
        if np.any(idx):
            x[:, idx] += sym_sqrt(spec.covs[a]) @ z[:, idx]
    return LabeledDataset(x, labels, spec.k)


@dataclass(frozen=True)
class ShiftSpec:
    rotation_strength: float = 0.0
    mean_offset: float = 0.0
    cov_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.rotation_strength <= 1.0:
            raise ParameterError("rotation_strength must lie in [0, 1]")
        if self.mean_offset < 0.0:
            raise ParameterError("mean_offset must be >= 0")
        if not self.cov_scale > 0.0:
            raise ParameterError("cov_scale must be > 0")

    @property
    def is_out_of_domain(self) -> bool:
        return self.rotation_strength >= 0.5 or self.mean_offset >= 1.0


def interpolated_rotation(p: int, strength: float, seed) -> np.ndarray:
    """Rotation on the geodesic from ``I`` (strength 0) to a Haar draw (strength 1).

    The Haar draw is forced into SO(p) by flipping one row when its
    determinant is -1, then ``exp(strength * log(H))`` is taken.
    """
    h = haar_orthogonal(p, p, seed)
    if strength == 0.0:
        return np.eye(p)
    if np.linalg.det(h) < 0:
        h[0] = -h[0]
    if strength == 1.0:
        return h
    log_h = np.real(scipy.linalg.logm(h))
    log_h = 0.5 * (log_h - log_h.T)
    return scipy.linalg.expm(strength * log_h)


def make_shifted_domain(spec: GmmSpec, shift: ShiftSpec, seed) -> GmmSpec:
    """Rotate, translate and rescale a mixture to create a target domain.

    Means become ``R mu_a + mean_offset * u`` for one shared random unit
    vector ``u``; covariances become ``cov_scale * R C_a R^T``.
    """
    if not isinstance(shift, ShiftSpec):
        shift = ShiftSpec(*shift)
    seed = as_seed(seed)
    r = interpolated_rotation(spec.p, shift.rotation_strength, seed.child(0))
    u = gaussian_matrix(spec.p, 1, seed.child(1))
    u /= np.linalg.norm(u)
    means = r @ spec.means + shift.mean_offset * u
    covs = []
    for c in spec.covs:
        rc = shift.cov_scale * (r @ c @ r.T)
        covs.append(0.5 * (rc + rc.T))
    return GmmSpec(means, tuple(covs), spec.priors.copy())
