"""Dense float64 linear algebra and seeded randomness.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. Every
random draw goes through a :class:`SeedSpec`, so an operation called with the
same seed always returns the same bits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import DegeneracyError, DimensionError, NotPSDError

PSD_CLAMP = 1e-10
RANK_TOL = 1e-12

_UINT64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedSpec:
    """A reproducible random stream, addressed by ``(base_seed, stream_index)``."""

    base_seed: int = 0
    stream_index: int = 0

    def __post_init__(self):
        for name in ("base_seed", "stream_index"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _UINT64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v!r}")

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.base_seed), spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.PCG64(ss))

    def stream(self, offset: int) -> "SeedSpec":
        """Same base seed, stream index shifted by ``offset`` (wraps at 2**64)."""
        return SeedSpec(self.base_seed, (int(self.stream_index) + int(offset)) & _UINT64)

    def child(self, *path: int) -> "SeedSpec":
        """An independent stream keyed by an integer path below this one."""
        ss = np.random.SeedSequence(
            int(self.base_seed), spawn_key=(int(self.stream_index), *map(int, path))
        )
        base, stream = ss.generate_state(2, dtype=np.uint64)
        return SeedSpec(int(base), int(stream))


def as_seed(seed) -> SeedSpec:
    if isinstance(seed, SeedSpec):
        return seed
    if isinstance(seed, (tuple, list)):
        return SeedSpec(*seed)
    return SeedSpec(int(seed))


def as_matrix(a, name="matrix") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"{name} has an empty dimension: {m.shape}")
    return m


def gaussian_matrix(rows: int, cols: int, seed: SeedSpec) -> np.ndarray:
    """I.i.d. standard normal ``rows x cols`` matrix from the seeded stream."""
    if rows < 1 or cols < 1:
        raise DimensionError(f"dimensions must be >= 1, got ({rows}, {cols})")
    return as_seed(seed).rng().standard_normal((rows, cols))


def qr_decompose(a) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR with a nonnegative R diagonal.

    Raises :class:`DegeneracyError` when ``a`` is rank deficient, i.e. some
    ``|R_ii|`` is at most ``1e-12 * ||a||_F``.
    """
    a = as_matrix(a)
    n, d = a.shape
    if n < d:
        raise DimensionError(f"qr_decompose needs rows >= cols, got {a.shape}")
    q, r = np.linalg.qr(a, mode="reduced")
    diag = np.diag(r)
    scale = np.linalg.norm(a)
    if scale == 0.0 or np.any(np.abs(diag) <= RANK_TOL * scale):
        raise DegeneracyError("matrix is rank deficient")
    signs = np.where(diag < 0, -1.0, 1.0)
    return q * signs, r * signs[:, None]


def haar_orthogonal(k: int, p: int, seed: SeedSpec) -> np.ndarray:
    """First ``k`` rows of a Haar-distributed ``p x p`` orthogonal matrix.

    Built from the QR factorisation of a Gaussian ``p x k`` matrix. The sign
    of each R diagonal entry is folded into Q; without that correction the
    distribution is not Haar.
    """
    if not 1 <= k <= p:
        raise DimensionError(f"haar_orthogonal needs 1 <= k <= p, got k={k}, p={p}")
    q, _ = qr_decompose(gaussian_matrix(p, k, seed))
    return np.ascontiguousarray(q.T)


def solve_ridge(a, b, lam: float = 0.0) -> np.ndarray:
    """Ridge coefficients ``(a^T a + lam I)^{-1} a^T b`` via Cholesky.

    ``a`` holds one sample per row (n x d), ``b`` the targets (n x t).
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"row mismatch: a {a.shape} vs b {b.shape}")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    gram = a.T @ a
    if lam > 0:
        gram[np.diag_indices_from(gram)] += lam
    else:
        ev = np.linalg.eigvalsh(gram)
        if ev[0] <= RANK_TOL * max(ev[-1], 1.0):
            raise DegeneracyError("a^T a is singular; use lambda > 0")
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError("regularized Gram matrix is not positive definite") from exc
    return scipy.linalg.cho_solve(factor, a.T @ b)


def trace(a) -> float:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError("trace of a non-square matrix")
    return float(np.trace(a))


def frobenius(a) -> float:
    return float(np.linalg.norm(as_matrix(a)))


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a, "a"), as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a) -> np.ndarray:
    return np.ascontiguousarray(as_matrix(a).T)


def sym_sqrt(a, inverse: bool = False) -> np.ndarray:
    """Symmetric square root of a PSD matrix (eigenvalues below 0 are clamped).

    Eigenvalues under ``-1e-10`` raise :class:`NotPSDError`. With
    ``inverse=True`` the inverse root is returned, which additionally needs
    a strictly positive spectrum.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError("sym_sqrt of a non-square matrix")
    sym = 0.5 * (a + a.T)
    ev, vec = np.linalg.eigh(sym)
    if ev[0] < -PSD_CLAMP:
        raise NotPSDError(f"smallest eigenvalue {ev[0]:.3e} < -{PSD_CLAMP:g}")
    ev = np.clip(ev, 0.0, None)
    if inverse:
        if ev[0] <= 0.0:
            raise DegeneracyError("inverse square root of a singular matrix")
        root = 1.0 / np.sqrt(ev)
    else:
        root = np.sqrt(ev)
    return (vec * root) @ vec.T


def save_matrix_csv(path, a) -> None:
    """Write one matrix row per line with 17 significant digits."""
    a = as_matrix(a)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in a:
            w.writerow([repr(float(v)) for v in row])


def load_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            if rows and len(row) != len(rows[0]):
                raise ValueError(f"{Path(path).name}:{lineno}: ragged row ({len(row)} vs {len(rows[0])})")
            rows.append([float(v) for v in row])
    if not rows:
        raise DimensionError(f"{path}: empty matrix file")
    return np.array(rows, dtype=np.float64)
