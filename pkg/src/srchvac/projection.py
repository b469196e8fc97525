"""Dimension-reduction matrices for sparse classification.

Three constructions are provided:

* ``gaussian`` - i.i.d. standard normal entries, rows scaled to unit norm;
* ``svd_random_columns`` - a random subset of left singular vectors of the
  training dictionary;
* ``svd_top_singular`` - the left singular vectors belonging to the largest
  singular values.  Among all projections with unit-norm rows this choice
  maximises the expected energy of the projected samples, see
  :func:`signal_power`.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError
from .sparse import svd

METHODS = ("gaussian", "svd_random_columns", "svd_top_singular")


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    R: np.ndarray
    method: str
    seed: int | None = None

    def __post_init__(self):
        R = np.array(self.R, dtype=float, copy=True)
        if R.ndim != 2:
            raise ParameterError("projection matrix must be 2-D")
        if self.method not in METHODS + ("identity", "custom"):
            raise ParameterError(f"unknown projection method {self.method!r}")
        R.setflags(write=False)
        object.__setattr__(self, "R", R)

    @property
    def d(self) -> int:
        return self.R.shape[0]

    @property
    def n(self) -> int:
        return self.R.shape[1]

    def __matmul__(self, other):
        return self.R @ other

    def to_csv(self, path):
        """Write as CSV with one ``# key=value`` header line."""
        seed = "" if self.seed is None else self.seed
        with open(path, "w") as fh:
            fh.write(f"# method={self.method},d={self.d},n={self.n},seed={seed}\n")
            np.savetxt(fh, self.R, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "ProjectionMatrix":
        text = Path(path).read_text()
        header, _, body = text.partition("\n")
        if not header.startswith("# "):
            raise FormatError(f"{path}: missing '# method=...' header")
        meta = dict(kv.split("=", 1) for kv in header[2:].strip().split(","))
        R = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
        if R.shape != (int(meta["d"]), int(meta["n"])):
            raise FormatError(f"{path}: header says {meta['d']}x{meta['n']}, data is {R.shape}")
        seed = int(meta["seed"]) if meta.get("seed") else None
        return cls(R, meta["method"], seed)


def _as_matrix(obj) -> np.ndarray:
    # a Dictionary contributes its raw (pre-normalisation) columns
    return np.asarray(getattr(obj, "raw", obj), dtype=float)


def retained_dim(n: int, fraction: float) -> int:
    """Projected dimension for a retained fraction of ``n`` (floor, minimum 1)."""
    if not 0 < fraction <= 1:
        raise ParameterError("retained fraction must lie in (0, 1]")
    return max(1, int(np.floor(fraction * n + 1e-9)))


def gaussian_projection(d: int, n: int, seed: int) -> ProjectionMatrix:
    if not 0 < d < n:
        raise ParameterError(f"need 0 < d < n, got d={d}, n={n}")
    R = np.random.default_rng(seed).standard_normal((d, n))
    R /= np.linalg.norm(R, axis=1, keepdims=True)
    return ProjectionMatrix(R, "gaussian", seed)


def svd_projection(matrix, d: int, selection: str = "svd_top_singular",
                   seed: int | None = None) -> ProjectionMatrix:
    """Rows are left singular vectors of the ``n x N`` dictionary ``matrix``.

    ``selection="svd_top_singular"`` takes those of the ``d`` largest
    singular values (ties resolved by first index); ``"svd_random_columns"``
    draws ``d`` of the thin-SVD columns uniformly with ``seed``.
    """
    A = _as_matrix(matrix)
    if selection in ("top", "top_singular"):
        selection = "svd_top_singular"
    if selection in ("random", "random_columns"):
        selection = "svd_random_columns"
    if selection not in ("svd_top_singular", "svd_random_columns"):
        raise ParameterError(f"unknown SVD selection {selection!r}")
    U, S, _ = svd(A)
    rank = int(np.count_nonzero(S > max(A.shape) * np.finfo(float).eps * S[0]))
    if not 0 < d <= rank:
        raise ParameterError(f"d={d} must lie in 1..rank, and the dictionary rank is {rank}")
    if selection == "svd_top_singular":
        # stable sort keeps first occurrence first among equal values
        cols = np.argsort(-S, kind="stable")[:d]
    else:
        if seed is None:
            raise ParameterError("svd_random_columns needs a seed")
        cols = np.random.default_rng(seed).choice(U.shape[1], d, replace=False)
    return ProjectionMatrix(U[:, cols].T, selection,
                            seed if selection == "svd_random_columns" else None)


def make_projection(method: str, matrix, d: int, seed: int | None = None) -> ProjectionMatrix:
    """Dispatch on ``method`` (one of :data:`METHODS`)."""
    A = _as_matrix(matrix)
    if method == "gaussian":
        return gaussian_projection(d, A.shape[0], seed if seed is not None else 0)
    return svd_projection(A, d, method, seed)


def signal_power(R, matrix) -> float:
    """Expected ``|R A x|^2`` for coefficients with identity covariance.

    Equals ``trace(R A A^T R^T) = trace(R U S^2 U^T R^T) = |R A|_F^2``.
    """
    R = np.asarray(getattr(R, "R", R), dtype=float)
    A = _as_matrix(matrix)
    if R.ndim != 2 or A.ndim != 2 or R.shape[1] != A.shape[0]:
        raise ParameterError(f"shape mismatch: R {R.shape}, dictionary {A.shape}")
    return float(np.sum((R @ A) ** 2))
