"""Sparse-representation classification plus the kNN and kernel-SVM baselines.

A test sample is coded as a sparse combination of all training samples
(columns of the dictionary, optionally compressed by a projection matrix);
the class whose coefficients alone reconstruct the sample best wins.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import DataError, ParameterError
from .smo import KernelColumns, rbf_kernel, solve_smo
from .sparse import SparseSolution, basis_pursuit


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Training samples as unit-norm columns, tagged with their class."""

    matrix: np.ndarray  # n x N
    class_of_column: np.ndarray
    class_count: int
    column_norms: np.ndarray

    @property
    def raw(self) -> np.ndarray:
        """Columns at their original scale."""
        return self.matrix * self.column_norms

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True)
class SrcDecision:
    predicted_class: int
    per_class_residuals: np.ndarray
    coefficients: SparseSolution

    @property
    def converged(self) -> bool:
        return self.coefficients.converged


def build_dictionary(train: Dataset) -> Dictionary:
    if len(train) == 0:
        raise DataError("empty training set")
    norms = np.linalg.norm(train.X, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DataError(f"training sample {int(zero[0])} has zero norm")
    M = (train.X / norms[:, None]).T
    for a in (M, norms, train.y):
        a.setflags(write=False)
    return Dictionary(np.ascontiguousarray(M), train.y, train.class_count, norms)


def _unit_columns(B: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(B, axis=0)
    norms[norms == 0] = 1.0
    return B / norms


class SrcClassifier:
    """Projected dictionary cached for repeated decisions.

    Parameters
    ----------
    dictionary : Dictionary
    projection : ProjectionMatrix or array or None
        ``None`` means no compression.
    tol : float
        Residual bound handed to :func:`basis_pursuit`.
    normalize_projected : bool
        Rescale the projected dictionary columns and the projected sample to
        unit norm before solving.
    """

    def __init__(self, dictionary: Dictionary, projection=None, tol: float = 1e-4,
                 normalize_projected: bool = True, max_iter: int = 10_000):
        self.dictionary = dictionary
        R = getattr(projection, "R", projection)
        if R is not None:
            R = np.asarray(R, dtype=float)
            if R.shape[1] != dictionary.matrix.shape[0]:
                raise ParameterError(
                    f"projection is {R.shape[0]}x{R.shape[1]} but samples have "
                    f"dimension {dictionary.matrix.shape[0]}")
        self.R = R
        B = dictionary.matrix if R is None else R @ dictionary.matrix
        self.normalize_projected = normalize_projected
        self.B = _unit_columns(B) if normalize_projected else B
        self.tol = tol
        self.max_iter = max_iter
        cls = dictionary.class_of_column
        self._members = [np.flatnonzero(cls == c) for c in range(dictionary.class_count)]

    def project(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dictionary.matrix.shape[0],):
            raise ParameterError(
                f"sample has shape {y.shape}, expected ({self.dictionary.matrix.shape[0]},)")
        if not np.all(np.isfinite(y)):
            raise ParameterError("sample contains non-finite entries")
        norm = np.linalg.norm(y)
        if norm > 0:
            y = y / norm
        yp = y if self.R is None else self.R @ y
        if self.normalize_projected:
            pn = np.linalg.norm(yp)
            if pn > 0:
                yp = yp / pn
        return yp

    def decide(self, y) -> SrcDecision:
        yp = self.project(y)
        sol = basis_pursuit(self.B, yp, tol=self.tol, max_iter=self.max_iter)
        x = sol.coeffs
        res = np.empty(len(self._members))
        for c, idx in enumerate(self._members):
            res[c] = np.linalg.norm(yp - self.B[:, idx] @ x[idx])
        # argmin returns the lowest index on ties
        return SrcDecision(int(np.argmin(res)), res, sol)

    def predict(self, X) -> np.ndarray:
        return np.array([self.decide(row).predicted_class for row in np.atleast_2d(X)])


def classify(dictionary: Dictionary, R, y, tol: float = 1e-4,
             normalize_projected: bool = True) -> SrcDecision:
    """One-shot SRC decision for the sample ``y``; see :class:`SrcClassifier`."""
    return SrcClassifier(dictionary, R, tol, normalize_projected).decide(y)


# --------------------------------------------------------------------------
# baselines

def _vote(labels: np.ndarray, class_count: int) -> int:
    # argmax of bincount prefers the smallest class on ties
    return int(np.argmax(np.bincount(labels, minlength=class_count)))


def knn_predict(train: Dataset, X, k: int = 5, chunk: int = 512) -> np.ndarray:
    """Majority label of the ``k`` nearest (Euclidean) training samples.

    Equal distances are ordered by training index; equal vote counts go to
    the smallest class index.
    """
    if len(train) == 0:
        raise ParameterError("empty training set")
    if not 1 <= k <= len(train):
        raise ParameterError(f"k must lie in 1..{len(train)}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = train.X
    tsq = np.sum(T * T, axis=1)
    out = np.empty(X.shape[0], dtype=np.int64)
    for s in range(0, X.shape[0], chunk):
        Q = X[s:s + chunk]
        d2 = np.sum(Q * Q, axis=1)[:, None] + tsq[None, :] - 2.0 * Q @ T.T
        # exact ties need an exact distance; recompute the shortlist directly
        near = np.argsort(d2, axis=1, kind="stable")[:, :min(len(train), 4 * k + 8)]
        for r, q in enumerate(Q):
            cand = near[r]
            exact = np.sum((T[cand] - q) ** 2, axis=1)
            order = np.lexsort((cand, exact))[:k]
            out[s + r] = _vote(train.y[cand[order]], train.class_count)
    return out


def knn_classify(train: Dataset, y, k: int = 5) -> int:
    return int(knn_predict(train, np.asarray(y, dtype=float)[None, :], k)[0])


@dataclass(frozen=True, eq=False)
class SvmModel:
    """One-vs-rest RBF SVM; ``coef[c]`` holds ``y_i alpha_i`` of every
    training sample for the binary problem of class ``c``."""

    X: np.ndarray
    coef: np.ndarray  # class_count x N
    bias: np.ndarray  # class_count
    gamma: float
    C: float

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        used = np.flatnonzero(np.any(self.coef != 0, axis=0))
        K = rbf_kernel(X, self.X[used], self.gamma)
        return K @ self.coef[:, used].T + self.bias


def svm_train(train: Dataset, C: float = 1.0, gamma: float | None = None,
              tol: float = 1e-3, cache_mb: float = 1024.0) -> SvmModel:
    """Soft-margin RBF SVM, one binary problem per class; ``gamma`` defaults
    to ``1 / dim``."""
    if gamma is None:
        gamma = 1.0 / train.dim
    if C <= 0 or gamma <= 0:
        raise ParameterError("need C > 0 and gamma > 0")
    present = np.unique(train.y)
    if present.size < 2:
        raise ParameterError("SVM training needs at least two classes")
    kernel = KernelColumns(train.X, gamma, cache_mb)
    N = len(train)
    coef = np.zeros((train.class_count, N))
    bias = np.zeros(train.class_count)
    for c in range(train.class_count):
        y = np.where(train.y == c, 1.0, -1.0)
        res = solve_smo(kernel, kernel.diag, y, -np.ones(N), C, eps=tol)
        coef[c] = y * res.alpha
        bias[c] = -res.rho
    return SvmModel(train.X, coef, bias, gamma, C)


def svm_classify(model: SvmModel, y) -> int:
    return int(np.argmax(model.decision(y)[0]))


def svm_predict(model: SvmModel, X, chunk: int = 1024) -> np.ndarray:
    X = np.atleast_2d(X)
    return np.concatenate([np.argmax(model.decision(X[s:s + chunk]), axis=1)
                           for s in range(0, X.shape[0], chunk)])
