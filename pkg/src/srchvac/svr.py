"""Epsilon-insensitive support vector regression with an RBF kernel."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, ParameterError
from .smo import KernelColumns, rbf_kernel, solve_smo

FORMAT_TAG = "svr-rbf 1"


@dataclass(frozen=True, eq=False)
class SvrModel:
    """Fitted regressor ``f(x) = sum_i coef_i K(sv_i, x) + bias``.

    ``dual_coeffs`` are the differences ``alpha_i - alpha*_i`` of the support
    vectors, so ``|dual_coeffs| <= C``.
    """

    support_vectors: np.ndarray
    dual_coeffs: np.ndarray
    bias: float
    gamma: float
    C: float
    epsilon: float
    # training-time diagnostics, not serialised
    support_index: np.ndarray | None = field(default=None, repr=False)
    kkt_gap: float = field(default=0.0, repr=False)

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    def decision(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.dim:
            raise ParameterError(f"expected {self.dim}-dimensional input, got {X.shape[1]}")
        if self.support_vectors.shape[0] == 0:
            out = np.full(X.shape[0], self.bias)
        else:
            out = rbf_kernel(X, self.support_vectors, self.gamma) @ self.dual_coeffs + self.bias
        return out[0] if single else out

    def save(self, path):
        """Text format::

            svr-rbf 1
            gamma <g>
            C <C>
            epsilon <e>
            bias <b>
            support_vectors <count> <dim>
            <coef> <x_1> ... <x_dim>     (one line per support vector)
        """
        lines = [FORMAT_TAG,
                 f"gamma {self.gamma!r}", f"C {self.C!r}", f"epsilon {self.epsilon!r}",
                 f"bias {float(self.bias)!r}",
                 f"support_vectors {self.support_vectors.shape[0]} {self.dim}"]
        for coef, sv in zip(self.dual_coeffs, self.support_vectors):
            lines.append(" ".join(repr(float(v)) for v in (coef, *sv)))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "SvrModel":
        lines = Path(path).read_text().splitlines()
        if not lines or lines[0].strip() != FORMAT_TAG:
            raise FormatError(f"{path}: not an '{FORMAT_TAG}' model file")
        head = {}
        for line in lines[1:6]:
            key, _, value = line.partition(" ")
            head[key] = value
        try:
            count, dim = (int(v) for v in head["support_vectors"].split())
            rows = np.array([[float(t) for t in line.split()] for line in lines[6:6 + count]])
            rows = rows.reshape(count, dim + 1)
            return cls(rows[:, 1:], rows[:, 0], float(head["bias"]),
                       float(head["gamma"]), float(head["C"]), float(head["epsilon"]))
        except (KeyError, ValueError) as exc:
            raise FormatError(f"{path}: {exc}") from None


def _as_inputs(xs) -> np.ndarray:
    X = np.asarray(xs, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _grid_step(C: float) -> float:
    return float(2.0 ** (np.floor(np.log2(C)) - 40))


def at_bound(model: SvrModel) -> np.ndarray:
    """Mask of support vectors whose coefficient sits at the box bound ``C``
    (within the two grid steps that exact balancing may remove)."""
    return np.abs(model.dual_coeffs) >= model.C - 2 * _grid_step(model.C)


def _balance(coef: np.ndarray, C: float) -> np.ndarray:
    """Snap ``coef`` to a power-of-two grid about ``C * 2**-40`` wide and
    shift the rounding residue onto the freest coefficients so that
    ``sum(coef) == 0`` holds exactly in floating point.

    Every value and partial sum is then a small integer multiple of the grid
    step, so summation in any order is exact.  Truncation toward zero keeps
    ``|coef| <= C``.  The change per coefficient is far below the solver
    tolerance.
    """
    unit = _grid_step(C)
    q = np.trunc(coef / unit)
    cap = np.floor(C / unit)
    excess = q.sum()
    # move existing coefficients only, never across zero; free ones first,
    # most room first, so bound coefficients stay at the bound if possible
    for pool in (np.abs(q) < cap, np.abs(q) <= cap):
        down = excess > 0
        room = np.where(q > 0, q - 1 if down else cap - q, cap + q if down else -q - 1)
        room[(q == 0) | ~pool] = 0
        for i in np.argsort(-room, kind="stable"):
            if excess == 0 or room[i] <= 0:
                break
            step = min(abs(excess), room[i])
            q[i] -= np.sign(excess) * step
            excess -= np.sign(excess) * step
    return q * unit


def svr_train(xs, ys, C: float = 1.0, gamma: float = 1.0, epsilon: float = 0.1,
              tol: float = 1e-3, cache_mb: float = 512.0) -> SvrModel:
    """Fit an epsilon-SVR by SMO on the ``2l``-variable dual.

    Variables ``0..l-1`` are the ``alpha_i`` (sign +1) and ``l..2l-1`` the
    ``alpha*_i`` (sign -1), with linear term ``epsilon - y`` and
    ``epsilon + y`` respectively.  ``tol`` bounds the final KKT violation.
    """
    X = _as_inputs(xs)
    z = np.asarray(ys, dtype=float).ravel()
    l = X.shape[0]
    if l < 2:
        raise ParameterError("svr_train needs at least two samples")
    if z.size != l:
        raise ParameterError(f"{l} inputs but {z.size} targets")
    if not np.all(np.isfinite(z)):
        raise DataError("targets contain non-finite values")
    if not np.all(np.isfinite(X)):
        raise DataError("inputs contain non-finite values")
    if C <= 0 or gamma <= 0 or epsilon < 0:
        raise ParameterError("need C > 0, gamma > 0, epsilon >= 0")

    kernel = KernelColumns(X, gamma, cache_mb)

    def kcol(t):
        col = kernel(t % l)
        return np.concatenate([col, col])

    y = np.concatenate([np.ones(l), -np.ones(l)])
    p = np.concatenate([epsilon - z, epsilon + z])
    diag = np.ones(2 * l)
    res = solve_smo(kcol, diag, y, p, C, eps=tol)
    coef = _balance(res.alpha[:l] - res.alpha[l:], C)
    sv = np.flatnonzero(coef != 0.0)
    return SvrModel(X[sv].copy(), coef[sv].copy(), -res.rho, gamma, C, epsilon,
                    support_index=sv, kkt_gap=res.gap)


def svr_predict(model: SvrModel, x):
    """Regression value(s) for one input vector or a matrix of rows."""
    return model.decision(x)


def svr_predict_class(model: SvrModel, x, threshold: float = 0.5):
    """``1`` where the regression value is ``>= threshold``, else ``0``."""
    out = np.asarray(svr_predict(model, x)) >= threshold
    return int(out) if out.ndim == 0 else out.astype(int)


def svr_grid_search(xs, ys, Cs=(0.1, 1, 10, 100), gammas=(0.01, 0.1, 1, 10),
                    epsilon: float = 0.1, folds: int = 3, seed: int = 0,
                    threshold: float | None = 0.5):
    """Pick ``(C, gamma)`` by k-fold cross-validation on the training data.

    With a ``threshold`` the score is thresholded accuracy (mean squared
    error breaks ties); with ``threshold=None`` only the squared error is
    used.  Returns ``(C, gamma, table)`` where ``table`` maps each pair to
    its ``(accuracy, mse)``.
    """
    from .dataset import stratified_folds

    X = _as_inputs(xs)
    z = np.asarray(ys, dtype=float)
    if threshold is not None:
        strata = (z >= threshold).astype(int)
    else:
        strata = np.zeros(z.size, dtype=int)
    counts = np.bincount(strata)
    k = min(folds, int(counts[counts > 0].min()))
    if k < 2:
        # too few samples of some class to cross-validate
        return Cs[0], gammas[0], {}
    splits = stratified_folds(strata, k, seed)
    table = {}
    for C, g in itertools.product(Cs, gammas):
        hits = 0
        sq = 0.0
        for tr, va in splits:
            m = svr_train(X[tr], z[tr], C, g, epsilon)
            pred = svr_predict(m, X[va])
            sq += float(np.sum((pred - z[va]) ** 2))
            if threshold is not None:
                hits += int(np.sum((pred >= threshold) == (z[va] >= threshold)))
        table[(C, g)] = (hits / z.size, sq / z.size)
    best = max(table, key=lambda key: (table[key][0], -table[key][1]))
    return best[0], best[1], table
