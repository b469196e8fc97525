"""Sequential minimal optimisation for the box-constrained SVM dual

    min_a  0.5 a^T Q a + p^T a   s.t.  y^T a = const,  0 <= a_i <= C_i,

with ``y_i`` in {-1, +1} and ``Q_ij = y_i y_j K_ij``.  Working pairs are chosen
by maximal violation for the first index and by second-order gain for the
second (Fan, Chen & Lin, JMLR 2005).  Both the C-SVC and the epsilon-SVR duals
reduce to this form.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

TAU = 1e-12


def rbf_kernel(X, Z, gamma: float) -> np.ndarray:
    """``exp(-gamma |x - z|^2)`` for every row pair."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    # centring keeps the expanded square accurate and translation invariant
    center = Z.mean(axis=0)
    X = X - center
    Z = Z - center
    d2 = (np.sum(X * X, axis=1)[:, None] + np.sum(Z * Z, axis=1)[None, :]
          - 2.0 * X @ Z.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


class KernelColumns:
    """Kernel columns ``K[:, i]`` for a fixed sample matrix.

    The full matrix is built up front when it fits in ``cache_mb``;
    otherwise columns are computed on demand and kept in an LRU cache.
    """

    def __init__(self, X, gamma: float, cache_mb: float = 1024.0):
        X = np.asarray(X, dtype=float)
        self.X = X - X.mean(axis=0)
        self.gamma = gamma
        l = self.X.shape[0]
        self._sq = np.sum(self.X * self.X, axis=1)
        self._full = None
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self._max_cols = max(2, int(cache_mb * 2**20 / (8 * max(l, 1))))
        if l * l * 8 <= cache_mb * 2**20:
            self._full = rbf_kernel(self.X, self.X, gamma)
        self.diag = np.ones(l)

    def __call__(self, i: int) -> np.ndarray:
        if self._full is not None:
            return self._full[:, i]
        col = self._cache.get(i)
        if col is None:
            d2 = self._sq + self._sq[i] - 2.0 * self.X @ self.X[i]
            col = np.exp(-self.gamma * np.maximum(d2, 0.0))
            self._cache[i] = col
            if len(self._cache) > self._max_cols:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(i)
        return col


@dataclass
class SmoResult:
    alpha: np.ndarray
    rho: float
    gap: float
    iterations: int
    converged: bool


def solve_smo(kcol, diag, y, p, C, alpha0=None, eps: float = 1e-3,
              max_iter: int | None = None) -> SmoResult:
    """Run SMO on a problem with ``m`` variables.

    Parameters
    ----------
    kcol : callable
        ``kcol(t)`` returns the length-``m`` column ``K[:, t]`` (the *unsigned*
        kernel; signs come from ``y``).
    diag : array
        ``K[t, t]`` for every variable.
    y : array of +-1
    p : array
        Linear term.
    C : float or array
        Upper bounds.
    eps : float
        Stop when the maximal KKT violation ``m(a) - M(a)`` drops below it.

    Returns
    -------
    SmoResult
        ``rho`` is the offset such that the decision value is
        ``sum_i y_i a_i K(x_i, x) - rho``.
    """
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    m = y.size
    C = np.broadcast_to(np.asarray(C, dtype=float), (m,)).copy()
    alpha = np.zeros(m) if alpha0 is None else np.array(alpha0, dtype=float)
    if max_iter is None:
        max_iter = max(10_000_000, 100 * m)
    # gradient G = Q a + p
    G = p.copy()
    for t in np.flatnonzero(alpha):
        G += y * y[t] * alpha[t] * kcol(t)

    it = 0
    gap = np.inf
    while it < max_iter:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * G
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        gmax = score[i]
        gmin = np.min(np.where(low, score, np.inf))
        gap = gmax - gmin
        if gap < eps:
            break
        Ki = kcol(i)
        # second-order choice of j among violating partners
        b = gmax - score
        a = diag[i] + diag - 2.0 * Ki  # y_i y_t Q_it = K_it
        a = np.where(a > 0, a, TAU)
        cand = low & (b > 0)
        j = int(np.argmin(np.where(cand, -(b * b) / a, np.inf)))
        Kj = kcol(j)
        it += 1

        ai_old, aj_old = alpha[i], alpha[j]
        quad = max(diag[i] + diag[j] - 2.0 * Ki[j], TAU)
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > C[i] - C[j]:
                if ai > C[i]:
                    ai, aj = C[i], C[i] - diff
            elif aj > C[j]:
                aj, ai = C[j], C[j] + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C[i]:
                if ai > C[i]:
                    ai, aj = C[i], total - C[i]
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C[j]:
                if aj > C[j]:
                    aj, ai = C[j], total - C[j]
            elif ai < 0:
                ai, aj = 0.0, total
        # rounding in the clipping above must not leave the box
        ai = min(max(ai, 0.0), C[i])
        aj = min(max(aj, 0.0), C[j])
        alpha[i], alpha[j] = ai, aj
        dai, daj = ai - ai_old, aj - aj_old
        G += y * (y[i] * dai * Ki + y[j] * daj * Kj)

    # offset from free variables, else midpoint of the feasible interval
    score = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(np.mean(y[free] * G[free]))
    else:
        ub = np.inf
        lb = -np.inf
        yG = y * G
        at_upper = alpha >= C
        at_lower = alpha <= 0
        sel = (at_upper & (y < 0)) | (at_lower & (y > 0))
        if sel.any():
            ub = float(np.min(yG[sel]))
        sel = (at_upper & (y > 0)) | (at_lower & (y < 0))
        if sel.any():
            lb = float(np.max(yG[sel]))
        if np.isfinite(ub) and np.isfinite(lb):
            rho = 0.5 * (ub + lb)
        else:
            rho = ub if np.isfinite(ub) else (lb if np.isfinite(lb) else 0.0)
    return SmoResult(alpha, rho, float(gap), it, bool(gap < eps))
