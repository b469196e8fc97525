"""Linear-system solvers for sparse representation: minimum-norm (pseudo-inverse)
solutions, l1 basis pursuit via the homotopy path, and a thin SVD wrapper."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParameterError


class SvdFactors(NamedTuple):
    U: np.ndarray
    S: np.ndarray
    Vt: np.ndarray

    def rank(self, rtol: float | None = None) -> int:
        if self.S.size == 0:
            return 0
        if rtol is None:
            rtol = max(self.U.shape[0], self.Vt.shape[1]) * np.finfo(float).eps
        return int(np.count_nonzero(self.S > rtol * self.S[0]))


@dataclass(frozen=True)
class SparseSolution:
    coeffs: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool

    @property
    def l1(self) -> float:
        return float(np.abs(self.coeffs).sum())


def _as_system(A, y):
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise ParameterError(f"incompatible system: matrix {A.shape}, rhs {y.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
        raise ParameterError("system contains non-finite entries")
    return A, y


def svd(M) -> SvdFactors:
    """Thin SVD with singular values in non-increasing order.

    Each left singular vector is sign-fixed so that its largest-magnitude
    entry is positive (the matching right vector is flipped with it), which
    makes the factors reproducible across LAPACK builds.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise ParameterError("svd needs a non-empty 2-D matrix")
    if not np.all(np.isfinite(M)):
        raise ParameterError("svd input contains non-finite entries")
    U, S, Vt = np.linalg.svd(M, full_matrices=False)
    pivot = np.abs(U).argmax(axis=0)
    signs = np.sign(U[pivot, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return SvdFactors(U * signs, S, Vt * signs[:, None])


def min_l2_solution(A, y, tol: float = 1e-8) -> SparseSolution:
    """Pseudo-inverse solution ``x = A^+ y``.

    Among all solutions of ``Ax = y`` this one has the smallest l2 norm.  If
    the system is inconsistent the least-squares minimiser is returned with
    ``converged=False``; consistency is judged by ``residual <= tol * max(1, |y|)``.
    """
    A, y = _as_system(A, y)
    if A.shape[1] == 0:
        raise ParameterError("matrix has no columns")
    U, S, Vt = svd(A)
    keep = S > max(A.shape) * np.finfo(float).eps * (S[0] if S.size else 0.0)
    x = Vt[keep].T @ ((U[:, keep].T @ y) / S[keep])
    res = float(np.linalg.norm(A @ x - y))
    return SparseSolution(x, res, 1, res <= tol * max(1.0, float(np.linalg.norm(y))))


def basis_pursuit(A, y, tol: float = 1e-6, max_iter: int = 10_000) -> SparseSolution:
    """Minimise ``|x|_1`` subject to ``|Ax - y|_2 <= tol``.

    Follows the piecewise-linear solution path of
    ``min 0.5 |y - Ax|^2 + lam |x|_1`` from ``lam = |A^T y|_inf`` (where
    ``x = 0``) down towards ``lam = 0``.  Each iteration moves to the next
    breakpoint: a column joining the active set or an active coefficient
    crossing zero.  The walk stops where the residual norm falls to ``tol``;
    a point on the path with residual ``tol`` is the constrained l1
    minimiser.

    On an active set ``S`` with signs ``z`` the path is
    ``x_S(lam) = G^-1 (A_S^T y - lam z)`` with ``G = A_S^T A_S``, so every
    breakpoint is computed in closed form rather than by accumulating steps.

    Returns the best iterate with ``converged=False`` if ``max_iter`` runs out
    or if the path ends (``lam = 0``) with the residual still above ``tol``
    (inconsistent system, e.g. a zero matrix with non-zero ``y``).
    """
    A, y = _as_system(A, y)
    if tol <= 0:
        raise ParameterError("tol must be positive")
    if max_iter < 1:
        raise ParameterError("max_iter must be >= 1")
    n = A.shape[1]
    x = np.zeros(n)
    rnorm = float(np.linalg.norm(y))
    if rnorm <= tol:
        return SparseSolution(x, rnorm, 0, True)
    c = A.T @ y
    lam = float(np.abs(c).max()) if n else 0.0
    if lam <= 0.0:
        return SparseSolution(x, rnorm, 0, False)

    # aim slightly inside the tol ball so rounding cannot push the residual out
    target = tol - min(max(1e-6 * tol, 1e-13 * rnorm), 0.5 * tol)
    j0 = int(np.abs(c).argmax())
    active = [j0]
    signs = [float(np.sign(c[j0]))]
    in_active = np.zeros(n, dtype=bool)
    in_active[j0] = True
    blocked, blocked_sign = -1, 0.0
    it = 0
    while it < max_iter:
        it += 1
        S = np.array(active)
        z = np.array(signs)
        AS = A[:, S]
        G = AS.T @ AS
        rhs = np.column_stack([AS.T @ y, z])
        try:
            sol = np.linalg.solve(G, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(G, rhs, rcond=None)[0]
        w, d = sol[:, 0], sol[:, 1]
        r_perp = y - AS @ w
        v = AS @ d
        b = A.T @ r_perp
        a = A.T @ v

        # next breakpoint: the largest lam' below lam
        nxt, event = 0.0, ("end", -1)

        c = b + lam * a
        with np.errstate(divide="ignore", invalid="ignore"):
            # slack to the +lam / -lam boundaries shrinks at rate (1 -+ a)
            # per unit decrease of lam; columns already past a boundary
            # (round-off) join immediately
            up = lam - np.maximum(lam - c, 0.0) / (1.0 - a)
            dn = lam - np.maximum(lam + c, 0.0) / (1.0 + a)
        up[~(1.0 - a > 1e-10)] = -np.inf
        dn[~(1.0 + a > 1e-10)] = -np.inf
        if blocked >= 0:
            # the dropped column sits on its old boundary; ignore that one
            if blocked_sign > 0:
                up[blocked] = -np.inf
            else:
                dn[blocked] = -np.inf
        lj = np.fmax(up, dn)
        lj[in_active] = -np.inf
        j = int(np.argmax(lj))
        if lj[j] > nxt:
            nxt, event = float(lj[j]), ("join", j)
            join_sign = 1.0 if up[j] >= dn[j] else -1.0

        # an active coefficient heads to zero when d_i opposes its sign
        shrinking = d * z < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            ld = np.where(shrinking, np.minimum(w / d, lam), -np.inf)
        k = int(np.argmax(ld))
        if ld[k] > nxt:
            nxt, event = float(ld[k]), ("drop", k)

        # |r(lam')|^2 = |r_perp|^2 + lam'^2 |v|^2
        rp2 = float(r_perp @ r_perp)
        vv = float(v @ v)
        if rp2 <= target * target and vv > 0:
            lt = np.sqrt((target * target - rp2) / vv)
            if lt >= nxt:
                nxt, event = min(float(lt), lam), ("tol", -1)

        lam = nxt
        x[S] = w - lam * d
        if event[0] == "drop":
            i = int(S[event[1]])
            x[i] = 0.0
            pos = active.index(i)
            del active[pos], signs[pos]
            in_active[i] = False
            blocked, blocked_sign = i, z[event[1]]
        else:
            blocked = -1
        r = y - A @ x
        rnorm = float(np.linalg.norm(r))
        if event[0] in ("tol", "end") and rnorm > tol:
            # the normal equations square the conditioning; one least-squares
            # refinement on the active columns recovers the lost digits
            x2 = x.copy()
            x2[S] += np.linalg.lstsq(AS, r, rcond=None)[0]
            r2 = y - A @ x2
            r2n = float(np.linalg.norm(r2))
            if r2n < rnorm and np.all(np.sign(x2[S]) == np.sign(x[S])):
                x, r, rnorm = x2, r2, r2n
        if event[0] in ("tol", "end") or rnorm <= tol:
            return SparseSolution(x, rnorm, it, rnorm <= tol)
        if event[0] == "join":
            active.append(event[1])
            signs.append(join_sign)
            in_active[event[1]] = True
        if not active:
            c = b + lam * a
            j = int(np.abs(c).argmax())
            active.append(j)
            signs.append(float(np.sign(c[j])))
            in_active[j] = True
    return SparseSolution(x, rnorm, it, rnorm <= tol)
