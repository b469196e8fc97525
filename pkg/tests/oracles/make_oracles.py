"""Regenerate ``frozen.json`` from independent reference implementations.

Run from the repository root:  python tests/oracles/make_oracles.py

Reference tools: scipy.optimize.linprog (equality-constrained l1 as an LP),
cvxpy (l1 under a residual-norm ball), scikit-learn SVR / SVC (libsvm) and
scipy.linalg.svd.  None of them share code with the package under test.
"""
import json
from pathlib import Path

import cvxpy as cp
import numpy as np
import scipy.linalg
from scipy.optimize import linprog
from sklearn.svm import SVC, SVR

OUT = Path(__file__).with_name("frozen.json")


def bp_systems():
    for seed in range(20):
        rng = np.random.default_rng([seed, 11])
        m, n = int(rng.integers(5, 15)), int(rng.integers(16, 40))
        A = rng.standard_normal((m, n))
        y = rng.standard_normal(m)
        yield seed, A, y


def linprog_l1(A, y):
    m, n = A.shape
    # x = u - v, u, v >= 0
    res = linprog(np.ones(2 * n), A_eq=np.hstack([A, -A]), b_eq=y,
                  bounds=[(0, None)] * (2 * n), method="highs")
    x = res.x[:n] - res.x[n:]
    return float(np.abs(x).sum()), x


def svr_data():
    rng = np.random.default_rng(5)
    X = rng.uniform(-2, 2, (60, 2))
    z = np.sin(X[:, 0]) + 0.3 * X[:, 1] ** 2 + 0.05 * rng.standard_normal(60)
    Xt = rng.uniform(-2, 2, (25, 2))
    return X, z, Xt


def svc_data():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((80, 2))
    y = np.where(X[:, 0] * X[:, 1] > 0, 1, -1)
    Xt = rng.standard_normal((30, 2))
    return X, y, Xt


def main():
    out = {"bp_equality": [], "bpdn": [], "svr": [], "svc": [], "svd_power": []}
    for seed, A, y in bp_systems():
        l1, _ = linprog_l1(A, y)
        out["bp_equality"].append({"seed": seed, "l1": l1})

    for seed in range(10):
        rng = np.random.default_rng([seed, 12])
        A = rng.standard_normal((12, 40))
        A /= np.linalg.norm(A, axis=0)
        y = rng.standard_normal(12)
        tol = 0.2 * float(np.linalg.norm(y))
        x = cp.Variable(40)
        prob = cp.Problem(cp.Minimize(cp.norm1(x)), [cp.norm2(A @ x - y) <= tol])
        prob.solve(solver=cp.CLARABEL)
        out["bpdn"].append({"seed": seed, "tol": tol, "l1": float(prob.value)})

    X, z, Xt = svr_data()
    for C, gamma, eps in ((1.0, 0.5, 0.1), (10.0, 1.0, 0.05), (100.0, 0.2, 0.2)):
        m = SVR(C=C, gamma=gamma, epsilon=eps, tol=1e-8).fit(X, z)
        out["svr"].append({"C": C, "gamma": gamma, "epsilon": eps,
                           "pred": m.predict(Xt).tolist(), "n_sv": int(m.support_.size)})

    X, y, Xt = svc_data()
    for C, gamma in ((1.0, 0.5), (10.0, 2.0)):
        m = SVC(C=C, gamma=gamma, tol=1e-8).fit(X, y)
        out["svc"].append({"C": C, "gamma": gamma,
                           "decision": m.decision_function(Xt).tolist()})

    for seed in range(5):
        A = np.random.default_rng([seed, 13]).standard_normal((50, 200))
        s = scipy.linalg.svd(A, compute_uv=False, lapack_driver="gesvd")
        out["svd_power"].append({"seed": seed, "cumsum_sigma2": np.cumsum(s ** 2).tolist()})

    OUT.write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
