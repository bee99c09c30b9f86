"""Independent reference implementations used only by the test suite.

Nothing in here imports the package under test: the optimizer is plain
gradient ascent with backtracking line search, the AUC is the O(n^2)
pairwise count, and the log-likelihood is the naive direct formula.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def naive_log_likelihood(beta, X, y) -> float:
    """Direct sum of y*log(p) + (1-y)*log(1-p); only safe at moderate beta."""
    p = _sigmoid(np.asarray(X) @ np.asarray(beta))
    y = np.asarray(y, dtype=float)
    return float(np.sum(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def gradient_descent_logistic(
    X,
    y,
    *,
    grad_tol: float = 1e-9,
    max_iter: int = 200_000,
) -> np.ndarray:
    """Dense gradient ascent on the logistic log-likelihood with backtracking
    line search. Slow but independent of the package's IRLS path."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    beta = np.zeros(p)

    def loglik(b):
        eta = X @ b
        return float(np.sum(y * eta) - np.sum(np.logaddexp(0.0, eta)))

    f = loglik(beta)
    step = 1.0 / max(n, 1)
    for _ in range(max_iter):
        g = X.T @ (y - _sigmoid(X @ beta))
        gmax = float(np.max(np.abs(g)))
        if gmax < grad_tol:
            break
        step = min(step * 2.0, 1e6)  # allow the step to grow back after backtracks
        while True:
            cand = beta + step * g
            f_cand = loglik(cand)
            if f_cand > f:
                break
            step *= 0.5
            if step < 1e-18:
                return beta
        beta, f = cand, f_cand
    return beta


def pairwise_auc(preds, labels) -> float:
    """All-pairs concordance with 0.5 credit for ties; O(n^2)."""
    preds = np.asarray(preds, dtype=float)
    labels = np.asarray(labels)
    pos = preds[labels == 1]
    neg = preds[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("need both classes")
    wins = 0.0
    for x in pos:
        wins += np.sum(x > neg) + 0.5 * np.sum(x == neg)
    return float(wins / (len(pos) * len(neg)))


def finite_difference_gradient(fun, beta, *, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of a vector."""
    beta = np.asarray(beta, dtype=float)
    g = np.zeros_like(beta)
    for j in range(len(beta)):
        e = np.zeros_like(beta)
        e[j] = h
        g[j] = (fun(beta + e) - fun(beta - e)) / (2.0 * h)
    return g
