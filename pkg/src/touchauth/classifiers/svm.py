"""Binary soft-margin SVM trained with sequential minimal optimization.

Each step updates the pair of multipliers chosen by second-order working
set selection: ``i`` maximizes the KKT violation among multipliers that can
move up, ``j`` maximizes the guaranteed dual gain among those that can move
down. Ties are broken by a fixed index order drawn once from the seeded
generator. Every step maximizes the dual exactly along the feasible line,
so the dual objective never decreases.

Training stops when the maximal violating-pair gap is <= ``tol`` or after
``max_passes * n`` steps; the final KKT violation is reported either way.
"""

from __future__ import annotations

import numpy as np

_TAU = 1e-12


def kernel_matrix(A, B, kernel, gamma):
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if kernel == "linear":
        return A @ B.T
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def dual_objective(alpha, y, K):
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def kkt_violation(alpha, y, errors, C):
    """Largest KKT violation, measured on ``y_i * E_i`` with ``E = f(x) - y``."""
    r = y * errors
    lower = np.where(alpha < C, np.maximum(-r, 0.0), 0.0)
    upper = np.where(alpha > 0, np.maximum(r, 0.0), 0.0)
    return float(np.maximum(lower, upper).max())


def _bias(alpha, y, grad, C):
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = yg[free].mean()
    else:
        at_upper = alpha >= C
        ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[~ub_mask].max() if (~ub_mask).any() else -np.inf
        rho = (ub + lb) / 2.0 if np.isfinite(ub) and np.isfinite(lb) else \
            (ub if np.isfinite(ub) else lb)
    return -float(rho)


def _select_pair(alpha, y, grad, K, C, order, tol):
    v = -y * grad
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
    if not up.any() or not low.any():
        return None
    vo, upo, lowo = v[order], up[order], low[order]
    i_pos = int(np.argmax(np.where(upo, vo, -np.inf)))
    m = vo[i_pos]
    if m - np.where(lowo, vo, np.inf).min() <= tol:
        return None
    i = order[i_pos]
    b = m - vo
    a = K[i, i] + K[order, order] - 2.0 * K[i, order]
    a = np.where(a > 0, a, _TAU)
    gain = np.where(lowo & (b > 0), -(b * b) / a, np.inf)
    return i, order[int(np.argmin(gain))]


def smo(K, y, C, tol, max_passes, rng, record=False):
    """Solve the SVM dual for a precomputed kernel matrix.

    Parameters
    ----------
    K : ndarray (n, n)
    y : ndarray (n,)
        Labels in {-1, +1}.

    Returns
    -------
    dict with ``alpha``, ``b``, ``steps``, ``kkt_violation`` and, when
    ``record`` is set, ``objective`` (dual value after every step).
    """
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - sum(a)
    order = rng.permutation(n)
    history = [0.0] if record else None
    steps = 0
    while steps < max_passes * n:
        pair = _select_pair(alpha, y, grad, K, C, order, tol)
        if pair is None:
            break
        i, j = pair
        a_i, a_j = alpha[i], alpha[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        quad = quad if quad > 0 else _TAU
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = a_i - a_j
            new_i, new_j = a_i + delta, a_j + delta
            if diff > 0:
                if new_j < 0:
                    new_j, new_i = 0.0, diff
            elif new_i < 0:
                new_i, new_j = 0.0, -diff
            if diff > 0:
                if new_i > C:
                    new_i, new_j = C, C - diff
            elif new_j > C:
                new_j, new_i = C, C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = a_i + a_j
            new_i, new_j = a_i - delta, a_j + delta
            if total > C:
                if new_i > C:
                    new_i, new_j = C, total - C
            elif new_j < 0:
                new_j, new_i = 0.0, total
            if total > C:
                if new_j > C:
                    new_j, new_i = C, total - C
            elif new_i < 0:
                new_i, new_j = 0.0, total
        new_i = min(C, max(0.0, new_i))
        new_j = min(C, max(0.0, new_j))
        grad += Q[:, i] * (new_i - a_i) + Q[:, j] * (new_j - a_j)
        alpha[i], alpha[j] = new_i, new_j
        steps += 1
        if record:
            history.append(dual_objective(alpha, y, K))
    b = _bias(alpha, y, grad, C)
    errors = (alpha * y) @ K + b - y
    out = {
        "alpha": alpha,
        "b": b,
        "steps": steps,
        "kkt_violation": kkt_violation(alpha, y, errors, C),
    }
    if record:
        out["objective"] = history
    return out


class SVM:
    """Kernel SVM scored by its raw decision value ``sum a_i y_i K(x_i, v) + b``.

    Genuine samples are the +1 class. Only support vectors (``a_i > 0``) are
    retained after training.
    """

    algorithm = "svm"

    def __init__(self, support_vectors, alpha, labels, bias, kernel, gamma, C,
                 kkt_violation=0.0, converged=True, steps=0):
        self.support_vectors = np.asarray(support_vectors, dtype=float)
        self.alpha = np.asarray(alpha, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        self.bias = float(bias)
        self.kernel = kernel
        self.gamma = float(gamma)
        self.C = float(C)
        self.kkt_violation = float(kkt_violation)
        self.converged = bool(converged)
        self.steps = int(steps)

    @classmethod
    def fit(cls, X, y, config, record=False):
        X = np.asarray(X, dtype=float)
        signs = np.where(np.asarray(y) == 1, 1.0, -1.0)
        gamma = config.gamma(X.shape[1])
        K = kernel_matrix(X, X, config.svm_kernel, gamma)
        rng = np.random.Generator(np.random.PCG64(int(config.seed)))
        result = smo(K, signs, config.svm_c, config.svm_tol, config.svm_max_passes,
                     rng, record=record)
        keep = result["alpha"] > 0
        model = cls(
            X[keep], result["alpha"][keep], signs[keep], result["b"],
            config.svm_kernel, gamma, config.svm_c,
            kkt_violation=result["kkt_violation"],
            converged=result["kkt_violation"] <= config.svm_tol,
            steps=result["steps"],
        )
        if record:
            model.objective_history = result["objective"]
            model.full_alpha = result["alpha"]
        return model

    def score(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(self.alpha) == 0:
            return np.full(len(X), self.bias)
        K = kernel_matrix(X, self.support_vectors, self.kernel, self.gamma)
        return K @ (self.alpha * self.labels) + self.bias

    def weights(self):
        """Primal weight vector (linear kernel only)."""
        if self.kernel != "linear":
            raise ValueError("primal weights exist only for the linear kernel")
        return (self.alpha * self.labels) @ self.support_vectors

    def to_state(self):
        return {
            "support_vectors": self.support_vectors.tolist(),
            "alpha": self.alpha.tolist(),
            "labels": self.labels.tolist(),
            "bias": self.bias,
            "kernel": self.kernel,
            "gamma": self.gamma,
            "C": self.C,
            "kkt_violation": self.kkt_violation,
            "converged": self.converged,
            "steps": self.steps,
        }

    @classmethod
    def from_state(cls, state):
        sv = state["support_vectors"]
        return cls(
            np.array(sv, dtype=float).reshape(len(sv), -1) if sv else np.empty((0, 0)),
            state["alpha"], state["labels"], state["bias"], state["kernel"],
            state["gamma"], state["C"], state["kkt_violation"], state["converged"],
            state["steps"],
        )
