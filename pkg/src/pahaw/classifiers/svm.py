"""Soft-margin SVM trained by sequential minimal optimization.

The dual is solved in the LIBSVM formulation

    min 0.5 a'Qa - e'a   s.t.  0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j K_ij

with second-order working-set selection.  The solver runs on a precomputed
Gram matrix, which lets the grid search reuse one distance matrix for every
candidate width.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from ..errors import DimensionMismatch, SingleClass, SolverStallWarning
from .kernel import kernel_from_distances, squared_distances

MODEL_FORMAT = 1
_TAU = 1e-12
DEFAULT_MAX_PASSES = 200_000


@dataclass(frozen=True)
class SvmConfig:
    c: float = 1.0
    gamma: float = 1.0  # kernel width
    tolerance: float = 1e-3
    max_passes: int = DEFAULT_MAX_PASSES  # SMO iteration cap

    def __post_init__(self) -> None:
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValueError(f"C must be a positive finite number, got {self.c}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be a positive finite number, got {self.gamma}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be at least 1")


@njit(cache=True, nogil=True)
def _smo(K, y, C, eps, max_iter):
    """Returns (alpha, bias, iterations, converged)."""
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of the dual objective
    it = 0
    converged = False
    while it < max_iter:
        # i: maximal violating index in I_up
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v > gmax:
                    gmax = v
                    i = t
        # j: largest second-order decrease among I_low
        gmin = np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                v = -y[t] * G[t]
                if v < gmin:
                    gmin = v
                if i >= 0:
                    b = gmax - v
                    if b > 0:
                        a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if a <= 0:
                            a = _TAU
                        obj = -(b * b) / a
                        if obj < best:
                            best = obj
                            j = t
        if i < 0 or j < 0 or gmax - gmin < eps:
            converged = True
            break
        it += 1

        ai_old = alpha[i]
        aj_old = alpha[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = _TAU
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = s

        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(n):
            G[t] += y[t] * (y[i] * K[t, i] * dai + y[j] * K[t, j] * daj)

    # bias: mean over free vectors, else the midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    total = 0.0
    n_free = 0
    for t in range(n):
        yg = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            total += yg
    if n_free > 0:
        rho = total / n_free
    else:
        rho = 0.5 * (ub + lb)
    return alpha, -rho, it, converged


def signed_labels(y) -> np.ndarray:
    """Map labels in {0, 1} or {-1, +1} to {-1.0, +1.0}; 1 stays positive."""
    y = np.asarray(y)
    vals = set(np.unique(y).tolist())
    if vals <= {-1, 1}:
        return y.astype(float)
    if vals <= {0, 1}:
        return np.where(y == 1, 1.0, -1.0)
    raise ValueError(f"labels must be in {{0, 1}} or {{-1, +1}}, got {sorted(vals)}")


def solve_dual(K: np.ndarray, y: np.ndarray, c: float, tolerance: float, max_passes: int):
    """Run SMO on a Gram matrix.  Returns ``(alpha, bias, iterations, converged)``."""
    K = np.ascontiguousarray(K, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    alpha, bias, it, ok = _smo(K, y, float(c), float(tolerance), int(max_passes))
    return alpha, float(bias), int(it), bool(ok)


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray
    dual_coefficients: np.ndarray  # alpha_i * y_i
    bias: float
    config: SvmConfig
    converged: bool = True
    iterations: int = 0

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        if len(self.dual_coefficients) == 0:
            return np.full(len(X), self.bias)
        K = kernel_from_distances(squared_distances(X, self.support_vectors), self.config.gamma)
        return K @ self.dual_coefficients + self.bias

    def predict(self, X) -> np.ndarray:
        """Labels in {-1, +1}; a zero decision value maps to +1."""
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": MODEL_FORMAT,
                "kind": "svm",
                "config": asdict(self.config),
                "support_vectors": self.support_vectors.tolist(),
                "dual_coefficients": self.dual_coefficients.tolist(),
                "bias": self.bias,
                "converged": self.converged,
                "iterations": self.iterations,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SvmModel":
        d = json.loads(text)
        if d.get("kind") != "svm" or d.get("format") != MODEL_FORMAT:
            raise ValueError("not a serialized SVM model of a supported format")
        sv = np.array(d["support_vectors"], dtype=float)
        coef = np.array(d["dual_coefficients"], dtype=float)
        if sv.size == 0:
            sv = sv.reshape(0, 0)
        return cls(sv, coef, float(d["bias"]), SvmConfig(**d["config"]), d["converged"], d["iterations"])


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row order that depends only on row contents, so training is permutation invariant."""
    keys = [y] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys[::-1])


def svm_train(X, y, cfg: SvmConfig = SvmConfig()) -> SvmModel:
    """Fit an RBF soft-margin SVM.

    Rows are put into a content-defined order before solving, so shuffling
    the training set cannot change the model.  Hitting ``cfg.max_passes``
    emits :class:`SolverStallWarning` and returns the current iterate with
    ``converged=False``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ys = signed_labels(y)
    if X.shape[0] != len(ys):
        raise DimensionMismatch(f"{X.shape[0]} rows but {len(ys)} labels")
    if not np.all(np.isfinite(X)):
        raise ValueError("training features must be finite")
    if len(np.unique(ys)) < 2:
        raise SingleClass("SVM training needs both classes")
    order = _canonical_order(X, ys)
    X, ys = X[order], ys[order]
    K = kernel_from_distances(squared_distances(X), cfg.gamma)
    alpha, bias, it, ok = solve_dual(K, ys, cfg.c, cfg.tolerance, cfg.max_passes)
    if not ok:
        warnings.warn(
            f"SMO stopped after {it} iterations without closing the KKT gap "
            f"(C={cfg.c:g}, gamma={cfg.gamma:g})",
            SolverStallWarning,
            stacklevel=2,
        )
    sv = alpha > 0
    return SvmModel(X[sv].copy(), (alpha * ys)[sv], bias, cfg, ok, it)


@dataclass(frozen=True)
class KktReport:
    ok: bool
    worst_violation: float
    n_violations: int
    equality_residual: float


def kkt_audit(model: SvmModel, X, y, tolerance: float | None = None) -> KktReport:
    """Check the optimality conditions of a trained model on its training set.

    With margins ``m_i = y_i f(x_i)``: ``alpha_i = 0`` needs ``m_i >= 1 - tol``,
    a free ``alpha_i`` needs ``|m_i - 1| <= tol`` and ``alpha_i = C`` needs
    ``m_i <= 1 + tol``.  Box constraints and ``sum alpha_i y_i = 0`` are
    checked as well.
    """
    tol = model.config.tolerance if tolerance is None else tolerance
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ys = signed_labels(y)
    C = model.config.c
    margins = ys * model.decision_function(X)

    # recover alpha per training row by matching support vectors
    alpha = np.zeros(len(ys))
    if len(model.dual_coefficients):
        used = np.zeros(len(ys), dtype=bool)
        for k in range(len(model.dual_coefficients)):
            same = np.all(X == model.support_vectors[k], axis=1)
            hits = np.flatnonzero(same & (ys * model.dual_coefficients[k] > 0) & ~used)
            if len(hits):
                used[hits[0]] = True
                alpha[hits[0]] = abs(model.dual_coefficients[k])

    viol = np.zeros(len(ys))
    at_zero = alpha <= 0
    at_c = alpha >= C
    free = ~at_zero & ~at_c
    viol[at_zero] = np.maximum(0.0, (1 - tol) - margins[at_zero])
    viol[free] = np.maximum(0.0, np.abs(margins[free] - 1) - tol)
    viol[at_c] = np.maximum(0.0, margins[at_c] - (1 + tol))
    box = np.maximum(0.0, alpha - C * (1 + 1e-12))
    viol = np.maximum(viol, box)
    residual = abs(float(model.dual_coefficients.sum()))
    ok = bool(np.all(viol == 0) and residual <= tol)
    return KktReport(ok, float(viol.max(initial=0.0)), int(np.count_nonzero(viol)), residual)
