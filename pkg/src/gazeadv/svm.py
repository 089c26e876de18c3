"""Multiclass soft-margin SVM with RBF kernel, trained from scratch.

The dual problem of each one-vs-one pair is solved with an SMO-style
working-set method using second-order pair selection (no shrinking).
Decision values, votes, and the surrogate loss used by gradient attacks
are all exposed; the surrogate for reference class y is

    L(x, y) = max over rivals c != y of g_{c,y}(x)

where g_{c,y} is the pairwise decision value oriented positive toward c.
Its gradient flows through the maximizing pair only, with the RBF kernel
term d/dx K(s, x) = 2 * gamma * (s - x) * K(s, x).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TAU = 1e-12


@dataclass(frozen=True)
class SvmTrainConfig:
    C: float = 1.0
    gamma: float | None = None  # None -> 1 / n_features
    tolerance: float = 1e-3
    max_iterations: int = 1_000_000
    seed: int = 0  # training itself is deterministic; kept for config symmetry

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class PairClassifier:
    """One trained one-vs-one boundary; decision > 0 votes for class_a."""

    class_a: str
    class_b: str
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # signed alpha * y for each support vector
    intercept: float


@dataclass(frozen=True)
class SvmRbfModel:
    classes: tuple
    gamma: float
    C: float
    n_features: int
    pairs: tuple
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None


def rbf_kernel(X: np.ndarray, S: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||x - s||^2) for all row pairs of X (n, d) and S (m, d)."""
    X = np.atleast_2d(X)
    S = np.atleast_2d(S)
    sq = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(S * S, axis=1)[None, :]
        - 2.0 * (X @ S.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def _solve_pair(K, y, C, tol, max_iter):
    """SMO on one binary subproblem.

    Minimizes 0.5 a'Qa - e'a subject to y'a = 0, 0 <= a <= C with
    Q_ij = y_i y_j K_ij.  Working pairs are picked by maximal violation
    (first index) and best second-order decrease (second index); returns
    (alpha, rho, iterations) with the decision value sum(a_i y_i K_i) - rho.
    """
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of the dual objective at alpha = 0
    Kdiag = np.ascontiguousarray(np.diag(K))

    it = 0
    while it < max_iter:
        it += 1
        yG = y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        neg_yG = -yG
        i = int(np.argmax(np.where(up, neg_yG, -np.inf)))
        m = float(neg_yG[i])
        M = float(np.min(np.where(low, neg_yG, np.inf)))
        if m - M <= tol:
            break

        # second-order selection of j among violating candidates
        Ki = K[i]
        b_t = m - neg_yG  # > 0 for candidates
        a_t = Kdiag[i] + Kdiag - 2.0 * Ki
        np.maximum(a_t, _TAU, out=a_t)
        cand = low & (b_t > 0)
        obj = np.where(cand, -(b_t * b_t) / a_t, np.inf)
        j = int(np.argmin(obj))

        old_i, old_j = alpha[i], alpha[j]
        Kj = K[j]
        quad = max(Kdiag[i] + Kdiag[j] - 2.0 * K[i, j], _TAU)
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total

        d_i = (alpha[i] - old_i) * y[i]
        d_j = (alpha[j] - old_j) * y[j]
        G += Ki * (y * d_i) + Kj * (y * d_j)

    # intercept from the free support vectors (midpoint of bounds otherwise)
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub = np.inf
        lb = -np.inf
        for k in range(n):
            if (alpha[k] >= C and y[k] < 0) or (alpha[k] <= 0 and y[k] > 0):
                ub = min(ub, yG[k])
            else:
                lb = max(lb, yG[k])
        if not np.isfinite(ub):
            ub = 0.0
        if not np.isfinite(lb):
            lb = 0.0
        rho = (ub + lb) / 2.0
    return alpha, rho, it


def _check_matrix(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    return X


def _apply_scaling(model: SvmRbfModel, X: np.ndarray) -> np.ndarray:
    if model.feature_mean is None:
        return X
    return (X - model.feature_mean) / model.feature_scale


def train_svm(X, y, config: SvmTrainConfig = SvmTrainConfig(), standardize: bool = False) -> SvmRbfModel:
    """Fit a one-vs-one RBF SVM.

    With ``standardize`` the per-feature training mean and standard
    deviation are baked into the model, so prediction and gradients still
    operate on raw feature space (the chain rule is applied internally).
    """
    X = _check_matrix(X)
    y = np.asarray(y, dtype=object)
    if len(y) != len(X):
        raise ValueError("labels length does not match features")
    classes = tuple(sorted({str(v) for v in y}))
    if len(classes) < 2:
        raise ValueError("degenerate training set: fewer than 2 classes")
    y = np.array([str(v) for v in y], dtype=object)
    gamma = config.gamma if config.gamma is not None else 1.0 / X.shape[1]

    mean = scale = None
    if standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale == 0, 1.0, scale)
        X = (X - mean) / scale

    pairs = []
    for a_idx in range(len(classes)):
        for b_idx in range(a_idx + 1, len(classes)):
            cls_a, cls_b = classes[a_idx], classes[b_idx]
            mask = (y == cls_a) | (y == cls_b)
            Xp = X[mask]
            yp = np.where(y[mask] == cls_a, 1.0, -1.0)
            K = rbf_kernel(Xp, Xp, gamma)
            alpha, rho, _ = _solve_pair(
                K, yp, config.C, config.tolerance, config.max_iterations
            )
            sv = alpha > 1e-12 * config.C
            pairs.append(
                PairClassifier(
                    class_a=cls_a,
                    class_b=cls_b,
                    support_vectors=Xp[sv].copy(),
                    dual_coef=(alpha * yp)[sv].copy(),
                    intercept=-rho,
                )
            )
    return SvmRbfModel(
        classes=classes,
        gamma=gamma,
        C=config.C,
        n_features=X.shape[1],
        pairs=tuple(pairs),
        feature_mean=mean,
        feature_scale=scale,
    )


def _check_input(model, X):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} features, got {X.shape[1]}"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("inputs must be finite")
    return X, single


def svm_decision_values(model: SvmRbfModel, X) -> np.ndarray:
    """Pairwise decision values, shape (n, n_pairs); pair p > 0 votes class_a."""
    X, _ = _check_input(model, X)
    Xs = _apply_scaling(model, X)
    out = np.zeros((len(Xs), len(model.pairs)))
    for p, pair in enumerate(model.pairs):
        K = rbf_kernel(Xs, pair.support_vectors, model.gamma)
        out[:, p] = K @ pair.dual_coef + pair.intercept
    return out


def _votes_and_scores(model, decisions):
    """Vote counts and signed decision sums per class, both (n, n_classes)."""
    n = len(decisions)
    k = len(model.classes)
    votes = np.zeros((n, k))
    signed = np.zeros((n, k))
    index = {c: i for i, c in enumerate(model.classes)}
    for p, pair in enumerate(model.pairs):
        a, b = index[pair.class_a], index[pair.class_b]
        dec = decisions[:, p]
        win_a = dec >= 0
        votes[:, a] += win_a
        votes[:, b] += ~win_a
        signed[:, a] += dec
        signed[:, b] -= dec
    return votes, signed


def svm_predict_batch(model: SvmRbfModel, X) -> np.ndarray:
    """Predicted classes by pairwise voting.

    Vote ties go to the tied class with the largest sum of signed decision
    values, residual ties to the lowest class index.
    """
    decisions = svm_decision_values(model, X)
    votes, signed = _votes_and_scores(model, decisions)
    best = votes.max(axis=1, keepdims=True)
    masked = np.where(votes == best, signed, -np.inf)
    idx = np.argmax(masked, axis=1)
    return np.array([model.classes[i] for i in idx], dtype=object)


def svm_predict(model: SvmRbfModel, x) -> tuple[str, np.ndarray]:
    """Predicted class and pairwise decision values for one sample."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("svm_predict expects a single feature vector")
    decisions = svm_decision_values(model, x[None, :])
    votes, signed = _votes_and_scores(model, decisions)
    masked = np.where(votes[0] == votes[0].max(), signed[0], -np.inf)
    return model.classes[int(np.argmax(masked))], decisions[0]


def _rival_decisions(model, decisions, y_ref):
    """Oriented rival decision values g_{c, y_ref} for each class c != y_ref.

    Returns (classes in order, values (n, k-1), pair indices, orientations).
    """
    if y_ref not in model.classes:
        raise ValueError(f"unknown class {y_ref!r}")
    rivals, pair_idx, orient = [], [], []
    for c in model.classes:
        if c == y_ref:
            continue
        for p, pair in enumerate(model.pairs):
            if {pair.class_a, pair.class_b} == {c, y_ref}:
                rivals.append(c)
                pair_idx.append(p)
                orient.append(1.0 if pair.class_a == c else -1.0)
                break
    values = decisions[:, pair_idx] * np.asarray(orient)
    return rivals, values, pair_idx, orient


def svm_surrogate_loss(model: SvmRbfModel, x, y_ref) -> float:
    """Max oriented rival decision value; positive when y_ref loses a pair."""
    x = np.asarray(x, dtype=float)
    decisions = svm_decision_values(model, x[None, :])
    _, values, _, _ = _rival_decisions(model, decisions, str(y_ref))
    return float(values[0].max())


def svm_loss_gradient(model: SvmRbfModel, x, y_ref) -> np.ndarray:
    """Input gradient of the surrogate loss at x.

    The gradient flows through the maximizing rival pair (ties broken by
    class order).  An exactly zero vector signals the zero-gradient
    condition; callers decide how to treat it.
    """
    x = np.asarray(x, dtype=float)
    grads = svm_loss_gradient_batch(model, x[None, :], [y_ref])
    return grads[0]


def svm_loss_gradient_batch(model: SvmRbfModel, X, y_refs) -> np.ndarray:
    """Surrogate-loss gradients for many (sample, reference class) pairs."""
    X, _ = _check_input(model, X)
    Xs = _apply_scaling(model, X)
    decisions = svm_decision_values(model, X)
    y_refs = [str(v) for v in y_refs]
    if len(y_refs) != len(X):
        raise ValueError("y_refs length does not match X")

    grads = np.zeros_like(Xs)
    by_ref: dict[str, list[int]] = {}
    for i, ref in enumerate(y_refs):
        by_ref.setdefault(ref, []).append(i)

    for ref, rows in by_ref.items():
        rows = np.asarray(rows)
        _, values, pair_idx, orient = _rival_decisions(model, decisions[rows], ref)
        arg = np.argmax(values, axis=1)  # first max -> lowest class index
        for r, (row, a) in enumerate(zip(rows, arg)):
            pair = model.pairs[pair_idx[a]]
            sign = orient[a]
            xs = Xs[row]
            K = rbf_kernel(xs[None, :], pair.support_vectors, model.gamma)[0]
            w = pair.dual_coef * K
            grads[row] = sign * 2.0 * model.gamma * (w @ pair.support_vectors - w.sum() * xs)

    if model.feature_mean is not None:
        grads = grads / model.feature_scale  # chain rule through z-scoring
    return grads
