"""Logistic classification on component scores.

Binary logistic regression is fitted by iteratively reweighted least squares
with a small ridge penalty on the non-intercept coefficients, which keeps
the fit defined under complete separation (likely with training sets of a
few dozen samples).  Model assessment uses repeated stratified random
train/test splits; the number of score components is chosen by stratified
k-fold cross-validation of the misclassification rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, SingleClass

__all__ = [
    "LogisticFit",
    "logistic_fit",
    "predict_proba",
    "predict",
    "evaluate_split",
    "cv_select_k",
]


@dataclass(frozen=True)
class LogisticFit:
    """Fitted weights (intercept first) and convergence information."""

    weights: np.ndarray
    converged: bool
    n_iter: int


def _as_matrix(features) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        return features[:, None]
    return features


def _design(features: np.ndarray) -> np.ndarray:
    features = _as_matrix(features)
    return np.column_stack([np.ones(features.shape[0]), features])


def _check_labels(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    labels = labels.astype(float)
    if labels.min() == labels.max():
        raise SingleClass("training data contains a single class")
    return labels


def logistic_fit(
    features, labels, max_iter: int = 100, tol: float = 1e-8, ridge: float = 1e-6
) -> LogisticFit:
    """Ridge-penalized logistic regression by IRLS.

    ``features`` may have zero columns, in which case only the intercept is
    fitted.  Convergence is declared when the largest coefficient change
    falls below ``tol``; reaching ``max_iter`` is flagged, not raised.
    """
    features = _as_matrix(features)
    if features.size == 0:
        features = features.reshape(len(labels), 0)
    y = _check_labels(labels)
    x = _design(features)
    n, p = x.shape
    pen = np.full(p, ridge)
    pen[0] = 0.0
    beta = np.zeros(p)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = np.clip(x @ beta, -700.0, 700.0)
        prob = 1.0 / (1.0 + np.exp(-eta))
        w = np.clip(prob * (1.0 - prob), 1e-10, None)
        grad = x.T @ (y - prob) - pen * beta
        hess = (x.T * w) @ x + np.diag(pen)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        beta = beta + step
        if not np.all(np.isfinite(beta)):
            raise NonFinite("logistic fit diverged to non-finite weights")
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    return LogisticFit(weights=beta, converged=converged, n_iter=it)


def predict_proba(fit: LogisticFit, features) -> np.ndarray:
    features = _as_matrix(features)
    if features.size == 0:
        features = features.reshape(-1, 0)
    x = _design(features)
    return 1.0 / (1.0 + np.exp(-np.clip(x @ fit.weights, -700.0, 700.0)))


def predict(fit: LogisticFit, features) -> np.ndarray:
    """Class labels at the 0.5 probability threshold."""
    return (predict_proba(fit, features) > 0.5).astype(int)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def _stratified_train_indices(labels: np.ndarray, train_size: int, rng) -> np.ndarray:
    """Class-proportional training draw with at least one of each class."""
    idx0 = np.flatnonzero(labels == 0)
    idx1 = np.flatnonzero(labels == 1)
    n = labels.size
    n1 = int(round(train_size * idx1.size / n))
    n1 = min(max(n1, 1), train_size - 1)
    n0 = train_size - n1
    if n0 > idx0.size or n1 > idx1.size:
        raise SingleClass("class too small for the requested stratified split")
    take0 = rng.permutation(idx0)[:n0]
    take1 = rng.permutation(idx1)[:n1]
    return np.concatenate([take0, take1])


def evaluate_split(
    features,
    labels,
    n_components: int,
    train_size: int = 30,
    repeats: int = 500,
    seed: int = 0,
) -> tuple[float, float]:
    """Mean and sd of the test misclassification over random splits.

    Each repeat draws a stratified training set, fits on the first
    ``n_components`` feature columns, and classifies the remaining samples
    at the 0.5 threshold.
    """
    features = _as_matrix(features)
    labels = np.asarray(labels).astype(int)
    n = labels.size
    if not 0 < train_size < n:
        raise ValueError("train_size must be between 1 and n - 1")
    cols = features[:, :n_components]
    errors = np.empty(repeats)
    for rep in range(repeats):
        rng = _rng(seed, rep)
        train = _stratified_train_indices(labels, train_size, rng)
        mask = np.zeros(n, dtype=bool)
        mask[train] = True
        fit = logistic_fit(cols[mask], labels[mask])
        pred = predict(fit, cols[~mask])
        errors[rep] = float(np.mean(pred != labels[~mask]))
    return float(errors.mean()), float(errors.std(ddof=1)) if repeats > 1 else 0.0


def _stratified_folds(labels: np.ndarray, folds: int, rng) -> np.ndarray:
    """Fold assignment dealing each class round-robin after a shuffle."""
    assignment = np.empty(labels.size, dtype=int)
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        assignment[idx] = np.arange(idx.size) % folds
    return assignment


def cv_select_k(features, labels, k_values, folds: int = 5, seed: int = 0) -> int:
    """Number of components minimizing stratified k-fold CV error.

    Ties break toward the smallest number of components.
    """
    features = _as_matrix(features)
    labels = np.asarray(labels).astype(int)
    if labels.size < folds:
        raise ValueError("need at least as many samples as folds")
    k_values = sorted(int(k) for k in k_values)
    if not k_values:
        raise ValueError("k_values must be nonempty")
    assignment = _stratified_folds(labels, folds, _rng(seed, 0))
    scores = np.zeros(len(k_values))
    for fold in range(folds):
        test = assignment == fold
        if labels[~test].min() == labels[~test].max():
            raise SingleClass("a training fold contains a single class")
        for ki, k in enumerate(k_values):
            fit = logistic_fit(features[~test, :k], labels[~test])
            pred = predict(fit, features[test, :k])
            scores[ki] += float(np.sum(pred != labels[test]))
    best = scores.min()
    return k_values[int(np.flatnonzero(scores <= best)[0])]
