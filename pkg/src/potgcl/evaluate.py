"""Linear-probe node classification on frozen embeddings."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import split_masks

log = logging.getLogger(__name__)


@dataclass
class ClassifierParams:
    W: np.ndarray
    b: np.ndarray
    warnings: tuple = ()


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def logreg_objective(params, Z, y, l2):
    probs = _softmax(Z @ params.W + params.b)
    ce = -np.mean(np.log(probs[np.arange(len(y)), y] + 1e-300))
    return ce + 0.5 * l2 * np.sum(params.W**2)


def fit_logreg(Z, labels, mask_train, epochs=1000, lr=0.01, l2=1e-4, num_classes=None, seed=0, history=None):
    """Multinomial logistic regression by full-batch gradient descent.

    The l2 penalty (on ``W`` only) is applied as a proximal step,
    ``W <- (W - lr * grad) / (1 + lr * l2)``, which stays stable for any
    penalty strength.  Pass a list as ``history`` to record the objective
    before every step.
    """
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask_train, dtype=bool)
    C = int(num_classes if num_classes is not None else labels.max() + 1)
    if C < 2:
        raise ValidationError("classification needs at least two classes")
    X, y = Z[mask], labels[mask]
    missing = sorted(set(range(C)) - set(y.tolist()))
    notes = ()
    if missing:
        notes = (f"classes absent from the training mask: {missing}",)
        log.warning(notes[0])

    rng = np.random.default_rng(seed)
    params = ClassifierParams(W=rng.normal(scale=1e-3, size=(Z.shape[1], C)), b=np.zeros(C), warnings=notes)
    onehot = np.eye(C)[y]
    for _ in range(epochs):
        if history is not None:
            history.append(logreg_objective(params, X, y, l2))
        err = (_softmax(X @ params.W + params.b) - onehot) / len(y)
        params.W = (params.W - lr * (X.T @ err)) / (1.0 + lr * l2)
        params.b = params.b - lr * err.sum(axis=0)
    return params


def predict(params, Z):
    # argmax picks the lowest index among ties
    return np.argmax(np.asarray(Z) @ params.W + params.b, axis=1)


def f1_scores(pred, truth, num_classes):
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValidationError("prediction and truth lengths differ")
    for name, arr in (("pred", pred), ("truth", truth)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ValidationError(f"{name} contains labels outside [0, {num_classes})")
    classes = np.arange(num_classes)
    tp = np.array([np.sum((pred == c) & (truth == c)) for c in classes], dtype=np.float64)
    fp = np.array([np.sum((pred == c) & (truth != c)) for c in classes], dtype=np.float64)
    fn = np.array([np.sum((pred != c) & (truth == c)) for c in classes], dtype=np.float64)

    denom = tp.sum() + 0.5 * (fp.sum() + fn.sum())
    micro = tp.sum() / denom if denom > 0 else 0.0
    per_class_denom = tp + 0.5 * (fp + fn)
    per_class = np.divide(tp, per_class_denom, out=np.zeros_like(tp), where=per_class_denom > 0)
    # classes with neither support nor predictions count as F1 = 0
    macro = per_class.mean()
    return float(micro), float(macro)


def evaluate_embeddings(Z, labels, seeds=(0, 1, 2, 3, 4), train_frac=0.1, valid_frac=0.1, **fit_kwargs):
    """Mean and sample std of test Micro/Macro-F1 over seeded splits and fits."""
    labels = np.asarray(labels, dtype=np.int64)
    C = int(labels.max()) + 1
    micro, macro = [], []
    for seed in seeds:
        split = split_masks(len(labels), train_frac, valid_frac, seed)
        params = fit_logreg(Z, labels, split.train, num_classes=C, seed=seed, **fit_kwargs)
        mi, ma = f1_scores(predict(params, np.asarray(Z)[split.test]), labels[split.test], C)
        micro.append(mi)
        macro.append(ma)
    ddof = 1 if len(seeds) > 1 else 0
    return {
        "micro_mean": float(np.mean(micro)),
        "micro_std": float(np.std(micro, ddof=ddof)),
        "macro_mean": float(np.mean(macro)),
        "macro_std": float(np.std(macro, ddof=ddof)),
        "seeds": list(seeds),
        "micro": micro,
        "macro": macro,
    }
