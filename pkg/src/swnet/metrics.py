"""Evaluation metrics over predicted class probabilities."""

from typing import Dict, Mapping

import numpy as np

PROB_CLAMP = 1e-12


def _check(probs: np.ndarray, labels: np.ndarray) -> None:
    if probs.ndim != 2:
        raise ValueError(f"probs must be (examples, classes), got {probs.shape}")
    if labels.shape != (probs.shape[0],):
        raise ValueError(
            f"labels must have shape ({probs.shape[0]},), got {labels.shape}"
        )
    if probs.shape[0] == 0:
        raise ValueError("metrics need at least one example")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise ValueError(
            f"labels must lie in [0, {probs.shape[1]}), got "
            f"[{labels.min()}, {labels.max()}]"
        )


def top1_accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Argmax accuracy; ties resolve to the lowest class index."""
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    _check(probs, labels)
    return float(np.mean(probs.argmax(axis=1) == labels))


def negative_log_likelihood(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log probability of the true class, clamped at 1e-12."""
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    _check(probs, labels)
    p_true = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(p_true, PROB_CLAMP))))


def expected_calibration_error(
    probs: np.ndarray, labels: np.ndarray, bins: int = 15
) -> float:
    """Confidence-binned |accuracy - confidence|, weighted by bin mass.

    Bins partition [0, 1] into equal widths over the max predicted
    probability; a confidence of exactly 1.0 falls in the top bin.
    """
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    _check(probs, labels)
    if bins < 1:
        raise ValueError(f"bins must be positive, got {bins}")
    conf = probs.max(axis=1)
    correct = probs.argmax(axis=1) == labels
    idx = np.minimum((conf * bins).astype(int), bins - 1)
    total = len(labels)
    ece = 0.0
    for b in range(bins):
        mask = idx == b
        n = int(mask.sum())
        if n == 0:
            continue
        ece += (n / total) * abs(float(correct[mask].mean()) - float(conf[mask].mean()))
    return float(ece)


def disagreement_diversity(
    preds_by_member: Mapping[int, np.ndarray],
    labels: np.ndarray,
    symmetric: bool = False,
) -> float:
    """Mean over ordered member pairs of disagreement rate over error rate.

    For pair (a, b) the numerator is the fraction of examples where the two
    predictions differ; the denominator is a's error rate, or the mean of the
    two error rates when symmetric. A member with zero errors makes the
    ratio undefined, which is reported as an error rather than hidden.
    """
    labels = np.asarray(labels)
    ids = sorted(preds_by_member)
    if len(ids) < 2:
        raise ValueError("diversity needs at least two members")
    preds = {m: np.asarray(preds_by_member[m]) for m in ids}
    for m in ids:
        if preds[m].shape != labels.shape:
            raise ValueError(
                f"member {m} predictions have shape {preds[m].shape}, "
                f"labels have {labels.shape}"
            )
    err = {m: float(np.mean(preds[m] != labels)) for m in ids}
    ratios = []
    for a in ids:
        for b in ids:
            if a == b:
                continue
            disagree = float(np.mean(preds[a] != preds[b]))
            denom = (err[a] + err[b]) / 2.0 if symmetric else err[a]
            if denom == 0.0:
                raise ValueError(
                    f"member {a if not symmetric else (a, b)} has zero error; "
                    "disagreement-over-error is undefined"
                )
            ratios.append(disagree / denom)
    return float(np.mean(ratios))


def evaluate_probs(
    probs: np.ndarray, labels: np.ndarray, bins: int = 15
) -> Dict[str, float]:
    return {
        "top1": top1_accuracy(probs, labels),
        "nll": negative_log_likelihood(probs, labels),
        "ece": expected_calibration_error(probs, labels, bins=bins),
    }
