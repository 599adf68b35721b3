"""Evaluation metrics: disparity, accuracy, consistency, and exact BCE floors."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset, GeneratorSpec
from .model import ModelParams, forward_desired, forward_observed, forward_outcome
from .objectives import disparity_loss_A


@dataclass(frozen=True)
class EvalReport:
    disparity: float
    accuracy: float
    group_means: tuple[float, float]   # (Pr(Y=1|S=1), Pr(Y=1|S=0)) under the desired head
    corrections: np.ndarray            # per-row desired - observed probability
    cm_contribution: float             # this split's weighted within-group variance

    def __post_init__(self) -> None:
        gm1, gm0 = self.group_means
        if not math.isclose(self.disparity, abs(gm1 - gm0),
                            rel_tol=0.0, abs_tol=1e-9):
            raise ValueError("disparity must equal |group mean difference|")

    def csv_row(self, dataset: str, case: str, split: int) -> str:
        gm1, gm0 = self.group_means
        return (f"{dataset},{case},{split},{self.disparity:.10g},"
                f"{self.accuracy:.10g},{self.cm_contribution:.10g},"
                f"{gm1:.10g},{gm0:.10g}")


def outcome_rate_rows(params: ModelParams, dataset: Dataset) -> np.ndarray:
    """Per-row Pr(Y=1) marginalizing H over the desired decision head."""
    p_des = np.atleast_1d(forward_desired(params, dataset.x, dataset.s))
    ones = np.ones(len(dataset))
    p1 = np.atleast_1d(forward_outcome(params, dataset.x, dataset.s, ones))
    p0 = np.atleast_1d(forward_outcome(params, dataset.x, dataset.s, ones * 0.0))
    return p1 * p_des + p0 * (1.0 - p_des)


def outcome_disparity(params: ModelParams, dataset: Dataset) -> float:
    """Same code path as the training objective's disparity term."""
    return disparity_loss_A(params, dataset)


def decision_accuracy(params: ModelParams, dataset: Dataset) -> float:
    """Fraction of rows where thresholding the desired head recovers H."""
    p = np.atleast_1d(forward_desired(params, dataset.x, dataset.s))
    preds = (p >= 0.5).astype(np.int8)  # ties predict 1
    return float((preds == dataset.h).mean())


def corrections(params: ModelParams, dataset: Dataset) -> np.ndarray:
    p_des = np.atleast_1d(forward_desired(params, dataset.x, dataset.s))
    p_obs = np.atleast_1d(forward_observed(params, dataset.x, dataset.s))
    return p_des - p_obs


def split_consistency(deltas: np.ndarray, s: np.ndarray) -> float:
    """Group-size-weighted within-group variance of correction values."""
    deltas = np.asarray(deltas, dtype=np.float64)
    s = np.asarray(s)
    n = deltas.shape[0]
    if n == 0 or s.shape[0] != n:
        raise ValueError("need matching nonempty corrections and s")
    total = 0.0
    for g in (0, 1):
        grp = deltas[s == g]
        if grp.size == 0:
            raise ValueError(f"S={g} group is empty")
        if grp.size == 1:
            warnings.warn(f"S={g} group is a singleton; variance taken as 0")
            continue
        if grp.min() == grp.max():
            continue  # constant corrections: exactly 0, not mean-rounding noise
        total += (grp.size / n) * float(grp.var(ddof=0))
    return total


def consistency_measure(split_corrections) -> float:
    """Mean over splits of the weighted within-group correction variance.

    Input: iterable of (corrections, s) pairs, one per train-test split.
    """
    vals = [split_consistency(d, s) for d, s in split_corrections]
    if not vals:
        raise ValueError("need at least one split")
    return float(np.mean(vals))


def consistency_ratio(cm_other: float, cm_lrd: float) -> float:
    if cm_lrd == 0.0:
        raise ZeroDivisionError("comparator ratio undefined at CM = 0")
    return cm_other / cm_lrd


def evaluate(params: ModelParams, dataset: Dataset) -> EvalReport:
    dataset.require_both_groups()
    rates = outcome_rate_rows(params, dataset)
    s = dataset.s.astype(bool)
    gm1 = float(rates[s].mean())
    gm0 = float(rates[~s].mean())
    deltas = corrections(params, dataset)
    return EvalReport(
        disparity=abs(gm1 - gm0),
        accuracy=decision_accuracy(params, dataset),
        group_means=(gm1, gm0),
        corrections=deltas,
        cm_contribution=split_consistency(deltas, dataset.s),
    )


def _entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log(p) - (1.0 - p) * math.log(1.0 - p)


def optimal_bce(spec: GeneratorSpec, target: str) -> float:
    """Exact E[-p log p - (1-p) log(1-p)] over the generator's input lattice.

    This is the cross-entropy a perfectly calibrated predictor attains; no
    model can average below it on data drawn from the spec.
    """
    if target not in ("H", "Y"):
        raise ValueError("target must be 'H' or 'Y'")
    total = 0.0
    k = len(spec.p_x1)
    for s in (0, 1):
        w_s = spec.p_s1 if s == 1 else 1.0 - spec.p_s1
        for x in itertools.product((0, 1), repeat=k):
            w_x = 1.0
            for j, bit in enumerate(x):
                w_x *= spec.p_x1[j] if bit else 1.0 - spec.p_x1[j]
            p_h = spec.h_table[(s,)]
            if target == "H":
                total += w_s * w_x * _entropy(p_h)
                continue
            for h in (0, 1):
                w_h = p_h if h == 1 else 1.0 - p_h
                total += w_s * w_x * w_h * _entropy(spec.y_table[(s, x, h)])
    return total


def decomposition(a_param: float, b_param: float, c_param: float) -> float:
    """|a*c + b|: the injected outcome disparity implied by the case knobs."""
    return abs(a_param * c_param + b_param)
