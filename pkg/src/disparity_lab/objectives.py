"""The four training objectives and their weighted total.

A: absolute gap between the two S-groups' mean predicted outcome rates, with
   the decision marginalized over the desired head.
B: L1 norm of every disparity-node parameter (interpretability pressure).
C: cross-entropy of the observed head against recorded decisions H.
D: cross-entropy of the outcome head against recorded outcomes Y, feeding the
   recorded H of each row.

Everything is full batch.  The same tape graph serves value reporting, the
training loop, and gradient checks; per-row multiplicity weights let callers
run on deduplicated datasets without changing any result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .model import ArchitectureConfig, ModelParams, design_matrix

BCE_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    a: float
    b: float
    c: float
    d: float
    allow_weak_c: bool = False

    def __post_init__(self) -> None:
        if not (0.0 < self.a < 1.0):
            raise ValueError("need 0 < a < 1")
        if abs(self.b - (1.0 - self.a)) > 1e-12:
            raise ValueError("need b = 1 - a")
        if self.c != self.d:
            raise ValueError("need c = d")
        if self.c < 100.0 * self.a and not self.allow_weak_c:
            raise ValueError("need c >= 100*a (pass allow_weak_c to override)")

    @classmethod
    def make(cls, a: float, c: float, allow_weak_c: bool = False) -> "LossWeights":
        return cls(a=a, b=1.0 - a, c=c, d=c, allow_weak_c=allow_weak_c)


@dataclass(frozen=True)
class LossBreakdown:
    A: float
    B: float
    C: float
    D: float
    total: float

    def csv_row(self, fit_id: int, epoch: int) -> str:
        return (f"{fit_id},{epoch},{self.A:.10g},{self.B:.10g},"
                f"{self.C:.10g},{self.D:.10g},{self.total:.10g}")


@dataclass
class DesignData:
    """Dataset columns prepared for the loss graph: S|X matrix, labels, weights."""

    sx: np.ndarray
    h: np.ndarray
    y: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_dataset(cls, dataset) -> "DesignData":
        sx = design_matrix(dataset.s, dataset.x)
        n = sx.shape[0]
        return cls(sx, np.asarray(dataset.h, dtype=np.float64),
                   _y_column(dataset, n), np.full(n, 1.0 / n))

    @classmethod
    def from_dataset_compressed(cls, dataset) -> "DesignData":
        """Collapse identical (s, x, h, y) rows into one weighted row.

        Every loss term is a weighted mean over rows, so this is exact, and
        it makes full-batch epochs O(distinct rows).
        """
        sx = design_matrix(dataset.s, dataset.x)
        n = sx.shape[0]
        full = np.column_stack([sx,
                                np.asarray(dataset.h, dtype=np.float64),
                                _y_column(dataset, n)])
        rows, counts = np.unique(full, axis=0, return_counts=True)
        return cls(rows[:, :-2], rows[:, -2], rows[:, -1],
                   counts.astype(np.float64) / counts.sum())

    @property
    def s(self) -> np.ndarray:
        return self.sx[:, 0]


@dataclass
class ParamNodes:
    """Tape leaves mirroring ModelParams, one vector node per hidden column."""

    arch: ArchitectureConfig
    rep_cols: list[Node]
    rep_bias: list[Node]
    head_w: list[Node]
    head_bias: Node
    out_sx: Node
    out_h: Node
    out_bias: Node

    @classmethod
    def from_params(cls, params: ModelParams) -> "ParamNodes":
        a = params.arch
        return cls(
            arch=a,
            rep_cols=[ad.wrap(params.rep_weights[:, i]) for i in range(a.m)],
            rep_bias=[ad.wrap(float(params.rep_bias[i])) for i in range(a.m)],
            head_w=[ad.wrap(float(params.head_weights[i])) for i in range(a.m)],
            head_bias=ad.wrap(params.head_bias),
            out_sx=ad.wrap(params.outcome_weights[:-1]),
            out_h=ad.wrap(float(params.outcome_weights[-1])),
            out_bias=ad.wrap(params.outcome_bias),
        )

    def grad_fields(self) -> dict[str, np.ndarray]:
        """Collect adjoints into arrays shaped like the ModelParams fields."""
        a = self.arch

        def g(node: Node, size: int | None = None):
            if size is None:
                return float(np.sum(node.grad))
            out = np.asarray(node.grad, dtype=np.float64)
            if out.ndim == 0 or np.isscalar(node.grad):
                return np.zeros(size)
            return out

        rep = np.zeros((1 + a.n_features, a.m))
        for i in range(a.m):
            rep[:, i] = g(self.rep_cols[i], 1 + a.n_features)
        ow = np.zeros(2 + a.n_features)
        ow[:-1] = g(self.out_sx, 1 + a.n_features)
        ow[-1] = g(self.out_h)
        return {
            "rep_weights": rep,
            "rep_bias": np.array([g(b) for b in self.rep_bias]),
            "head_weights": np.array([g(w) for w in self.head_w]),
            "head_bias": np.array([g(self.head_bias)]),
            "outcome_weights": ow,
            "outcome_bias": np.array([g(self.out_bias)]),
        }

    def leaves(self) -> list[Node]:
        return (self.rep_cols + self.rep_bias + self.head_w
                + [self.head_bias, self.out_sx, self.out_h, self.out_bias])


@dataclass
class LossGraph:
    A: Node
    B: Node
    C: Node
    D: Node
    root: Node

    def breakdown(self, weights: LossWeights) -> LossBreakdown:
        a_val = float(self.A.value)
        b_val = float(self.B.value)
        c_val = float(self.C.value)
        d_val = float(self.D.value)
        total = (weights.a * a_val + weights.b * b_val
                 + weights.c * c_val + weights.d * d_val)
        return LossBreakdown(a_val, b_val, c_val, d_val, total)


def _y_column(dataset, n: int) -> np.ndarray:
    # datasets without an outcome train with objective "fit_observed", where
    # the D term is never part of the root; zeros keep the graph well-formed
    if getattr(dataset, "y", None) is None:
        return np.zeros(n)
    return np.asarray(dataset.y, dtype=np.float64)


def _weighted_bce(p: Node, labels: np.ndarray, weights: np.ndarray) -> Node:
    lp = ad.log(p, floor=BCE_EPS)
    lq = ad.log(ad.add(ad.mul(p, -1.0), 1.0), floor=BCE_EPS)
    acc = ad.add(ad.mul(lp, weights * labels), ad.mul(lq, weights * (1.0 - labels)))
    return ad.mul(ad.vsum(acc), -1.0)


def build_loss_graph(pn: ParamNodes, dd: DesignData, weights: LossWeights,
                     objective: str = "total") -> LossGraph:
    """Assemble the full loss tape; `objective` picks the root to optimize.

    objective "total" roots at aA + bB + cC + dD; "fit_processes" roots at
    cC + dD only (the phase that learns the observed and outcome processes).
    """
    arch = pn.arch
    if dd.sx.shape[1] != 1 + arch.n_features:
        raise ValueError("design matrix width does not match architecture")
    w_s1 = dd.weights * dd.s
    w_s0 = dd.weights * (1.0 - dd.s)
    if w_s1.sum() <= 0.0 or w_s0.sum() <= 0.0:
        raise ValueError("dataset must contain both S groups")

    acts = [ad.relu(ad.add(ad.dot(dd.sx, pn.rep_cols[i]), pn.rep_bias[i]))
            for i in range(arch.m)]
    z = pn.head_bias
    for i in range(arch.m_obs):
        z = ad.add(z, ad.mul(acts[i], pn.head_w[i]))
    p_obs = ad.sigmoid(z)
    for i in arch.disparity_nodes:
        z = ad.add(z, ad.mul(acts[i], pn.head_w[i]))
    p_des = ad.sigmoid(z)

    z_out = ad.add(ad.dot(dd.sx, pn.out_sx), pn.out_bias)
    p_out0 = ad.sigmoid(z_out)
    p_out1 = ad.sigmoid(ad.add(z_out, pn.out_h))
    p_out_rec = ad.sigmoid(ad.add(z_out, ad.mul(pn.out_h, dd.h)))

    # A: group gap of E[Y=1] with H marginalized over the desired head
    group_w = w_s1 / w_s1.sum() - w_s0 / w_s0.sum()
    row_rate = ad.add(ad.mul(p_out1, p_des),
                      ad.mul(p_out0, ad.add(ad.mul(p_des, -1.0), 1.0)))
    loss_a = ad.absval(ad.vsum(ad.mul(row_rate, group_w)))

    # B: L1 over every disparity-node parameter
    loss_b = ad.wrap(0.0)
    for i in arch.disparity_nodes:
        loss_b = ad.add(loss_b, ad.vsum(ad.absval(pn.rep_cols[i])))
        loss_b = ad.add(loss_b, ad.absval(pn.rep_bias[i]))
        loss_b = ad.add(loss_b, ad.absval(pn.head_w[i]))

    loss_c = _weighted_bce(p_obs, dd.h, dd.weights)
    loss_d = _weighted_bce(p_out_rec, dd.y, dd.weights)

    if objective == "fit_observed":
        root = ad.mul(loss_c, weights.c)
    elif objective == "fit_processes":
        root = ad.add(ad.mul(loss_c, weights.c), ad.mul(loss_d, weights.d))
    elif objective == "total":
        root = ad.add(
            ad.add(ad.mul(loss_a, weights.a), ad.mul(loss_b, weights.b)),
            ad.add(ad.mul(loss_c, weights.c), ad.mul(loss_d, weights.d)))
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return LossGraph(loss_a, loss_b, loss_c, loss_d, root)


def _graph_for(params: ModelParams, dataset,
               weights: LossWeights | None = None) -> LossGraph:
    w = weights or LossWeights.make(0.5, 50.0)
    return build_loss_graph(ParamNodes.from_params(params),
                            DesignData.from_dataset(dataset), w)


def disparity_loss_A(params: ModelParams, dataset) -> float:
    """Objective A, the absolute outcome-rate gap between the S groups."""
    return float(_graph_for(params, dataset).A.value)


def interpretability_loss_B(params: ModelParams) -> float:
    """Objective B, the L1 norm of the disparity-node parameters."""
    total = 0.0
    for w, w_sr, w_xr, bias in params.disparity_triples():
        total += abs(w) + abs(w_sr) + float(np.abs(w_xr).sum()) + abs(bias)
    return total


def bce_loss_C(params: ModelParams, dataset) -> float:
    """Objective C, cross-entropy of the observed head against H."""
    return float(_graph_for(params, dataset).C.value)


def bce_loss_D(params: ModelParams, dataset) -> float:
    """Objective D, cross-entropy of the outcome head against Y at recorded H."""
    return float(_graph_for(params, dataset).D.value)


def total_loss(params: ModelParams, dataset, weights: LossWeights) -> LossBreakdown:
    return _graph_for(params, dataset, weights).breakdown(weights)
