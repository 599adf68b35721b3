"""Adam optimization and the two-phase, multi-restart training protocol.

Phase 1 fits the observed decision head and the outcome head on the two
cross-entropy terms with the disparity nodes pinned at zero.  Phase 2 freezes
everything phase 1 learned and trains only the disparity-node weights on the
full objective.  Both phases restart from several seeded initializations and
keep the fit with the smallest selection loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import seeding
from .autodiff import backward
from .model import ArchitectureConfig, ModelParams
from .objectives import (DesignData, LossBreakdown, LossWeights, ParamNodes,
                         build_loss_graph)

INIT_SCHEMES = ("uniform_small", "theorem41_region")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    fits: int = 100
    learning_rate: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    master_seed: int = 0
    init_scheme: str = "uniform_small"

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("need epochs >= 1")
        if self.fits < 1:
            raise ValueError("need fits >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("need learning_rate > 0")
        if self.init_scheme not in INIT_SCHEMES:
            raise ValueError(f"unknown init scheme {self.init_scheme!r}")


@dataclass
class FitResult:
    params: ModelParams
    final_losses: LossBreakdown
    seed: int
    phase: str  # observed_outcome | disparity


# -- parameter flattening ----------------------------------------------------

def params_to_dict(params: ModelParams) -> dict[str, np.ndarray]:
    return {
        "rep_weights": params.rep_weights.copy(),
        "rep_bias": params.rep_bias.copy(),
        "head_weights": params.head_weights.copy(),
        "head_bias": np.array([params.head_bias]),
        "outcome_weights": params.outcome_weights.copy(),
        "outcome_bias": np.array([params.outcome_bias]),
    }


def dict_to_params(arch: ArchitectureConfig, d: dict[str, np.ndarray]) -> ModelParams:
    return ModelParams(arch, d["rep_weights"].copy(), d["rep_bias"].copy(),
                       d["head_weights"].copy(), float(d["head_bias"][0]),
                       d["outcome_weights"].copy(), float(d["outcome_bias"][0]))


def disparity_mask(arch: ArchitectureConfig, trainable: bool) -> dict[str, np.ndarray]:
    """1.0 where a parameter may move.  trainable=True: only disparity-node
    parameters; trainable=False: everything but them."""
    base = 0.0 if trainable else 1.0
    mask = {
        "rep_weights": np.full((1 + arch.n_features, arch.m), base),
        "rep_bias": np.full(arch.m, base),
        "head_weights": np.full(arch.m, base),
        "head_bias": np.array([base]),
        "outcome_weights": np.full(2 + arch.n_features, base),
        "outcome_bias": np.array([base]),
    }
    flip = 1.0 - base
    for j in arch.disparity_nodes:
        mask["rep_weights"][:, j] = flip
        mask["rep_bias"][j] = flip
        mask["head_weights"][j] = flip
    return mask


# -- Adam --------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def like(cls, values: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in values.items()},
                   {k: np.zeros_like(a) for k, a in values.items()})


def adam_step(values: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, config: TrainConfig,
              mask: dict[str, np.ndarray] | None = None) -> None:
    """One in-place Adam update.  Masked entries keep zero moments, so frozen
    parameters stay bit-identical."""
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    state.t += 1
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for key, theta in values.items():
        g = grads[key]
        if mask is not None:
            g = g * mask[key]
        m = state.m[key]
        v = state.v[key]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        theta -= (config.learning_rate * (m / c1)
                  / (np.sqrt(v / c2) + config.adam_eps))


# -- initialization ----------------------------------------------------------

def init_params(arch: ArchitectureConfig, scheme: str, seed,
                delta_hint: float | None = None) -> ModelParams:
    """uniform_small: every parameter ~ U(-0.5, 0.5).  theorem41_region: same,
    but each disparity node is drawn inside the convergence region for
    sign(delta_hint): w_SR > 0, bias >= -w_SR, and w opposing delta."""
    if scheme not in INIT_SCHEMES:
        raise ValueError(f"unknown init scheme {scheme!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = ModelParams(
        arch,
        rng.uniform(-0.5, 0.5, (1 + arch.n_features, arch.m)),
        rng.uniform(-0.5, 0.5, arch.m),
        rng.uniform(-0.5, 0.5, arch.m),
        float(rng.uniform(-0.5, 0.5)),
        rng.uniform(-0.5, 0.5, 2 + arch.n_features),
        float(rng.uniform(-0.5, 0.5)),
    )
    if scheme == "theorem41_region":
        if delta_hint is None or delta_hint == 0.0:
            raise ValueError("theorem41_region needs a nonzero delta_hint")
        init_disparity_region(params, rng, delta_hint)
    return params


def init_disparity_region(params: ModelParams, rng: np.random.Generator,
                          delta_hint: float) -> None:
    """Redraw disparity-node S-weight/bias/head-weight inside the region that
    guarantees convergence for the sign of delta_hint."""
    for j in params.arch.disparity_nodes:
        w_sr = rng.uniform(0.0, 0.5)
        bias = rng.uniform(-w_sr, 0.5)
        w = rng.uniform(0.0, 0.5)
        if delta_hint > 0:
            w = -w
        params.rep_weights[0, j] = w_sr
        params.rep_bias[j] = bias
        params.head_weights[j] = w


# -- fit loop ----------------------------------------------------------------

def run_fit(dd: DesignData, params0: ModelParams, weights: LossWeights,
            config: TrainConfig, objective: str,
            mask: dict[str, np.ndarray] | None, seed: int, phase: str,
            log=None) -> FitResult:
    """Full-batch training from a fixed starting point; one Adam step per
    epoch.  `log`, when given, is called with (epoch, LossBreakdown)."""
    arch = params0.arch
    values = params_to_dict(params0)
    state = AdamState.like(values)
    for epoch in range(config.epochs):
        params = dict_to_params(arch, values)
        pn = ParamNodes.from_params(params)
        graph = build_loss_graph(pn, dd, weights, objective=objective)
        backward(graph.root)
        if log is not None:
            log(epoch, graph.breakdown(weights))
        adam_step(values, pn.grad_fields(), state, config, mask)
    params = dict_to_params(arch, values)
    pn = ParamNodes.from_params(params)
    graph = build_loss_graph(pn, dd, weights, objective=objective)
    final = graph.breakdown(weights)
    if log is not None:
        log(config.epochs, final)
    if not math.isfinite(final.total):
        raise FloatingPointError(f"non-finite loss after fit (seed {seed})")
    return FitResult(params, final, seed, phase)


def _selection_loss(result: FitResult, weights: LossWeights, phase: str) -> float:
    bd = result.final_losses
    if phase == "observed_outcome":
        return weights.c * bd.C + weights.d * bd.D
    return bd.total


def train_phase1(dataset, arch: ArchitectureConfig, weights: LossWeights,
                 config: TrainConfig, log_factory=None) -> FitResult:
    """Best-of-fits on the two cross-entropy terms; disparity nodes stay 0."""
    dd = DesignData.from_dataset_compressed(dataset)
    mask = disparity_mask(arch, trainable=False)
    best: FitResult | None = None
    for fit_index in range(config.fits):
        seed = seeding.derive_seed(config.master_seed, seeding.PHASE1, fit_index)
        params0 = init_params(arch, "uniform_small", seed).with_zeroed_disparity()
        log = log_factory(fit_index) if log_factory else None
        result = run_fit(dd, params0, weights, config, "fit_processes",
                         mask, seed, "observed_outcome", log)
        if best is None or (_selection_loss(result, weights, result.phase)
                            < _selection_loss(best, weights, best.phase)):
            best = result
    return best


def train_phase2(dataset, frozen: FitResult, weights: LossWeights,
                 config: TrainConfig, delta_hint: float | None = None,
                 log_factory=None) -> FitResult:
    """Best-of-fits on the full objective, moving only disparity-node weights."""
    dd = DesignData.from_dataset_compressed(dataset)
    arch = frozen.params.arch
    mask = disparity_mask(arch, trainable=True)
    best: FitResult | None = None
    for fit_index in range(config.fits):
        seed = seeding.derive_seed(config.master_seed, seeding.PHASE2, fit_index)
        rng = np.random.default_rng(seed)
        params0 = frozen.params.copy()
        if config.init_scheme == "theorem41_region":
            init_disparity_region(params0, rng, _require_hint(delta_hint))
        else:
            for j in arch.disparity_nodes:
                params0.rep_weights[:, j] = rng.uniform(-0.5, 0.5, 1 + arch.n_features)
                params0.rep_bias[j] = rng.uniform(-0.5, 0.5)
                params0.head_weights[j] = rng.uniform(-0.5, 0.5)
        log = log_factory(fit_index) if log_factory else None
        result = run_fit(dd, params0, weights, config, "total",
                         mask, seed, "disparity", log)
        if best is None or result.final_losses.total < best.final_losses.total:
            best = result
    return best


def _require_hint(delta_hint: float | None) -> float:
    if delta_hint is None or delta_hint == 0.0:
        raise ValueError("theorem41_region needs a nonzero delta_hint")
    return delta_hint


def kfold_select_m_obs(dataset, candidates: list[int], folds: int,
                       config: TrainConfig,
                       weights: LossWeights | None = None) -> tuple[int, dict[int, float]]:
    """Pick m_obs by mean validation cross-entropy of the observed head.

    Uses only (S, X, H); Y plays no part, so it may run before outcome
    injection.  Ties break toward the smaller candidate.
    """
    if folds < 2:
        raise ValueError("need folds >= 2")
    if not candidates:
        raise ValueError("need at least one candidate")
    for cand in candidates:
        if cand < 1 or cand > dataset.n_features + 1:
            raise ValueError(f"candidate m_obs {cand} outside [1, n_features+1]")
    if weights is None:
        weights = LossWeights.make(0.5, 50.0)
    from .objectives import bce_loss_C  # local import avoids cycle at startup

    n = len(dataset)
    rng = seeding.rng_for(config.master_seed, seeding.FOLD)
    perm = rng.permutation(n)
    bounds = np.linspace(0, n, folds + 1).astype(int)
    scores: dict[int, float] = {}
    for cand in candidates:
        arch = ArchitectureConfig(dataset.n_features, cand + 1, cand)
        fold_losses = []
        for k in range(folds):
            val_idx = perm[bounds[k]:bounds[k + 1]]
            train_idx = np.concatenate([perm[:bounds[k]], perm[bounds[k + 1]:]])
            train_ds = dataset.subset(train_idx)
            val_ds = dataset.subset(val_idx)
            dd = DesignData.from_dataset(train_ds)
            mask = disparity_mask(arch, trainable=False)
            best = None
            for fit_index in range(config.fits):
                seed = seeding.derive_seed(config.master_seed, seeding.FOLD,
                                           cand, k, fit_index)
                params0 = init_params(arch, "uniform_small",
                                      seed).with_zeroed_disparity()
                result = run_fit(dd, params0, weights, config, "fit_observed",
                                 mask, seed, "observed_outcome")
                if best is None or result.final_losses.C < best.final_losses.C:
                    best = result
            fold_losses.append(bce_loss_C(best.params, val_ds))
        scores[cand] = float(np.mean(fold_losses))
    chosen = min(sorted(candidates), key=lambda c: scores[c])
    return chosen, scores
