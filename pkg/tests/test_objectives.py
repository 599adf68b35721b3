"""Loss terms against direct numpy recomputation, weights validation, dedup."""

import numpy as np
import pytest

from disparity_lab import data as dlab_data
from disparity_lab.autodiff import backward, sigmoid_value
from disparity_lab.model import (ArchitectureConfig, ModelParams,
                                 forward_desired, forward_observed,
                                 forward_outcome)
from disparity_lab.objectives import (DesignData, LossWeights, ParamNodes,
                                      bce_loss_C, bce_loss_D, build_loss_graph,
                                      disparity_loss_A, interpretability_loss_B,
                                      total_loss)

BCE_FLOOR = 1e-7


def random_params(arch, seed):
    rng = np.random.default_rng(seed)
    return ModelParams(
        arch,
        rng.uniform(-1, 1, (1 + arch.n_features, arch.m)),
        rng.uniform(-1, 1, arch.m),
        rng.uniform(-1, 1, arch.m),
        rng.uniform(-1, 1),
        rng.uniform(-1, 1, 2 + arch.n_features),
        rng.uniform(-1, 1),
    )


def test_loss_weights_validation():
    LossWeights.make(0.99, 1000.0)
    with pytest.raises(ValueError):
        LossWeights(0.99, 0.5, 1000.0, 1000.0)     # b != 1 - a
    with pytest.raises(ValueError):
        LossWeights(0.99, 0.01, 1000.0, 500.0)     # c != d
    with pytest.raises(ValueError):
        LossWeights.make(0.99, 50.0)               # c < 100a
    w = LossWeights.make(0.99, 50.0, allow_weak_c=True)
    assert w.b == pytest.approx(0.01)
    with pytest.raises(ValueError):
        LossWeights.make(1.0, 1000.0)


def test_disparity_loss_matches_direct_marginalization(thm42_small):
    arch = ArchitectureConfig(1, 3, 1)
    p = random_params(arch, 21)
    ds = thm42_small
    p_h = forward_desired(p, ds.x, ds.s)
    p_y = (forward_outcome(p, ds.x, ds.s, np.ones(len(ds))) * p_h
           + forward_outcome(p, ds.x, ds.s, np.zeros(len(ds))) * (1 - p_h))
    s = ds.s.astype(bool)
    expected = abs(p_y[s].mean() - p_y[~s].mean())
    assert disparity_loss_A(p, ds) == pytest.approx(expected, rel=1e-12)


def test_interpretability_loss_is_disparity_l1(thm42_small):
    arch = ArchitectureConfig(1, 3, 1)
    p = ModelParams.zeros(arch)
    p.rep_weights[:, 0] = [9.0, 9.0]   # observed column, must not count
    p.head_weights[0] = 9.0
    p.rep_weights[:, 1] = [1.0, -2.0]
    p.rep_bias[1] = 0.5
    p.head_weights[1] = -1.5
    p.rep_weights[:, 2] = [0.25, 0.0]
    p.head_weights[2] = 0.75
    assert interpretability_loss_B(p) == pytest.approx(1 + 2 + 0.5 + 1.5 + 0.25 + 0.75)


def test_bce_losses_match_direct_formula(thm42_small):
    arch = ArchitectureConfig(1, 3, 1)
    p = random_params(arch, 22)
    ds = thm42_small

    p_h = np.clip(forward_observed(p, ds.x, ds.s), BCE_FLOOR, None)
    direct_c = -np.mean(ds.h * np.log(p_h)
                        + (1 - ds.h) * np.log(np.clip(1 - p_h, BCE_FLOOR, None)))
    assert bce_loss_C(p, ds) == pytest.approx(direct_c, rel=1e-12)

    p_y = np.clip(forward_outcome(p, ds.x, ds.s, ds.h), BCE_FLOOR, None)
    direct_d = -np.mean(ds.y * np.log(p_y)
                        + (1 - ds.y) * np.log(np.clip(1 - p_y, BCE_FLOOR, None)))
    assert bce_loss_D(p, ds) == pytest.approx(direct_d, rel=1e-12)


def test_bce_floor_keeps_saturated_heads_finite(thm42_small):
    arch = ArchitectureConfig(1, 2, 1)
    p = ModelParams.zeros(arch)
    p.head_bias = 500.0       # desired prob == 1.0 exactly in float
    p.outcome_bias = -500.0
    bd = total_loss(p, thm42_small, LossWeights.make(0.99, 1000.0))
    assert np.isfinite(bd.C) and np.isfinite(bd.D) and np.isfinite(bd.total)


def test_total_is_weighted_sum(thm42_small):
    arch = ArchitectureConfig(1, 3, 2)
    p = random_params(arch, 23)
    w = LossWeights.make(0.99, 1000.0)
    bd = total_loss(p, thm42_small, w)
    assert bd.total == pytest.approx(
        w.a * bd.A + w.b * bd.B + w.c * bd.C + w.d * bd.D, rel=1e-12)


def test_compressed_design_is_exact(thm42_small):
    arch = ArchitectureConfig(1, 3, 1)
    w = LossWeights.make(0.99, 1000.0)
    dd_full = DesignData.from_dataset(thm42_small)
    dd_comp = DesignData.from_dataset_compressed(thm42_small)
    assert dd_comp.sx.shape[0] <= 16   # 2^4 distinct (s, x, h, y) rows
    for seed in (1, 2, 3):
        pn_f = ParamNodes.from_params(random_params(arch, seed))
        pn_c = ParamNodes.from_params(random_params(arch, seed))
        g_f = build_loss_graph(pn_f, dd_full, w).breakdown(w)
        g_c = build_loss_graph(pn_c, dd_comp, w).breakdown(w)
        for name in ("A", "B", "C", "D", "total"):
            assert getattr(g_c, name) == pytest.approx(getattr(g_f, name),
                                                       rel=1e-12)


def test_compressed_gradients_match_full(thm42_small):
    arch = ArchitectureConfig(1, 3, 1)
    w = LossWeights.make(0.99, 1000.0)
    p = random_params(arch, 4)
    grads = []
    for maker in (DesignData.from_dataset, DesignData.from_dataset_compressed):
        pn = ParamNodes.from_params(p)
        graph = build_loss_graph(pn, maker(thm42_small), w, objective="total")
        backward(graph.root)
        grads.append(pn.grad_fields())
    for key in grads[0]:
        np.testing.assert_allclose(grads[0][key], grads[1][key],
                                   rtol=1e-9, atol=1e-12,
                                   err_msg=f"gradient field {key}")


def test_objective_roots(thm42_small):
    arch = ArchitectureConfig(1, 3, 1)
    p = random_params(arch, 5)
    w = LossWeights.make(0.99, 1000.0)
    dd = DesignData.from_dataset_compressed(thm42_small)
    bd = build_loss_graph(ParamNodes.from_params(p), dd, w).breakdown(w)

    fit = build_loss_graph(ParamNodes.from_params(p), dd, w,
                           objective="fit_processes")
    assert float(fit.root.value) == pytest.approx(w.c * bd.C + w.d * bd.D)
    obs = build_loss_graph(ParamNodes.from_params(p), dd, w,
                           objective="fit_observed")
    assert float(obs.root.value) == pytest.approx(w.c * bd.C)
    with pytest.raises(ValueError):
        build_loss_graph(ParamNodes.from_params(p), dd, w, objective="nope")


def test_single_group_dataset_rejected():
    ds = dlab_data.Dataset(np.ones(8, dtype=np.int8),
                           np.zeros((8, 1), dtype=np.int8),
                           np.ones(8, dtype=np.int8),
                           np.ones(8, dtype=np.int8))
    arch = ArchitectureConfig(1, 2, 1)
    p = random_params(arch, 6)
    with pytest.raises(ValueError):
        disparity_loss_A(p, ds)


def test_datasets_without_outcome_support_observed_objective(thm43_small):
    ds = thm43_small
    stripped = dlab_data.Dataset(ds.s, ds.x, ds.h, None)
    arch = ArchitectureConfig(0, 3, 2)
    p = random_params(arch, 7)
    w = LossWeights.make(0.9, 1000.0)
    dd = DesignData.from_dataset_compressed(stripped)
    graph = build_loss_graph(ParamNodes.from_params(p), dd, w,
                             objective="fit_observed")
    assert np.isfinite(float(graph.root.value))
    assert bce_loss_C(p, stripped) == pytest.approx(
        float(graph.root.value) / w.c, rel=1e-12)
