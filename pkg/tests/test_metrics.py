"""Evaluation metrics against hand values and the training objective."""

import numpy as np
import pytest

from disparity_lab import data as dlab
from disparity_lab.metrics import (EvalReport, consistency_measure,
                                   consistency_ratio, corrections,
                                   decision_accuracy, decomposition, evaluate,
                                   optimal_bce, outcome_disparity,
                                   outcome_rate_rows, split_consistency)
from disparity_lab.model import ArchitectureConfig
from disparity_lab.objectives import disparity_loss_A
from disparity_lab.training import init_params


@pytest.fixture()
def fitted_params():
    return init_params(ArchitectureConfig(1, 3, 1), "uniform_small", 31)


def test_eval_report_invariant_enforced():
    with pytest.raises(ValueError):
        EvalReport(disparity=0.5, accuracy=0.9, group_means=(0.7, 0.3),
                   corrections=np.zeros(2), cm_contribution=0.0)


def test_outcome_disparity_matches_objective_bitwise(fitted_params,
                                                     thm42_small):
    assert outcome_disparity(fitted_params, thm42_small) == disparity_loss_A(
        fitted_params, thm42_small)


def test_outcome_rates_are_mixtures(fitted_params, thm42_small):
    rates = outcome_rate_rows(fitted_params, thm42_small)
    assert rates.shape == (len(thm42_small),)
    assert (rates > 0.0).all() and (rates < 1.0).all()


def test_accuracy_ties_predict_one():
    ds = dlab.Dataset(np.array([0, 1]), np.zeros((2, 0), dtype=np.int8),
                      np.array([1, 0]), None)
    params = init_params(ArchitectureConfig(0, 2, 1), "uniform_small", 0)
    # zero all weights: desired probability is exactly 0.5 everywhere
    params.rep_weights[:] = 0.0
    params.rep_bias[:] = 0.0
    params.head_weights[:] = 0.0
    params.head_bias = 0.0
    assert decision_accuracy(params, ds) == 0.5  # predicts 1 on both rows


def test_accuracy_complement_flips(fitted_params, thm42_small):
    acc = decision_accuracy(fitted_params, thm42_small)
    flipped = dlab.Dataset(thm42_small.s, thm42_small.x,
                           1 - thm42_small.h, thm42_small.y)
    assert decision_accuracy(fitted_params, flipped) == pytest.approx(
        1.0 - acc, abs=1e-12)


class TestConsistency:
    def test_matches_two_pass_variance(self):
        rng = np.random.default_rng(5)
        deltas = rng.normal(size=400)
        s = rng.integers(0, 2, size=400)
        want = 0.0
        for g in (0, 1):
            grp = deltas[s == g]
            want += (grp.size / 400) * np.mean((grp - grp.mean()) ** 2)
        assert split_consistency(deltas, s) == pytest.approx(want, abs=1e-12)

    def test_shift_invariance_per_group(self):
        rng = np.random.default_rng(6)
        deltas = rng.normal(size=300)
        s = rng.integers(0, 2, size=300)
        shifted = deltas + np.where(s == 1, 0.37, -4.2)
        assert split_consistency(shifted, s) == pytest.approx(
            split_consistency(deltas, s), abs=1e-12)

    def test_constant_corrections_give_zero(self):
        s = np.array([0, 0, 1, 1])
        assert split_consistency(np.array([0.2, 0.2, -0.7, -0.7]), s) == 0.0

    def test_singleton_group_warns(self):
        with pytest.warns(UserWarning, match="singleton"):
            v = split_consistency(np.array([1.0, 2.0, 3.0]),
                                  np.array([0, 0, 1]))
        assert v == pytest.approx((2 / 3) * 0.25)

    def test_empty_group_rejected(self):
        with pytest.raises(ValueError):
            split_consistency(np.array([1.0, 2.0]), np.array([0, 0]))

    def test_measure_averages_splits(self):
        s = np.array([0, 1, 0, 1])
        pairs = [(np.array([1.0, 1.0, 3.0, 5.0]), s),
                 (np.array([0.0, 0.0, 0.0, 0.0]), s)]
        per_split = [split_consistency(d, g) for d, g in pairs]
        assert consistency_measure(pairs) == pytest.approx(
            np.mean(per_split), abs=1e-15)
        with pytest.raises(ValueError):
            consistency_measure([])

    def test_ratio(self):
        assert consistency_ratio(3.0, 1.5) == 2.0
        with pytest.raises(ZeroDivisionError):
            consistency_ratio(1.0, 0.0)


class TestEvaluate:
    def test_report_fields_cohere(self, fitted_params, thm42_small):
        rep = evaluate(fitted_params, thm42_small)
        gm1, gm0 = rep.group_means
        assert rep.disparity == pytest.approx(abs(gm1 - gm0), abs=1e-15)
        assert 0.0 <= rep.accuracy <= 1.0
        assert rep.corrections.shape == (len(thm42_small),)
        assert rep.cm_contribution == pytest.approx(
            split_consistency(corrections(fitted_params, thm42_small),
                              thm42_small.s), abs=1e-15)

    def test_csv_row_format(self, fitted_params, thm42_small):
        row = evaluate(fitted_params, thm42_small).csv_row("thm42", "V", 3)
        parts = row.split(",")
        assert parts[:3] == ["thm42", "V", "3"]
        assert len(parts) == 8
        float(parts[3])  # numeric fields parse back


class TestOptimalBce:
    def test_thm42_decision_and_outcome_floors(self):
        # exact lattice values the acceptance run compares against
        assert optimal_bce(dlab.THM42_SPEC, "H") == pytest.approx(0.642, abs=5e-4)
        assert optimal_bce(dlab.THM42_SPEC, "Y") == pytest.approx(0.570, abs=5e-4)

    def test_deterministic_table_has_zero_floor(self):
        assert optimal_bce(dlab.THM43_SPEC, "Y") == 0.0

    def test_empirical_bce_cannot_beat_floor(self):
        ds = dlab.gen_thm42_data(100000, 13)
        # calibrated per-cell rates: the best any predictor can do
        floor = optimal_bce(dlab.THM42_SPEC, "Y")
        p = np.empty(len(ds))
        for (s, x, h), prob in dlab.THM42_SPEC.y_table.items():
            p[(ds.s == s) & (ds.x[:, 0] == x[0]) & (ds.h == h)] = prob
        emp = -np.mean(ds.y * np.log(p) + (1 - ds.y) * np.log(1 - p))
        sigma = np.std(ds.y * np.log(p) + (1 - ds.y) * np.log(1 - p))
        assert abs(emp - floor) < 3.0 * sigma / np.sqrt(len(ds))

    def test_rejects_unknown_target(self):
        with pytest.raises(ValueError):
            optimal_bce(dlab.THM42_SPEC, "Z")


def test_decomposition_examples():
    assert decomposition(0.6, 0.0953, 0.0572) == pytest.approx(0.6 * 0.0572 + 0.0953)
    assert decomposition(1.0, 0.0, 0.3) == pytest.approx(0.3)
    assert decomposition(0.6, -0.18, 0.3) == pytest.approx(0.0, abs=1e-15)
    cfg = dlab.make_case_config("III", c_param=0.3)
    assert decomposition(cfg.a_param, cfg.b_param, cfg.c_param) == pytest.approx(
        0.0, abs=1e-12)
