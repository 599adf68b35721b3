"""Closed forms, branch numerics, and the brute-force grid cross-check."""

import math

import numpy as np
import pytest

from disparity_lab.theory import (BRANCH_KINDS, TheoremScenario,
                                  aligned_grid_spec, branch_fn, branch_loss,
                                  branch_minimum, branch_weights,
                                  corrected_gap, golden_section, grid_oracle,
                                  grid_step, no_change_loss, penalized_loss,
                                  thm41_optimum, thm42_optimum,
                                  thm43_branch_report, thm43_optimum)

# the four single-node settings exercised throughout: (scenario, winner,
# expected loss, expected budget, winning weights)
SETTINGS = [
    (TheoremScenario(5.0, 1.0, -4.595, 0.9), "L1", 0.3999, 3.4704,
     (-1.7352, 1.7352, 0.0)),
    (TheoremScenario(10.0, 1.0, -2.0, 0.9), "L2", 0.4896, 4.4184,
     (2.2092, 0.0, 2.2092)),
    (TheoremScenario(-5.0, 1.0, 4.595, 0.9), "L3", 0.3999, 3.4704,
     (1.7352, 1.7352, 0.0)),
    (TheoremScenario(-10.0, 1.0, 2.0, 0.9), "L4", 0.4896, 4.4184,
     (-2.2092, 0.0, 2.2092)),
]


def test_scenario_validation():
    with pytest.raises(ValueError):
        TheoremScenario(0.0)
    with pytest.raises(ValueError):
        TheoremScenario(1.0, alpha=0.0)
    with pytest.raises(ValueError):
        TheoremScenario(1.0, a=1.0)


@pytest.mark.parametrize("delta", [0.5, 1.2528, 5.0, -0.5, -1.2528, -5.0])
def test_thm41_closed_form(delta):
    rep = thm41_optimum(delta)
    root = math.sqrt(abs(delta))
    assert rep.l_min == pytest.approx(2.0 * root, rel=1e-12)
    w, w_sr, bias = rep.weights
    assert w == pytest.approx(-math.copysign(root, delta))
    assert w_sr == pytest.approx(root)
    assert bias == 0.0
    # the construction nulls the decision gap exactly
    sc = TheoremScenario(delta, a=0.999)
    assert corrected_gap(sc, *rep.weights) == pytest.approx(0.0, abs=1e-12)


def test_thm42_every_node_carries_the_same_optimum():
    reps = thm42_optimum(5.0, 4)
    assert [r.active_node for r in reps] == [0, 1, 2, 3]
    base = thm41_optimum(5.0)
    for r in reps:
        assert r.l_min == pytest.approx(base.l_min)
        assert r.weights == base.weights
        # product of the active pair recovers -delta on the s=1 logit
        w, w_sr, _ = r.weights
        assert w * w_sr == pytest.approx(-5.0)


def test_branch_fn_hand_values():
    sc = TheoremScenario(5.0, 1.0, -4.595, 0.9)
    sig = lambda z: 1.0 / (1.0 + math.exp(-z))
    # SD shifts the larger logit down by x; EI raises both by x
    assert branch_fn("SD", 2.0, sc) == pytest.approx(
        sig(-4.595 + 5.0 - 2.0) - sig(-4.595))
    assert branch_fn("EI", 3.0, sc) == pytest.approx(
        sig(-4.595 + 5.0 + 3.0) - sig(-4.595 + 3.0))
    neg = TheoremScenario(-5.0, 1.0, 4.595, 0.9)
    assert branch_fn("SI", 2.0, neg) == pytest.approx(
        sig(4.595) - sig(4.595 - 5.0 + 2.0))
    assert branch_fn("ED", 3.0, neg) == pytest.approx(
        sig(4.595 - 3.0) - sig(4.595 - 5.0 - 3.0))


@pytest.mark.parametrize("kind", BRANCH_KINDS)
def test_branch_loss_equals_penalized_loss_at_branch_weights(kind):
    sc = (TheoremScenario(5.0, 1.0, -4.595, 0.9) if kind in ("SD", "EI")
          else TheoremScenario(-5.0, 1.0, 4.595, 0.9))
    for b in (0.5, 2.0, 3.4704):
        w = branch_weights(kind, b)
        assert branch_loss(kind, b, sc) == pytest.approx(
            penalized_loss(sc, *w), rel=1e-12)
        assert sum(abs(v) for v in w) == pytest.approx(b)


@pytest.mark.parametrize("sc,label,l_min,b_opti,weights", SETTINGS)
def test_numerical_optimum_four_settings(sc, label, l_min, b_opti, weights):
    rep = thm43_optimum(sc)
    assert rep.branch == label
    assert rep.l_min == pytest.approx(l_min, abs=5e-4)
    assert rep.b_opti == pytest.approx(b_opti, abs=5e-4)
    for got, want in zip(rep.weights, weights):
        assert got == pytest.approx(want, abs=5e-4)


def test_losing_branch_and_no_change_values():
    report = thm43_branch_report(SETTINGS[0][0])
    assert report["EI"].loss == pytest.approx(0.5933, abs=5e-4)
    assert report["EI"].b_opti == pytest.approx(5.5573, abs=5e-4)
    assert no_change_loss(SETTINGS[0][0]) == pytest.approx(0.5309, abs=5e-4)

    report = thm43_branch_report(SETTINGS[1][0])
    assert report["SD"].loss == pytest.approx(0.6325, abs=5e-4)
    assert no_change_loss(SETTINGS[1][0]) == pytest.approx(0.7924, abs=5e-4)


def test_mirrored_settings_are_exact_reflections():
    rep1, rep3 = thm43_optimum(SETTINGS[0][0]), thm43_optimum(SETTINGS[2][0])
    assert rep1.l_min == pytest.approx(rep3.l_min, abs=1e-9)
    assert rep1.weights[0] == pytest.approx(-rep3.weights[0], abs=1e-6)
    rep2, rep4 = thm43_optimum(SETTINGS[1][0]), thm43_optimum(SETTINGS[3][0])
    assert rep2.b_opti == pytest.approx(rep4.b_opti, abs=1e-6)


def test_optimum_reproduces_at_reported_weights():
    for sc, *_ in SETTINGS:
        rep = thm43_optimum(sc)
        assert penalized_loss(sc, *rep.weights) == pytest.approx(rep.l_min,
                                                                 abs=1e-6)


def test_no_change_fallback_when_correction_cannot_pay():
    # tiny delta at strong L1 pressure: doing nothing wins
    sc = TheoremScenario(0.05, 1.0, 0.0, 0.5)
    rep = thm43_optimum(sc)
    assert rep.weights == (0.0, 0.0, 0.0)
    assert rep.l_min == pytest.approx(no_change_loss(sc), rel=1e-12)


def test_golden_section_quadratic():
    x, fx = golden_section(lambda t: (t - 1.3) ** 2 + 0.25, -4.0, 6.0)
    assert x == pytest.approx(1.3, abs=1e-6)
    assert fx == pytest.approx(0.25, abs=1e-10)


def test_aligned_grid_spec_places_closed_form_on_lattice():
    for delta in (0.5, 1.2528, 5.0, 7.3):
        bounds, points = aligned_grid_spec(delta)
        step = grid_step(bounds, points)
        root = math.sqrt(delta)
        assert bounds >= 2.0 * root + 1.0
        assert (root / step) == pytest.approx(round(root / step), abs=1e-9)
        assert step <= 0.05


def test_grid_oracle_recovers_closed_form_on_aligned_mesh():
    for delta in (1.2528, -5.0):
        sc = TheoremScenario(delta, a=0.999)
        rep = grid_oracle(sc, *aligned_grid_spec(delta))
        closed = thm41_optimum(delta)
        assert rep.b_opti == pytest.approx(closed.l_min, abs=1e-9)
        for got, want in zip(rep.weights, closed.weights):
            assert got == pytest.approx(want, abs=1e-9)


def test_grid_oracle_consistency_property():
    # the grid lands within one resolution step of the numerical optimum
    # on either side, across the documented scenario range
    rng = np.random.default_rng(17)
    for _ in range(20):
        delta = float(rng.uniform(0.5, 10.0) * rng.choice([-1.0, 1.0]))
        a = float(rng.choice([0.9, 0.99, 0.999]))
        x0 = float(rng.uniform(-3.0, 3.0))
        sc = TheoremScenario(delta, 1.0, x0, a)
        opt = thm43_optimum(sc).l_min
        bounds, points = aligned_grid_spec(delta)
        got = grid_oracle(sc, bounds, points).l_min
        step = grid_step(bounds, points)
        assert got >= opt - step, (delta, a, x0)
        assert got <= opt + step, (delta, a, x0)
