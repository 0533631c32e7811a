import random

import pytest

from nteg.equilibrium import best_response, classify
from nteg.model import GameSpec
from nteg.oracle import GridConfig, best_deviation_gain, grid_best_response, verify_equilibrium

SPEC_369 = GameSpec.from_betas([3, 6, 9])


def test_grid_config_validation():
    with pytest.raises(ValueError):
        GridConfig(upper=1.0, step=0)
    with pytest.raises(ValueError):
        GridConfig(upper=1.0, step=2.0)
    with pytest.raises(ValueError):
        GridConfig(upper=1e4, step=1e-3)
    grid = GridConfig.for_spec(SPEC_369)
    assert grid.upper == 18
    pts = grid.points()
    assert pts[0] == 0 and pts[-1] == pytest.approx(18)


def test_grid_best_response_examples():
    spec = GameSpec.from_betas([5, 6, 7, 8])
    assert grid_best_response(0, [0, 1, 1, 1], spec) == pytest.approx(1.0, abs=1e-12)
    spec = GameSpec.from_betas([2, 6, 7, 8])
    assert grid_best_response(0, [0, 1, 1, 1], spec) == 0


def test_grid_best_response_reward_game():
    spec = GameSpec.from_values([2, 2], [1, 1], reward=1, distinct_ratios=False)
    assert grid_best_response(0, [0, 1.0], spec) == pytest.approx(1.0, abs=1e-3)


def test_ties_break_low_and_are_deterministic():
    # with nobody else contributing every effort gives reliability 0, so effort 0 wins
    spec = GameSpec.from_betas([2, 3])
    assert grid_best_response(0, [0, 0], spec) == 0
    a = grid_best_response(1, [0.7, 0.3], spec)
    assert a == grid_best_response(1, [0.7, 0.3], spec)


def test_verify_examples():
    assert verify_equilibrium([0, 2, 2], SPEC_369)
    assert not verify_equilibrium([2, 2, 2], SPEC_369)
    assert best_deviation_gain(0, [2, 2, 2], SPEC_369) > 0.1
    assert verify_equilibrium([0, 0, 0], SPEC_369)


def test_verify_agrees_with_classify_away_from_edges():
    rng = random.Random(11)
    checked = 0
    for _ in range(150):
        n = rng.randint(2, 4)
        betas = [rng.uniform(1, 10) for _ in range(n)]
        spec = GameSpec.from_betas(betas)
        # half the profiles are best-response fixed points built by iteration
        xs = [rng.uniform(0, 3) for _ in range(n)]
        if rng.random() < 0.5:
            for _ in range(50):
                xs = [best_response(i, xs, spec) for i in range(n)]
        report = classify(xs, spec)
        if report.is_equilibrium and report.margin is not None and abs(report.margin) < 1e-3:
            continue
        assert verify_equilibrium(xs, spec) == report.is_equilibrium
        checked += 1
    assert checked > 100
