import numpy as np
import pytest

from oracles import shapley_by_permutation_enumeration
from vale.errors import CapacityError, ConfigError, InputError
from vale.gateway import ToyLinearPredictor, predict
from vale.image import Image
from vale.partition import (Coalition, CoalitionMasker, MaskingPolicy,
                            partition_grid)
from vale.shapley import (AttributionMap, EstimatorConfig, exact_game_values,
                          extract_roi, game_from_predictor,
                          game_from_set_function, render_heatmap,
                          sampled_game_values, shapley_exact, shapley_sampled)


def random_game(rng, m):
    table = {mask: rng.random() for mask in range(2 ** m)}
    return lambda s: table[sum(1 << i for i in s)]


def exact_phi(fn, m):
    return exact_game_values(game_from_set_function(fn, m), m)[0]


def gradient_image(h=8, w=8):
    rows, cols = np.indices((h, w), dtype=np.float64)
    return Image(((rows + cols) / (h + w - 2))[:, :, np.newaxis])


def test_single_feature_game():
    fn = lambda s: 3.0 if 0 in s else 1.0
    phi, base, full = exact_game_values(game_from_set_function(fn, 1), 1)
    assert phi == pytest.approx([2.0])
    assert (base, full) == (1.0, 3.0)


def test_two_feature_hand_game():
    game = {frozenset(): 0.0, frozenset({0}): 1.0, frozenset({1}): 2.0,
            frozenset({0, 1}): 4.0}
    phi = exact_phi(lambda s: game[s], 2)
    assert phi == pytest.approx([1.5, 2.5], abs=1e-12)


def test_exact_matches_permutation_oracle_on_random_games():
    rng = np.random.default_rng(3)
    for _ in range(10):
        m = int(rng.integers(1, 7))
        fn = random_game(rng, m)
        got = exact_phi(fn, m)
        want = shapley_by_permutation_enumeration(fn, m)
        assert np.max(np.abs(got - want)) <= 1e-9


def test_exact_capacity_limit():
    with pytest.raises(CapacityError):
        exact_game_values(game_from_set_function(lambda s: 0.0, 21), 21)


def test_efficiency_symmetry_dummy_axioms():
    rng = np.random.default_rng(5)
    m = 5
    rest = {mask: rng.random() for mask in range(2 ** m)}

    def symmetric_game(s):
        # depends on features 0 and 1 only through how many are present
        count = (0 in s) + (1 in s)
        others = sum(1 << i for i in s if i >= 2)
        return 0.7 * count + rest[others]

    phi = exact_phi(symmetric_game, m)
    assert abs(phi[0] - phi[1]) <= 1e-9

    def game_with_dummy(s):
        return rest[sum(1 << i for i in s if i != 3)]

    phi = exact_phi(game_with_dummy, m)
    assert abs(phi[3]) <= 1e-9

    fn = random_game(rng, m)
    phi = exact_phi(fn, m)
    assert abs(phi.sum() - (fn(frozenset(range(m))) - fn(frozenset()))) <= 1e-9


def test_linearity_axiom():
    rng = np.random.default_rng(6)
    m = 4
    v1, v2 = random_game(rng, m), random_game(rng, m)
    a, b = 2.5, -0.75
    combined = lambda s: a * v1(s) + b * v2(s)
    phi = exact_phi(combined, m)
    assert phi == pytest.approx(a * exact_phi(v1, m) + b * exact_phi(v2, m),
                                abs=1e-9)


def test_linear_image_game_has_closed_form():
    # value = sum_i w_i * mean_i(masked image) with a fixed-color baseline:
    # a linear game, so phi_i = w_i * (mean_i(x) - fill) exactly.
    image = gradient_image(6, 6)
    part = partition_grid(image, 2, 2)
    fill = 0.25
    policy = MaskingPolicy(mode="fixed-color", fill_value=fill)
    weights = np.array([1.0, -2.0, 0.5, 3.0])
    masker = CoalitionMasker(image, part, policy)

    def region_means(img):
        return np.array([img.data[:, :, 0][part.labels == r].mean()
                         for r in range(4)])

    fn = lambda s: float(weights @ region_means(masker.mask(Coalition(s))))
    phi = exact_phi(fn, 4)
    expected = weights * (region_means(image) - fill)
    assert phi == pytest.approx(expected, abs=1e-9)
    oracle = shapley_by_permutation_enumeration(fn, 4)
    assert phi == pytest.approx(oracle, abs=1e-9)


def test_shapley_exact_through_predictor():
    image = gradient_image(6, 6)
    part = partition_grid(image, 2, 2)
    policy = MaskingPolicy(mode="mean-fill")
    model = ToyLinearPredictor(weights=[[4.0, -4.0, 2.0, 1.0], [0.0] * 4],
                               grid=(2, 2), labels=("pos", "neg"))
    predict_fn = lambda images: predict(model, images)
    att = shapley_exact(predict_fn, image, part, policy, "pos")
    fn = game_from_predictor(predict_fn, image, part, policy, "pos")
    game = lambda s: fn([sum(1 << i for i in s)])[0]
    oracle = shapley_by_permutation_enumeration(game, 4)
    assert att.region_values == pytest.approx(oracle, abs=1e-9)
    assert att.base_value == pytest.approx(game(frozenset()))
    # efficiency against the game end points
    assert att.region_values.sum() == pytest.approx(
        game(frozenset(range(4))) - game(frozenset()), abs=1e-9)


def test_pixel_values_broadcast():
    image = gradient_image(4, 4)
    part = partition_grid(image, 2, 2)
    att = AttributionMap(np.array([1.0, 2.0, 3.0, 4.0]), "x", 0.0, part)
    for region in range(4):
        assert np.all(att.pixel_values[part.labels == region]
                      == att.region_values[region])


def test_sampled_close_to_exact_with_generous_budget():
    rng = np.random.default_rng(7)
    fn = random_game(rng, 4)
    eval_many = game_from_set_function(fn, 4)
    exact = exact_game_values(eval_many, 4)[0]
    cfg = EstimatorConfig(max_evaluations=2 ** 12, batch_size=64, seed=123)
    approx = sampled_game_values(eval_many, 4, cfg)[0]
    assert np.max(np.abs(approx - exact)) <= 0.02


def test_sampled_is_seed_deterministic():
    rng = np.random.default_rng(8)
    fn = random_game(rng, 6)
    eval_many = game_from_set_function(fn, 6)
    cfg = EstimatorConfig(max_evaluations=200, seed=42)
    a = sampled_game_values(eval_many, 6, cfg)[0]
    b = sampled_game_values(eval_many, 6, cfg)[0]
    assert np.array_equal(a, b)
    c = sampled_game_values(eval_many, 6,
                            EstimatorConfig(max_evaluations=200, seed=43))[0]
    assert not np.array_equal(a, c)


def test_sampled_efficiency_is_enforced():
    rng = np.random.default_rng(9)
    fn = random_game(rng, 6)
    eval_many = game_from_set_function(fn, 6)
    cfg = EstimatorConfig(max_evaluations=64, seed=1)
    phi, base, full = sampled_game_values(eval_many, 6, cfg)
    assert phi.sum() == pytest.approx(full - base, abs=1e-12)


def test_sampled_budget_validation_and_consumption():
    fn = lambda s: len(s) / 6.0
    calls = []

    def counting(masks):
        calls.extend(masks)
        return [fn(frozenset(i for i in range(6) if mk >> i & 1))
                for mk in masks]

    with pytest.raises(ConfigError):
        sampled_game_values(counting, 6, EstimatorConfig(max_evaluations=7))
    calls.clear()
    sampled_game_values(counting, 6,
                        EstimatorConfig(max_evaluations=100, seed=0))
    assert len(calls) <= 100


def test_sampled_error_trend_is_non_increasing_over_budgets():
    rng = np.random.default_rng(10)
    m = 8
    fn = random_game(rng, m)
    eval_many = game_from_set_function(fn, m)
    exact = exact_game_values(eval_many, m)[0]
    budgets = [100, 200, 300, 500, 1000]
    mae = []
    for budget in budgets:
        errors = []
        for seed in range(20):
            cfg = EstimatorConfig(max_evaluations=budget, seed=seed)
            phi = sampled_game_values(eval_many, m, cfg)[0]
            errors.append(np.abs(phi - exact).mean())
        mae.append(np.mean(errors))
    assert all(mae[i + 1] <= mae[i] + 1e-12 for i in range(len(mae) - 1)), mae


def test_sampled_consistency_error_vanishes():
    rng = np.random.default_rng(12)
    fn = random_game(rng, 5)
    eval_many = game_from_set_function(fn, 5)
    exact = exact_game_values(eval_many, 5)[0]
    small = np.mean([np.abs(sampled_game_values(
        eval_many, 5, EstimatorConfig(max_evaluations=40, seed=s))[0]
        - exact).mean() for s in range(10)])
    large = np.mean([np.abs(sampled_game_values(
        eval_many, 5, EstimatorConfig(max_evaluations=4000, seed=s))[0]
        - exact).mean() for s in range(10)])
    assert large < small
    assert large < 0.02


def test_extract_roi_examples():
    image = gradient_image(4, 4)
    part = partition_grid(image, 2, 2)

    att = AttributionMap(np.array([0.1, 0.9, 0.3, 0.0]), "x", 0.0, part)
    roi = extract_roi(att, 1)
    assert roi.points == ((0.5, 2.5),)  # centroid of region 1
    assert not roi.truncated

    flat = AttributionMap(np.zeros(4), "x", 0.0, part)
    assert extract_roi(flat, 1).points == ((0.5, 0.5),)  # tie -> region 0

    att4 = AttributionMap(np.array([5.0, 1.0, 4.0, 2.0]), "x", 0.0, part)
    roi2 = extract_roi(att4, 2)
    assert roi2.points == ((0.5, 0.5), (2.5, 0.5))  # regions 0 then 2

    truncated = extract_roi(att4, 9)
    assert truncated.truncated and len(truncated.points) == 4
    with pytest.raises(InputError):
        extract_roi(att4, 0)


def test_extract_roi_invariant_under_monotone_transforms():
    image = gradient_image(6, 6)
    part = partition_grid(image, 2, 3)
    rng = np.random.default_rng(13)
    values = rng.normal(size=6)
    base = extract_roi(AttributionMap(values, "x", 0.0, part), 3)
    for transform in (lambda v: 2 * v + 5, np.exp, lambda v: v ** 3,
                      np.arctan):
        moved = extract_roi(AttributionMap(transform(values), "x", 0.0, part), 3)
        assert moved.points == base.points


def test_heatmap_all_zero_is_grayscale():
    image = gradient_image(4, 4)
    part = partition_grid(image, 2, 2)
    att = AttributionMap(np.zeros(4), "x", 0.0, part)
    out = render_heatmap(att, image)
    gray = image.grayscale()
    assert np.array_equal(out.data, np.repeat(gray[:, :, None], 3, axis=2))


def test_heatmap_single_positive_region_tints_red_only():
    image = gradient_image(4, 4)
    part = partition_grid(image, 2, 2)
    att = AttributionMap(np.array([0.0, 0.8, 0.0, 0.0]), "x", 0.0, part)
    out = render_heatmap(att, image)
    gray = np.repeat(image.grayscale()[:, :, None], 3, axis=2)
    hot = part.labels == 1
    assert np.array_equal(out.data[~hot], gray[~hot])
    assert np.all(out.data[hot][:, 0] >= gray[hot][:, 0])
    assert np.all(out.data[hot][:, 1] < gray[hot][:, 1])


def test_heatmap_normalization_invariance_is_pixel_exact():
    image = gradient_image(4, 4)
    part = partition_grid(image, 2, 2)
    values = np.array([0.1, 0.9, 0.3, -0.4])
    one = render_heatmap(AttributionMap(values, "x", 0.0, part), image)
    three = render_heatmap(AttributionMap(3.0 * values, "x", 0.0, part), image)
    assert np.array_equal(one.to_uint8(), three.to_uint8())


def test_shapley_sampled_through_predictor_is_deterministic():
    image = gradient_image(6, 6)
    part = partition_grid(image, 2, 3)
    policy = MaskingPolicy(mode="mean-fill")
    model = ToyLinearPredictor(weights=[[1.0, -1.0, 2.0, 0.0, 0.5, -0.5],
                                        [0.0] * 6], grid=(2, 3))
    predict_fn = lambda images: predict(model, images)
    cfg = EstimatorConfig(max_evaluations=64, batch_size=8, seed=21)
    a = shapley_sampled(predict_fn, image, part, policy, "class_0", cfg)
    b = shapley_sampled(predict_fn, image, part, policy, "class_0", cfg)
    assert np.array_equal(a.region_values, b.region_values)
    assert a.target_label == "class_0"
    assert a.to_json_dict().keys() == {"regionValues", "baseValue", "targetLabel"}
