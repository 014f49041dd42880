"""Acceptance suite: one test per release criterion, at stated tolerances.

Each test prints a single [PASS]/[FAIL] line for its criterion (run pytest
with -s to see them). Tolerances are pinned here, not configurable.
"""

import itertools
import json
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest

from oracles import bleu_oracle, shapley_by_permutation_enumeration
from vale.bleu import TokenizedText, bleu, tokenize
from vale.captioning import CaptionClient, CaptionRequest
from vale.cli import main
from vale.errors import ProtocolError
from vale.fixtures import save_bald_eagle_png
from vale.gateway import RemotePredictor, ToyPatchPredictor, predict
from vale.image import Image, mask_to_base64_png
from vale.partition import MaskingPolicy, partition_grid
from vale.pipeline import validate_record
from vale.segment import PointPrompt, segment_builtin, segment_remote
from vale.shapley import (AttributionMap, EstimatorConfig, exact_game_values,
                          extract_roi, game_from_predictor,
                          game_from_set_function, sampled_game_values)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


def test_shapley_exactness_against_oracle():
    with criterion("shapley-exactness (50 random games, M<=8, <=1e-9, <10s)"):
        started = time.perf_counter()
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(50):
            m = int(rng.integers(1, 9))
            table = {mask: float(rng.random()) for mask in range(2 ** m)}
            fn = lambda s, t=table: t[sum(1 << i for i in s)]
            phi = exact_game_values(game_from_set_function(fn, m), m)[0]
            want = shapley_by_permutation_enumeration(fn, m)
            worst = max(worst, float(np.max(np.abs(phi - want))))
        elapsed = time.perf_counter() - started
        assert worst <= 1e-9, worst
        assert elapsed < 10.0, elapsed


def test_shapley_axioms():
    with criterion("shapley-axioms (efficiency, symmetry, dummy, linearity)"):
        rng = np.random.default_rng(7)
        m = 6
        base = {mask: float(rng.random()) for mask in range(2 ** m)}

        def game(s):
            return base[sum(1 << i for i in s)]

        # efficiency
        phi = exact_game_values(game_from_set_function(game, m), m)[0]
        assert abs(phi.sum() - (game(frozenset(range(m)))
                                - game(frozenset()))) <= 1e-9

        # symmetry: features 0 and 1 enter only through their count
        rest = {mask: float(rng.random()) for mask in range(2 ** (m - 2))}

        def symmetric(s):
            count = (0 in s) + (1 in s)
            others = sum(1 << (i - 2) for i in s if i >= 2)
            return 1.3 * count + 0.2 * count * count + rest[others]

        phi = exact_game_values(game_from_set_function(symmetric, m), m)[0]
        assert abs(phi[0] - phi[1]) <= 1e-9

        # dummy: feature 4 never changes the value
        def with_dummy(s):
            return base[sum(1 << i for i in s if i != 4)]

        phi = exact_game_values(game_from_set_function(with_dummy, m), m)[0]
        assert abs(phi[4]) <= 1e-9

        # linearity over two independent games
        other = {mask: float(rng.random()) for mask in range(2 ** m)}
        v1 = lambda s: base[sum(1 << i for i in s)]
        v2 = lambda s: other[sum(1 << i for i in s)]
        combo = lambda s: 2.0 * v1(s) - 0.5 * v2(s)
        phi_combo = exact_game_values(game_from_set_function(combo, m), m)[0]
        phi_1 = exact_game_values(game_from_set_function(v1, m), m)[0]
        phi_2 = exact_game_values(game_from_set_function(v2, m), m)[0]
        assert np.max(np.abs(phi_combo - (2.0 * phi_1 - 0.5 * phi_2))) <= 1e-9


def _patch_detector_game():
    """M = 12 attribution game over a patch-detector classifier."""
    rows, cols = np.indices((24, 36), dtype=np.float64)
    arr = 0.1 + 0.15 * cols / 35.0
    arr[9:15, 20:28] = 0.9  # bright patch inside grid region (1, 2)
    image = Image(arr[:, :, np.newaxis])
    part = partition_grid(image, 3, 4)
    policy = MaskingPolicy(mode="mean-fill")
    model = ToyPatchPredictor(window=(9, 20, 15, 28), gain=6.0, offset=0.4)
    predict_fn = lambda images: predict(model, images)
    raw = game_from_predictor(predict_fn, image, part, policy, "patch")

    memo = {}

    def eval_many(masks):
        missing = [mk for mk in masks if mk not in memo]
        if missing:
            for mk, value in zip(missing, raw(missing)):
                memo[mk] = value
        return [memo[mk] for mk in masks]

    return eval_many, part


def test_sampling_convergence_and_roi_stability():
    with criterion("sampling-convergence (M=12, budgets 100..1000, 20 seeds, "
                   "ROI stable >=18/20, <2min)"):
        started = time.perf_counter()
        eval_many, part = _patch_detector_game()
        m = part.region_count
        assert m == 12
        exact = exact_game_values(eval_many, m)[0]
        exact_roi = extract_roi(
            AttributionMap(exact, "patch", 0.0, part), 1).points

        budgets = [100, 200, 300, 500, 1000]
        mae = []
        roi_matches = 0
        for budget in budgets:
            errors = []
            for seed in range(20):
                cfg = EstimatorConfig(max_evaluations=budget, seed=seed)
                phi = sampled_game_values(eval_many, m, cfg)[0]
                errors.append(float(np.abs(phi - exact).mean()))
                if budget == 1000:
                    roi = extract_roi(
                        AttributionMap(phi, "patch", 0.0, part), 1).points
                    roi_matches += roi == exact_roi
            mae.append(float(np.mean(errors)))
        elapsed = time.perf_counter() - started

        assert all(mae[i + 1] <= mae[i] + 1e-12
                   for i in range(len(mae) - 1)), mae
        assert roi_matches >= 18, roi_matches
        assert elapsed < 120.0, elapsed


def test_roi_extraction_exhaustive():
    with criterion("roi-extraction (argsort + monotone-transform invariance, "
                   "all permutations of <=6 values)"):
        transforms = (lambda v: 3.0 * v + 1.0, np.exp, lambda v: v ** 3)
        for n in range(2, 7):
            image = Image(np.zeros((2, n, 1)))
            part = partition_grid(image, 1, n)
            for perm in itertools.permutations(range(1, n + 1)):
                values = np.array(perm, dtype=np.float64) - 2.5  # mix signs
                att = AttributionMap(values, "x", 0.0, part)
                roi = extract_roi(att, n)
                # centroid col identifies the region: grid cells are 1 wide
                got = [int(p[1]) for p in roi.points]
                want = sorted(range(n), key=lambda i: (-values[i], i))
                assert got == want
                for transform in transforms:
                    moved = extract_roi(
                        AttributionMap(transform(values), "x", 0.0, part), n)
                    assert moved.points == roi.points
        # tie-breaking: duplicates resolve toward the lower region id
        image = Image(np.zeros((2, 3, 1)))
        part = partition_grid(image, 1, 3)
        att = AttributionMap(np.array([2.0, 1.0, 2.0]), "x", 0.0, part)
        assert [int(p[1]) for p in extract_roi(att, 3).points] == [0, 2, 1]


def _synthetic_object(rng, index):
    h = w = 48
    fg = float(rng.uniform(0.75, 0.95))
    bg = float(rng.uniform(0.05, 0.25))
    noise = rng.uniform(-0.03, 0.03, size=(h, w))
    arr = np.full((h, w), bg) + noise
    truth = np.zeros((h, w), dtype=bool)
    rows_i, cols_i = np.indices((h, w))
    if index % 2 == 0:  # block
        r0, c0 = int(rng.integers(6, 20)), int(rng.integers(6, 20))
        dr, dc = int(rng.integers(10, 20)), int(rng.integers(10, 20))
        truth[r0:r0 + dr, c0:c0 + dc] = True
    else:  # blob: two overlapping disks
        cr, cc = int(rng.integers(16, 32)), int(rng.integers(16, 32))
        rad = int(rng.integers(6, 10))
        truth |= (rows_i - cr) ** 2 + (cols_i - cc) ** 2 <= rad ** 2
        truth |= ((rows_i - cr - rad // 2) ** 2
                  + (cols_i - cc - rad // 2) ** 2) <= (rad - 2) ** 2
    arr[truth] = fg + noise[truth]
    image = Image(np.clip(arr, 0.0, 1.0)[:, :, np.newaxis])
    seed_rows, seed_cols = np.where(truth)
    seed = (int(np.mean(seed_rows)), int(np.mean(seed_cols)))
    if not truth[seed]:
        pick = rng.integers(0, len(seed_rows))
        seed = (int(seed_rows[pick]), int(seed_cols[pick]))
    return image, truth, seed


def test_builtin_segmentation_quality_and_nesting():
    with criterion("builtin-segmentation (20 synthetic objects, best IoU "
                   ">=0.95, nesting everywhere)"):
        rng = np.random.default_rng(77)
        for index in range(20):
            image, truth, seed = _synthetic_object(rng, index)
            candidates = segment_builtin(image, PointPrompt((seed,)),
                                         tolerance=0.15)
            assert len(candidates) == 3
            small, mid, large = (c.mask for c in candidates)
            assert np.all(~small | mid) and np.all(~mid | large)
            best = max(candidates, key=lambda c: (c.confidence, c.area))
            iou = (np.logical_and(best.mask, truth).sum()
                   / np.logical_or(best.mask, truth).sum())
            assert iou >= 0.95, (index, iou)


def test_bleu_criteria():
    with criterion("bleu (identity 1.0, clipped case 0.3894, zero 4-gram 0.0, "
                   "200-pair oracle agreement)"):
        identity = tokenize("a bald eagle, mid flight!")
        assert bleu(identity, [identity]).score == 1.0

        report = bleu(TokenizedText(("the",) * 4),
                      [TokenizedText(("the", "cat", "on", "the", "mat"))],
                      max_order=1)
        assert report.score == pytest.approx(0.3894, abs=1e-4)

        cand = tokenize("purple clouds drift over silent mountains today")
        ref = tokenize("the eagle glides across a bright morning sky")
        assert bleu(cand, [ref], max_order=4).score == 0.0

        rng = random.Random(4242)
        vocab = ["a", "b", "c"]
        for _ in range(200):
            c = [rng.choice(vocab) for _ in range(rng.randint(1, 6))]
            refs = [[rng.choice(vocab) for _ in range(rng.randint(1, 6))]
                    for _ in range(rng.randint(1, 2))]
            got = bleu(TokenizedText(tuple(c)),
                       [TokenizedText(tuple(r)) for r in refs]).score
            assert got == bleu_oracle(c, refs)


def test_end_to_end_determinism(tmp_path, capsys):
    with criterion("end-to-end determinism (mock fixtures, byte-identical "
                   "record + PNGs, fixture values, <30s)"):
        started = time.perf_counter()
        image_path = tmp_path / "bald_eagle.png"
        save_bald_eagle_png(image_path)
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({
            "predictor": {"kind": "remote"},
            "segmenter": {"source": "remote"},
            "services": {"mode": "mock", "fixture": "bald-eagle"},
        }))
        outs = []
        for run in ("a", "b"):
            out = tmp_path / run
            code = main(["explain", "--image", str(image_path),
                         "--config", str(config_path), "--seed", "7",
                         "--out", str(out)])
            assert code == 0
            outs.append(out)
        capsys.readouterr()
        elapsed = time.perf_counter() - started

        record_bytes = (outs[0] / "record.json").read_bytes()
        assert record_bytes == (outs[1] / "record.json").read_bytes()
        for name in ("heatmap.png", "roi.png", "mask.png", "segmented.png"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

        record = json.loads(record_bytes)
        validate_record(record)
        assert record["prompt"]["text"] == \
            "Explain the object in the image: 'bald_eagle'?"
        assert record["mask"]["confidence"] == 0.932
        assert record["prediction"] == {"label": "bald_eagle",
                                        "probability": 1.0}
        assert elapsed < 30.0, elapsed


class _CannedTransport:
    def __init__(self, body):
        self.body = body

    def post_json(self, url, payload):
        return self.body


PREDICT_CORRUPTIONS = [
    {},
    {"labels": ["a"]},
    {"labels": ["a", "b"], "probabilities": [1.0]},
    {"labels": ["a", "a"], "probabilities": [0.5, 0.5]},
    {"labels": ["a", "b"], "probabilities": [0.7, 0.2]},
    {"labels": ["a", "b"], "probabilities": [1.2, -0.2]},
    {"labels": ["a", "b"], "probabilities": ["x", "y"]},
]

SEGMENT_CORRUPTIONS = [
    {},
    {"masks": []},
    {"masks": "wrong"},
    {"masks": [{"confidence": 0.5}]},
    {"masks": [{"png": "@@@", "confidence": 0.5}]},
    {"masks": [{"png": 123, "confidence": 0.5}]},
    None,  # replaced below with a dimension-mismatch mask
]

CAPTION_CORRUPTIONS = [
    {},
    {"text": "", "model": "m"},
    {"text": None, "model": "m"},
    {"text": 7, "model": "m"},
    {"text": "ok"},
    {"text": "ok", "model": ""},
    {"text": "ok", "model": 3},
]


def test_wire_contract_rejections():
    with criterion("wire-contracts (7 corruptions per endpoint rejected "
                   "as protocol errors)"):
        image = Image(np.full((8, 8, 1), 0.5))
        wrong_mask = np.zeros((4, 4), dtype=bool)
        segment_bodies = list(SEGMENT_CORRUPTIONS)
        segment_bodies[-1] = {"masks": [{"png": mask_to_base64_png(wrong_mask),
                                         "confidence": 0.9}]}

        for body in PREDICT_CORRUPTIONS:
            client = RemotePredictor("http://svc", _CannedTransport(body))
            with pytest.raises(ProtocolError):
                predict(client, [image])

        for body in segment_bodies:
            with pytest.raises(ProtocolError):
                segment_remote("http://svc", image, PointPrompt(((2, 2),)),
                               _CannedTransport(body))

        for body in CAPTION_CORRUPTIONS:
            client = CaptionClient("http://svc", _CannedTransport(body))
            with pytest.raises(ProtocolError):
                client.caption(CaptionRequest(image, "Explain?"))
