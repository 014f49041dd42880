import json
import math

import pytest

from oracles import bleu_oracle
from vale.bleu import (bleu, evaluate_prompts, format_prompt_table,
                       load_hypotheses, load_references, tokenize)
from vale.errors import InputError


def toks(*words):
    from vale.bleu import TokenizedText
    return TokenizedText(tuple(words))


def test_tokenize_examples():
    assert tokenize("The cat.").tokens == ("the", "cat", ".")
    assert tokenize("bald_eagle's wings").tokens == ("bald_eagle", "'", "s",
                                                     "wings")
    assert tokenize("").tokens == ()


def test_tokenize_is_deterministic_and_splits_punctuation():
    text = "Hello, world! It's VALE-style; ok?"
    assert tokenize(text).tokens == tokenize(text).tokens
    assert tokenize("a,b").tokens == ("a", ",", "b")


def test_identity_candidate_scores_exactly_one():
    for sentence in (["the", "cat"], ["a"], list("abcdef")):
        report = bleu(toks(*sentence), [toks(*sentence)])
        assert report.score == 1.0
        assert report.brevity_penalty == 1.0


def test_hand_computed_clipped_precision_case():
    candidate = toks("the", "the", "the", "the")
    reference = toks("the", "cat", "on", "the", "mat")
    report = bleu(candidate, [reference], max_order=1)
    assert report.precisions == (0.5,)
    assert report.brevity_penalty == pytest.approx(math.exp(1 - 5 / 4))
    assert report.score == pytest.approx(0.3894, abs=1e-4)
    assert (report.candidate_length, report.reference_length) == (4, 5)


def test_zero_fourgram_overlap_scores_exactly_zero():
    candidate = tokenize("a completely different sentence about trains")
    reference = tokenize("the eagle soars over the quiet canyon at dawn")
    report = bleu(candidate, [reference], max_order=4)
    assert report.score == 0.0


def test_empty_candidate_is_flagged():
    report = bleu(toks(), [toks("a", "b")])
    assert report.score == 0.0
    assert report.empty_candidate
    assert report.brevity_penalty == 0.0


def test_reference_order_permutation_invariance():
    candidate = tokenize("a small bird on a branch")
    refs = [tokenize("a bird sits on a branch"),
            tokenize("the small bird rests"),
            tokenize("a small bird on a twig")]
    forward = bleu(candidate, refs)
    backward = bleu(candidate, list(reversed(refs)))
    assert forward == backward


def test_adding_reference_never_decreases_score():
    # brute force over short sentences from a 3-word vocabulary
    import itertools
    vocab = ("a", "b", "c")
    sentences = [list(p) for n in (1, 2, 3)
                 for p in itertools.product(vocab, repeat=n)]
    rng_pairs = [(c, r1, r2) for c in sentences[:12]
                 for r1 in sentences[:12] for r2 in sentences[:12]]
    for c, r1, r2 in rng_pairs[::7]:
        one = bleu(toks(*c), [toks(*r1)], max_order=2).score
        two = bleu(toks(*c), [toks(*r1), toks(*r2)], max_order=2).score
        assert two >= one - 1e-12


def test_agreement_with_naive_oracle_on_random_pairs():
    import random
    rng = random.Random(99)
    vocab = ["a", "b", "c"]
    for _ in range(200):
        c = [rng.choice(vocab) for _ in range(rng.randint(1, 6))]
        refs = [[rng.choice(vocab) for _ in range(rng.randint(1, 6))]
                for _ in range(rng.randint(1, 2))]
        got = bleu(toks(*c), [toks(*r) for r in refs]).score
        want = bleu_oracle(c, refs)
        assert got == want


def test_score_bounds():
    import random
    rng = random.Random(5)
    vocab = ["x", "y", "z", "w"]
    for _ in range(100):
        c = [rng.choice(vocab) for _ in range(rng.randint(0, 6))]
        r = [rng.choice(vocab) for _ in range(rng.randint(1, 6))]
        report = bleu(toks(*c), [toks(*r)])
        assert 0.0 <= report.score <= 1.0


def test_bleu_input_validation():
    with pytest.raises(InputError):
        bleu(toks("a"), [])
    with pytest.raises(InputError):
        bleu(toks("a"), [toks("a")], max_order=0)


def test_evaluate_prompts_table(tmp_path):
    references = {
        "r1": {"id": "r1", "class": "eagle", "text": "a bald eagle in flight"},
        "r2": {"id": "r2", "class": "ship", "text": "a ship on the seafloor"},
    }
    records = [
        ("default", "a bald eagle in flight", "r1"),
        ("default", "a ship on the seafloor", "r2"),
        ("bare", "something else entirely here", "r1"),
        ("bare", "a bald eagle in flight", "missing"),
    ]
    rows, errors = evaluate_prompts(records, references)
    assert [row["promptId"] for row in rows] == ["bare", "default"]
    default_row = rows[1]
    assert default_row["meanScore"] == pytest.approx(1.0)
    assert default_row["count"] == 2
    assert len(errors) == 1
    assert errors[0]["referenceId"] == "missing"

    table = format_prompt_table(rows, errors)
    assert "default" in table and "errors: 1" in table


def test_same_candidate_same_score_across_prompts():
    references = {"r": {"id": "r", "class": "x", "text": "one two three four"}}
    records = [("p1", "one two three four", "r"),
               ("p2", "one two three four", "r")]
    rows, _ = evaluate_prompts(records, references)
    assert rows[0]["meanScore"] == rows[1]["meanScore"]


def test_reference_and_hypothesis_files(tmp_path):
    refs_path = tmp_path / "refs.json"
    refs_path.write_text(json.dumps([
        {"id": "a", "class": "c", "text": "héllo wörld"},
    ]))
    store = load_references(refs_path)
    assert store["a"]["text"] == "héllo wörld"

    hyps_path = tmp_path / "hyps.json"
    hyps_path.write_text(json.dumps([
        {"promptId": "p", "referenceId": "a", "text": "hello"},
    ]))
    assert load_hypotheses(hyps_path)[0]["promptId"] == "p"

    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    with pytest.raises(InputError):
        load_references(bad)
    with pytest.raises(InputError):
        load_hypotheses(bad)
