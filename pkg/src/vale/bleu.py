"""Sentence-level BLEU with modified n-gram precision and brevity penalty.

BLEU-4, uniform weights, no smoothing: a zero precision at any order zeroes
the score, which is why unrelated captions legitimately score 0.0000.
Orders longer than the candidate contribute vacuously perfect precision so
that a candidate identical to a reference always scores exactly 1.0.
Tokenization is fixed here because captions arrive as raw text: lowercase,
punctuation split into separate tokens, whitespace-delimited (underscores
count as word characters, so class labels like ``bald_eagle`` stay whole).
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass

from .errors import InputError

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


@dataclass(frozen=True)
class TokenizedText:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if any(not t for t in self.tokens):
            raise InputError("tokens must be non-empty strings")
        object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize(text: str) -> TokenizedText:
    return TokenizedText(tuple(_TOKEN_RE.findall(text.lower())))


@dataclass(frozen=True)
class BleuReport:
    score: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    candidate_length: int
    reference_length: int
    empty_candidate: bool = False

    def to_json_dict(self) -> dict:
        return {
            "score": self.score,
            "precisions": list(self.precisions),
            "brevityPenalty": self.brevity_penalty,
            "candidateLength": self.candidate_length,
            "referenceLength": self.reference_length,
            "emptyCandidate": self.empty_candidate,
        }


def _ngram_counts(tokens: tuple[str, ...], n: int) -> Counter:
    return Counter(tokens[i:i + n] for i in range(len(tokens) - n + 1))


def closest_reference_length(candidate_length: int, reference_lengths) -> int:
    return min(reference_lengths,
               key=lambda rl: (abs(rl - candidate_length), rl))


def bleu(candidate: TokenizedText, references: list[TokenizedText],
         max_order: int = 4) -> BleuReport:
    """Modified n-gram precision with per-reference clipping.

    The brevity penalty is exp(1 - r/c) for c < r, with r the reference
    length closest to the candidate's. An empty candidate scores 0 and is
    flagged, with the penalty reported as 0 by convention.
    """
    if not references:
        raise InputError("need at least one reference")
    if max_order < 1:
        raise InputError("maxOrder must be >= 1")
    c = len(candidate)
    r = closest_reference_length(c, [len(ref) for ref in references])
    if c == 0:
        return BleuReport(0.0, (0.0,) * max_order, 0.0, 0, r,
                          empty_candidate=True)

    precisions = []
    for n in range(1, max_order + 1):
        counts = _ngram_counts(candidate.tokens, n)
        total = sum(counts.values())
        if total == 0:
            precisions.append(1.0)  # no n-grams of this order to get wrong
            continue
        clipped = 0
        for ngram, count in counts.items():
            best = max(_ngram_counts(ref.tokens, n)[ngram] for ref in references)
            clipped += min(count, best)
        precisions.append(clipped / total)

    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    if any(p == 0.0 for p in precisions):
        score = 0.0
    else:
        score = brevity * math.exp(sum(math.log(p) for p in precisions) / max_order)
    return BleuReport(score, tuple(precisions), brevity, c, r)


def load_references(path) -> dict[str, dict]:
    """Read a references file: JSON list of {"id", "class", "text"}."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            entries = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read references file {path}: {exc}") from exc
    if not isinstance(entries, list):
        raise InputError("references file must contain a JSON list")
    store = {}
    for entry in entries:
        if not isinstance(entry, dict) or "id" not in entry or "text" not in entry:
            raise InputError("each reference needs 'id' and 'text'")
        if entry["id"] in store:
            raise InputError(f"duplicate reference id {entry['id']!r}")
        store[str(entry["id"])] = entry
    return store


def load_hypotheses(path) -> list[dict]:
    """Read a hypotheses file: JSON list of {"promptId", "referenceId", "text"}."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            entries = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read hypotheses file {path}: {exc}") from exc
    if not isinstance(entries, list):
        raise InputError("hypotheses file must contain a JSON list")
    for entry in entries:
        if not isinstance(entry, dict) or not {"promptId", "referenceId", "text"} <= set(entry):
            raise InputError("each hypothesis needs 'promptId', 'referenceId', 'text'")
    return entries


def evaluate_prompts(records: list[tuple[str, str, str]],
                     references: dict[str, dict],
                     max_order: int = 4) -> tuple[list[dict], list[dict]]:
    """Sentence-level BLEU per (promptId, candidate, referenceId) record.

    Returns rows sorted by promptId, each with the per-record reports and
    their mean score, plus a list of per-record errors for unresolvable
    references (which do not block the rest).
    """
    by_prompt: dict[str, list[dict]] = {}
    errors = []
    for prompt_id, candidate_text, reference_id in records:
        if reference_id not in references:
            errors.append({"promptId": prompt_id, "referenceId": reference_id,
                           "error": "unknown reference id"})
            continue
        report = bleu(tokenize(candidate_text),
                      [tokenize(references[reference_id]["text"])],
                      max_order=max_order)
        by_prompt.setdefault(prompt_id, []).append(
            {"referenceId": reference_id, **report.to_json_dict()})
    rows = []
    for prompt_id in sorted(by_prompt):
        reports = by_prompt[prompt_id]
        mean = sum(rep["score"] for rep in reports) / len(reports)
        rows.append({"promptId": prompt_id, "meanScore": mean,
                     "count": len(reports), "records": reports})
    return rows, errors


def format_prompt_table(rows: list[dict], errors: list[dict]) -> str:
    """Aligned plain-text summary of evaluate_prompts output."""
    header = f"{'prompt':<24} {'mean BLEU':>10} {'records':>8}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(f"{row['promptId']:<24} {row['meanScore']:>10.4f} "
                     f"{row['count']:>8d}")
    if errors:
        lines.append(f"errors: {len(errors)}")
        for err in errors:
            lines.append(f"  {err['promptId']}: reference "
                         f"{err['referenceId']!r} {err['error']}")
    return "\n".join(lines)
