"""Command-line entry points: explain, batch, ablate, evaluate.

Configuration comes from a JSON file (``--config``, or the VALE_CONFIG
environment variable as a fallback) with CLI flags layered on top.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .bleu import (evaluate_prompts, format_prompt_table, load_hypotheses,
                   load_references)
from .errors import ValeError
from .pipeline import PipelineConfig, ablate, batch, explain


def _load_config(args) -> PipelineConfig:
    path = getattr(args, "config", None) or os.environ.get("VALE_CONFIG")
    config = PipelineConfig.from_file(path) if path else PipelineConfig.from_dict()
    overrides = {}
    if getattr(args, "prompt_id", None):
        overrides["promptId"] = args.prompt_id
    if getattr(args, "roi_k", None):
        overrides["roiK"] = args.roi_k
    if overrides:
        config = PipelineConfig.from_dict({**config.raw, **overrides})
    return config


def _cmd_explain(args) -> int:
    config = _load_config(args)
    record = explain(config, args.image, args.out, seed=args.seed,
                     bleu_refs_path=args.bleu_refs,
                     bleu_reference_id=args.bleu_reference_id)
    print(json.dumps(record.to_json_dict(), sort_keys=True, indent=2))
    if record.error:
        print(f"explain failed at stage {record.error['stage']}: "
              f"{record.error['message']}", file=sys.stderr)
        return 1
    return 0


def _cmd_batch(args) -> int:
    config = _load_config(args)
    summary = batch(config, args.manifest, args.out, jobs=args.jobs)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0 if summary["failureCount"] == 0 else 1


def _cmd_ablate(args) -> int:
    config = _load_config(args)
    counts = [int(v) for v in args.max_evals.split(",") if v.strip()]
    table = ablate(config, args.image, counts, args.out, seed=args.seed)
    print(json.dumps(table, sort_keys=True, indent=2))
    return 0


def _cmd_evaluate(args) -> int:
    references = load_references(args.refs)
    hypotheses = load_hypotheses(args.hyps)
    records = [(h["promptId"], h["text"], h["referenceId"]) for h in hypotheses]
    rows, errors = evaluate_prompts(records, references)
    report = {"rows": rows, "errors": errors}
    if args.out:
        Path(args.out).write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n",
            encoding="utf-8")
    print(format_prompt_table(rows, errors))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vale",
        description="Visual and language explanations for image classifiers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_explain = sub.add_parser("explain", help="explain one image end to end")
    p_explain.add_argument("--image", required=True)
    p_explain.add_argument("--config")
    p_explain.add_argument("--prompt-id")
    p_explain.add_argument("--roi-k", type=int)
    p_explain.add_argument("--seed", type=int)
    p_explain.add_argument("--out", required=True)
    p_explain.add_argument("--bleu-refs")
    p_explain.add_argument("--bleu-reference-id")
    p_explain.set_defaults(func=_cmd_explain)

    p_batch = sub.add_parser("batch", help="explain every image in a manifest")
    p_batch.add_argument("--manifest", required=True)
    p_batch.add_argument("--config")
    p_batch.add_argument("--prompt-id")
    p_batch.add_argument("--roi-k", type=int)
    p_batch.add_argument("--jobs", type=int, default=1)
    p_batch.add_argument("--out", required=True)
    p_batch.set_defaults(func=_cmd_batch)

    p_ablate = sub.add_parser("ablate", help="sweep the evaluation budget")
    p_ablate.add_argument("--image", required=True)
    p_ablate.add_argument("--config")
    p_ablate.add_argument("--max-evals", required=True,
                          help="comma-separated budgets, e.g. 100,200,300,500,1000")
    p_ablate.add_argument("--seed", type=int)
    p_ablate.add_argument("--out", required=True)
    p_ablate.set_defaults(func=_cmd_ablate)

    p_eval = sub.add_parser("evaluate", help="score hypotheses against references")
    p_eval.add_argument("--refs", required=True)
    p_eval.add_argument("--hyps", required=True)
    p_eval.add_argument("--out")
    p_eval.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
