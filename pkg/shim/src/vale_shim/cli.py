"""vale-shim command line: serve, make-fixtures, conformance."""

from __future__ import annotations

import argparse
import json
import sys

from .config import ShimConfig, ShimConfigError
from .fixtures import (DEFAULT_CONFIDENCES, DEFAULT_LABELS, FixtureError,
                       build_fixture_set, write_fixture_dir)


def _cmd_serve(args) -> int:
    if args.config:
        config = ShimConfig.from_file(args.config)
    else:
        config = ShimConfig(mode=args.mode, fixture_dir=args.fixtures,
                            classifier_model=args.classifier,
                            segmenter_model=args.segmenter,
                            captioner_model=args.captioner,
                            device=args.device)
    from .app import create_app

    app = create_app(config)
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_make_fixtures(args) -> int:
    confidences = tuple(float(v) for v in args.confidences.split(","))
    entries = build_fixture_set(
        args.image, label=args.label,
        labels=tuple([args.label] + [l for l in DEFAULT_LABELS
                                     if l != args.label][:2]),
        probability=args.probability, confidences=confidences)
    path = write_fixture_dir(entries, args.out)
    print(f"wrote {len(entries)} fixtures to {path}")
    return 0


def _cmd_conformance(args) -> int:
    from .conformance import run_conformance

    report = run_conformance(args.base, args.image)
    print(report.format_text())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vale-shim")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--config")
    p_serve.add_argument("--mode", default="mock", choices=["mock", "real"])
    p_serve.add_argument("--fixtures")
    p_serve.add_argument("--classifier")
    p_serve.add_argument("--segmenter")
    p_serve.add_argument("--captioner")
    p_serve.add_argument("--device", default="cpu")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8731)
    p_serve.set_defaults(func=_cmd_serve)

    p_fix = sub.add_parser("make-fixtures",
                           help="build a mock fixture set for one image")
    p_fix.add_argument("--image", required=True)
    p_fix.add_argument("--out", required=True)
    p_fix.add_argument("--label", default=DEFAULT_LABELS[0])
    p_fix.add_argument("--probability", type=float, default=1.0)
    p_fix.add_argument("--confidences",
                       default=",".join(str(c) for c in DEFAULT_CONFIDENCES))
    p_fix.set_defaults(func=_cmd_make_fixtures)

    p_conf = sub.add_parser("conformance",
                            help="check a running shim against the wire contracts")
    p_conf.add_argument("--base", required=True)
    p_conf.add_argument("--image", required=True)
    p_conf.add_argument("--out")
    p_conf.set_defaults(func=_cmd_conformance)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ShimConfigError, FixtureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
