"""``oddm <experiment>... --config FILE --seed N --out DIR``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .channel import read_channel_csv
from .harness import KINDS, ExperimentSpec, full_scale, run_all, with_seed
from .params import read_config


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oddm", description="ODDM simulation experiments")
    ap.add_argument("experiments", nargs="+", choices=KINDS, metavar="{" + ",".join(KINDS) + "}")
    ap.add_argument("--config", required=True, type=Path, help="key=value configuration file")
    ap.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    ap.add_argument("--out", required=True, type=Path, help="output directory")
    ap.add_argument("--channel-file", type=Path, default=None, help="CSV of l,k,re,im paths used instead of random channels")
    ap.add_argument("--full", action="store_true", help="use M=512, N=64, Q=16, cp_len=24")
    ap.add_argument("--workers", type=int, default=None, help="threads for the audit and BER trials")
    ap.add_argument("--debug", action="store_true", help="verbose logging and MP posterior dump")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = read_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"oddm: bad config {args.config}: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 1 << 64:
            print("oddm: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return 2
        cfg = with_seed(cfg, args.seed)
    if args.full:
        cfg = full_scale(cfg)
    channel = None
    inputs = [args.config]
    if args.channel_file is not None:
        channel = read_channel_csv(args.channel_file)
        inputs.append(args.channel_file)

    specs = [
        ExperimentSpec(kind, cfg, out=args.out, channel=channel, workers=args.workers, debug=args.debug)
        for kind in args.experiments
    ]
    report = run_all(specs, args.out, inputs=inputs)
    for res in report.results:
        summary = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in res.metrics.items())
        print(f"{res.kind}: {'PASS' if res.passed else 'FAIL'} ({summary})")
    print(f"manifest: {report.manifest}")
    return report.status


if __name__ == "__main__":
    sys.exit(main())
