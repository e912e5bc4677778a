"""Command-line entry point: ``clbr <stage> --config <path>``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .errors import CLBRError
from .pipeline import STAGES, run_stage


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clbr", description=__doc__)
    parser.add_argument("stage", choices=STAGES + ("all",))
    parser.add_argument("--config", type=Path, help="TOML config (all keys optional)")
    parser.add_argument("--out", type=Path, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--threads", type=int, help="BLAS thread limit (overrides config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
        overrides = {k: v for k, v in (("out", args.out), ("seed", args.seed), ("threads", args.threads))
                     if v is not None}
        if overrides:
            cfg = dataclasses.replace(cfg, **overrides)
            if "seed" in overrides:
                cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, seed=cfg.seed),
                                          split=dataclasses.replace(cfg.split, seed=cfg.seed))
        result = run_stage(args.stage, cfg)
    except CLBRError as exc:
        print(f"clbr {args.stage}: error: {exc}", file=sys.stderr)
        return exc.exit_code

    if args.stage in ("eval", "all"):
        _, report = result
        print(json.dumps(report.summary(), indent=2, sort_keys=True))
    elif args.stage == "sample-complexity":
        print(json.dumps(result[1], indent=2, sort_keys=True))
    else:
        for p in result:
            print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
