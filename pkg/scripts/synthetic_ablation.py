#!/usr/bin/env python3
"""Ablation on the generated family benchmark (no download needed).

    python3 scripts/synthetic_ablation.py --out runs/synthetic --epochs 5

Unrecognised flags are forwarded to ``tact train`` (e.g. ``--neg-rel 0.5``).
"""
from __future__ import annotations

import argparse
from pathlib import Path

from run_ablation import VARIANTS, run

from tact.synthetic import write_benchmark


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--variants", nargs="+", default=list(VARIANTS[:3]), choices=VARIANTS)
    p.add_argument("--founders", type=int, default=30)
    args, extra = p.parse_known_args()
    train, test = write_benchmark(args.out / "data", founders=args.founders)
    run(train, test, args.out, args.seeds, args.variants, extra)


if __name__ == "__main__":
    main()
