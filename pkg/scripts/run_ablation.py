#!/usr/bin/env python3
"""Train every variant over several seeds and summarise test metrics.

Example (WN18RR v1):

    python3 scripts/run_ablation.py --train $TACT_DATA_ROOT/WN18RR_v1 \
        --test $TACT_DATA_ROOT/WN18RR_v1_ind --out runs/wn18rr_v1

Writes one run directory per (variant, seed), a frequency-baseline directory,
and ``summary.tsv`` with per-variant means.
"""
from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

import numpy as np

from tact.cli import main as tact

VARIANTS = ("full", "no-rc", "no-ra", "base")


def run(train: Path, test: Path, out: Path, seeds, variants, extra) -> list[dict]:
    rows = []
    for variant in variants:
        runs = []
        start = time.perf_counter()
        for seed in seeds:
            run_dir = out / f"{variant}-seed{seed}"
            code = tact(["train", "--data", str(train), "--test-data", str(test), "--variant", variant,
                         "--seed", str(seed), "--out", str(run_dir), *extra])
            if code:
                raise SystemExit(f"{variant} seed {seed} failed with exit code {code}")
            runs.append(json.loads((run_dir / "metrics.json").read_text()))
        minutes = (time.perf_counter() - start) / 60
        rows.append({
            "variant": variant,
            "auc_pr": float(np.mean([r["auc_pr"] for r in runs])),
            "mrr": float(np.mean([r["mrr"] for r in runs])),
            "hits1": float(np.mean([r["hits"]["1"] for r in runs])),
            "minutes": minutes,
        })
        print(f"{variant:6s} auc-pr {rows[-1]['auc_pr']:.4f}  mrr {rows[-1]['mrr']:.4f}  ({minutes:.1f} min)")

    base = out / "frequency"
    tact(["eval", "--test-data", str(test), "--data", str(train), "--baseline", "frequency",
          "--freq-source", "both", "--out", str(base)])
    for src in ("fact", "train"):
        mrr = json.loads((base / f"baseline_frequency_{src}.json").read_text())["mrr"]
        rows.append({"variant": f"frequency-{src}", "auc_pr": float("nan"), "mrr": mrr, "hits1": float("nan"), "minutes": 0.0})
        print(f"frequency ({src} counts) mrr {mrr:.4f}")

    with (out / "summary.tsv").open("w", encoding="utf-8") as fh:
        fh.write("variant\tauc_pr\tmrr\thits1\tminutes\n")
        for r in rows:
            fh.write(f"{r['variant']}\t{r['auc_pr']:.6f}\t{r['mrr']:.6f}\t{r['hits1']:.6f}\t{r['minutes']:.2f}\n")
    return rows


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--test", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--variants", nargs="+", default=list(VARIANTS[:3]), choices=VARIANTS)
    args, extra = p.parse_known_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    run(args.train, args.test, args.out, args.seeds, args.variants, extra)


if __name__ == "__main__":
    main()
