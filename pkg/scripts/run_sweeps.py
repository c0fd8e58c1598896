#!/usr/bin/env python3
"""Reproduce the tolerance, mask-rate, and sampling-diversity sweeps on a
trained model directory (see train_toy.py) and write CSV/JSON reports."""

import argparse
import json
from dataclasses import replace
from pathlib import Path

from tlc.config import OptimizeConfig
from tlc.dataset import load_corpus, split_corpus
from tlc.harness import (
    evaluate_condition,
    ik_vs_latent_report,
    mmodality_by_mask_rate,
    write_rows_csv,
    write_rows_json,
)
from tlc.models import load_bundle


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("model_dir", type=Path)
    parser.add_argument("--out", type=Path, default=Path("runs/sweeps"))
    parser.add_argument("--samples", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    bundle = load_bundle(args.model_dir)
    meta = json.loads((args.model_dir / "meta.json").read_text())
    samples = load_corpus(args.model_dir / "corpus.jsonl", bundle.skeleton, bundle.layout)
    test = split_corpus(samples, meta["seed"])["test"][: args.samples]
    args.out.mkdir(parents=True, exist_ok=True)

    rows = []
    for tol in (1e-4, 1e-5, 1e-6):
        rows.append(
            evaluate_condition(
                bundle.codec, bundle.mtt, bundle.stats, test, "all", 0.0,
                OptimizeConfig(tolerance=tol), args.seed,
            )
        )
        print(f"tolerance {tol:g}: avg_err {rows[-1].avg_err_cm:.3f} cm, "
              f"{rows[-1].seconds_per_batch:.1f} s/batch")
    for rate in (0.0, 0.25, 0.5, 0.75):
        rows.append(
            evaluate_condition(
                bundle.codec, bundle.mtt, bundle.stats, test, "all", rate,
                OptimizeConfig(tolerance=1e-6), args.seed,
            )
        )
        print(f"mask rate {rate}: avg_err_full {rows[-1].avg_err_full_cm:.2f} cm")
    write_rows_csv(args.out / "sweeps.csv", rows)
    write_rows_json(args.out / "sweeps.json", rows)

    mm = mmodality_by_mask_rate(
        bundle.codec, bundle.mtt, bundle.stats, test,
        (0.0, 0.25, 0.5, 0.75), seed=args.seed, samples_per_input=10,
    )
    ik = ik_vs_latent_report(
        bundle.codec, bundle.mtt, bundle.stats, test[:6], seed=args.seed,
        opt=replace(bundle.config.optimize, tolerance=1e-6),
    )
    (args.out / "summary.json").write_text(
        json.dumps({"mmodality_by_mask_rate": mm, "ik_comparison": ik}, indent=1)
    )
    print(json.dumps({"mmodality_by_mask_rate": mm, "ik_comparison": ik}, indent=1))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
