#!/usr/bin/env python3
"""Overfit study: memorize a small group-correlated synthetic corpus and
compare the trained future error against the hold-last-frame baseline.

Example:
    python scripts/overfit_experiment.py --steps 500 --seed 0
"""

import argparse

from mgcn.experiments import run_overfit


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--data-seed", type=int, default=42)
    args = parser.parse_args()

    outcome = run_overfit(seed=args.seed, max_steps=args.steps, data_seed=args.data_seed)
    print(f"steps:            {outcome.result.steps}")
    print(f"final train loss: {outcome.result.final_train_loss:.6g}")
    print(f"baseline error:   {outcome.baseline_error:.6f}")
    print(f"model error:      {outcome.model_error:.6f}")
    print(f"ratio:            {outcome.ratio:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
