#!/usr/bin/env python3
"""Generate a synthetic motion corpus (and optионally a skeleton file) for
driving the CLI without licensed mocap data.

Example:
    python scripts/make_synthetic_data.py --skeleton stick6 --out data/synth \
        --sequences 20 --frames 50 --kind sinusoidal --correlated --seed 0
"""

import argparse
from pathlib import Path

from mgcn.data import save_motion, synth_corpus
from mgcn.skeleton import BUILTIN_SKELETONS, builtin_skeleton, load_skeleton, save_skeleton


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--skeleton", default="stick6",
                        help="built-in name or path to a skeleton YAML")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--sequences", type=int, default=20)
    parser.add_argument("--frames", type=int, default=50)
    parser.add_argument("--kind", default="sinusoidal",
                        choices=["sinusoidal", "piecewise_linear", "mixed"])
    parser.add_argument("--correlated", action="store_true",
                        help="couple dimensions within each body component")
    parser.add_argument("--fps", type=int, default=25)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--emit-skeleton", action="store_true",
                        help="also write the skeleton YAML next to the data")
    args = parser.parse_args()

    skeleton = (builtin_skeleton(args.skeleton) if args.skeleton in BUILTIN_SKELETONS
                else load_skeleton(args.skeleton))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seqs = synth_corpus(skeleton, args.sequences, args.frames, args.kind,
                        seed=args.seed, fps=args.fps, correlated=args.correlated)
    for i, seq in enumerate(seqs):
        save_motion(seq, out / f"seq{i:03d}.motion")
    if args.emit_skeleton:
        save_skeleton(skeleton, out / f"{skeleton.name}.yaml")
    print(f"wrote {len(seqs)} sequences ({args.frames} frames, K={skeleton.k}) to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
