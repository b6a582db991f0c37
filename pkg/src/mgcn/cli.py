"""Command-line entry point: train, eval, predict, selfcheck.

Config precedence is defaults < config file (--config or $MGCN_CONFIG) <
explicit flags. Every run writes a manifest (resolved config, seed, code
version, input digests, output paths) before any other side effect.

Exit codes: 0 success, 1 usage, 2 validation, 3 runtime/numeric.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .autodiff import ShapeError
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (MotionSequence, corpus_files, load_corpus, load_motion,
                   make_windows, save_motion, split_sequences)
from .errors import (CheckpointError, InputError, MgcnError, NumericError,
                     ParseError, SchemaError, UsageError, ValidationError)
from .model import MGCN, ModelConfig
from .selfcheck import FAULTS, run_selfcheck
from .skeleton import (BUILTIN_SKELETONS, SkeletonConfig, builtin_skeleton,
                       load_skeleton, save_skeleton)
from .training import (TrainConfig, evaluate, loss_curve_text, predict_future,
                       train)

ENV_CONFIG = "MGCN_CONFIG"

ABLATIONS = {"no-stm": "no_stm_mean_pool", "no-csb": "no_csb",
             "parallel-decoder": "parallel_decoder"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve_skeleton(spec: str) -> tuple[SkeletonConfig, dict]:
    if spec in BUILTIN_SKELETONS:
        cfg = builtin_skeleton(spec)
        digest = hashlib.sha256(
            json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()
        return cfg, {"builtin": spec, "sha256": digest}
    cfg = load_skeleton(spec)
    return cfg, {"path": str(spec), "sha256": _sha256(spec)}


def _load_file_config(path_flag) -> dict:
    path = path_flag or os.environ.get(ENV_CONFIG)
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ValidationError(f"config file {path} must be a mapping")
    return raw


def _resolve(defaults: dict, file_cfg: dict, args: argparse.Namespace, keys) -> dict:
    resolved = dict(defaults)
    for key in keys:
        if key in file_cfg:
            resolved[key] = file_cfg[key]
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
    return resolved


def _write_manifest(out_dir: Path, command: str, resolved: dict, inputs: dict,
                    outputs: dict) -> Path:
    manifest = {
        "command": command,
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "seed": resolved.get("seed"),
        "config": resolved,
        "inputs": inputs,
        "outputs": outputs,
    }
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_dataset(data_specs) -> list[MotionSequence]:
    files: list[Path] = []
    for spec in data_specs:
        files.extend(corpus_files(spec))
    if not files:
        raise InputError(f"no motion files found under {data_specs}")
    return load_corpus(files)


# -- train ------------------------------------------------------------------


_TRAIN_DEFAULTS = {
    "epochs": 100, "batch": 256, "lr": 5e-4, "n_history": 10, "n_future": 10,
    "dct_coeffs": None, "sim_stack": 3, "seed": 0, "feature_width": 256,
    "stm_hidden": 16, "csb_hidden": 512, "csb_proj": 64, "gcn_blocks": 3,
    "loss": "auto", "val_fraction": 0.1, "window_stride": 1, "max_steps": None,
    "grad_clip": 1.0,
}


def cmd_train(args) -> int:
    file_cfg = _load_file_config(args.config)
    resolved = _resolve(_TRAIN_DEFAULTS, file_cfg, args, _TRAIN_DEFAULTS.keys())
    ablations = sorted(set(args.ablate or file_cfg.get("ablate", [])))
    for a in ablations:
        if a not in ABLATIONS:
            raise UsageError(f"unknown ablation {a!r}; choices: {sorted(ABLATIONS)}")
    resolved["ablate"] = ablations
    resolved["skeleton"] = args.skeleton
    resolved["data"] = list(args.data)

    skeleton, skeleton_info = _resolve_skeleton(args.skeleton)
    seqs = _load_dataset(args.data)
    if seqs[0].k != skeleton.k:
        raise ValidationError(
            f"data pose width {seqs[0].k} does not match skeleton width {skeleton.k}")

    n_history, n_future = resolved["n_history"], resolved["n_future"]
    n_coeffs = resolved["dct_coeffs"] or (n_history + n_future)
    loss_kind = resolved["loss"]
    if loss_kind == "auto":
        loss_kind = ("position_mpjpe" if seqs[0].representation == "position3d"
                     else "angle_mae")
    model_cfg = ModelConfig(
        n_coeffs=n_coeffs, feature_width=resolved["feature_width"],
        stm_hidden=resolved["stm_hidden"], csb_hidden=resolved["csb_hidden"],
        csb_proj=resolved["csb_proj"], sim_stack=resolved["sim_stack"],
        gcn_blocks=resolved["gcn_blocks"],
        no_stm_mean_pool="no-stm" in ablations, no_csb="no-csb" in ablations,
        parallel_decoder="parallel-decoder" in ablations,
        init_seed=resolved["seed"])
    train_cfg = TrainConfig(
        epochs=resolved["epochs"], batch_size=resolved["batch"], lr=resolved["lr"],
        n_history=n_history, n_future=n_future, seed=resolved["seed"],
        loss_kind=loss_kind, grad_clip=resolved["grad_clip"] or None)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "checkpoint.mgcn"
    curve_path = out_dir / "loss_curve.txt"
    inputs = {"skeleton": skeleton_info,
              "data": [{"path": str(p), "sha256": _sha256(p)}
                       for spec in args.data for p in corpus_files(spec)]}
    _write_manifest(out_dir, "train", resolved, inputs,
                    {"checkpoint": str(ckpt_path), "loss_curve": str(curve_path)})

    splits = split_sequences(seqs, val_fraction=resolved["val_fraction"])
    train_windows = make_windows(splits["train"], n_history, n_future,
                                 stride=resolved["window_stride"], split="train")
    val_windows = (make_windows(splits["val"], n_history, n_future, split="val")
                   if splits["val"] else None)
    if not train_windows.windows:
        raise ValidationError(
            f"no training windows: sequences shorter than {n_history + n_future} frames")

    model = MGCN(skeleton, model_cfg)
    if train_cfg.epochs > 0:
        result = train(model, train_windows, train_cfg, val_dataset=val_windows,
                       max_steps=resolved["max_steps"])
        curve_path.write_text(loss_curve_text(result), encoding="utf-8")
        print(f"trained {result.steps} steps, final train loss {result.final_train_loss:.6g}")
    else:
        curve_path.write_text("# epoch train_loss val_loss lr\n", encoding="utf-8")
        print("epochs=0: wrote initialization checkpoint only")

    hyper = model.hyper_dict()
    hyper["train"] = {"n_history": n_history, "n_future": n_future, "loss_kind": loss_kind}
    save_checkpoint(ckpt_path, hyper,
                    {name: p.data for name, p in model.named_parameters().items()})
    print(f"checkpoint: {ckpt_path}")
    return 0


# -- eval ---------------------------------------------------------------------


def _model_from_checkpoint(path) -> tuple[MGCN, dict]:
    hyper, arrays = load_checkpoint(path)
    skeleton = SkeletonConfig.from_dict(hyper["skeleton"])
    model_cfg = ModelConfig(**hyper["model"])
    model = MGCN(skeleton, model_cfg)
    model.load_arrays(arrays)
    return model, hyper


def cmd_eval(args) -> int:
    model, hyper = _model_from_checkpoint(args.checkpoint)
    if args.skeleton:
        skeleton, _ = _resolve_skeleton(args.skeleton)
        if skeleton.to_dict() != model.skeleton.to_dict():
            raise ValidationError(
                f"skeleton {args.skeleton!r} does not match the checkpoint's skeleton "
                f"{model.skeleton.name!r}")
    train_info = hyper.get("train", {})
    n_history = args.n_history or train_info.get("n_history", 10)
    n_future = args.n_future or train_info.get("n_future", 10)
    horizons = [int(tok) for tok in args.horizons.split(",") if tok]

    seqs = _load_dataset(args.data)
    if seqs[0].k != model.skeleton.k:
        raise ValidationError(
            f"data pose width {seqs[0].k} does not match checkpoint width {model.skeleton.k}")
    windows = make_windows(seqs, n_history, n_future, split="test")
    if not windows.windows:
        raise ValidationError("no evaluable windows in the dataset")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = {"checkpoint": str(args.checkpoint), "data": list(args.data),
                "horizons": horizons, "n_history": n_history, "n_future": n_future,
                "seed": None}
    inputs = {"checkpoint": {"path": str(args.checkpoint), "sha256": _sha256(args.checkpoint)},
              "data": [{"path": str(p), "sha256": _sha256(p)}
                       for spec in args.data for p in corpus_files(spec)]}
    text_path = out_dir / "report.txt"
    json_path = out_dir / "report.json"
    _write_manifest(out_dir, "eval", resolved, inputs,
                    {"report_text": str(text_path), "report_json": str(json_path)})

    report = evaluate(model, windows, horizons, fps=seqs[0].fps)
    text_path.write_text(report.to_text(), encoding="utf-8")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    sys.stdout.write(report.to_text())
    return 0


# -- predict --------------------------------------------------------------------


def cmd_predict(args) -> int:
    model, hyper = _model_from_checkpoint(args.checkpoint)
    train_info = hyper.get("train", {})
    n_history = train_info.get("n_history", 10)
    n_future = args.n_future or train_info.get("n_future", 10)

    seq = load_motion(args.history)
    if seq.k != model.skeleton.k:
        raise ValidationError(
            f"history pose width {seq.k} does not match checkpoint width {model.skeleton.k}")
    if seq.n_frames < n_history:
        raise InputError(
            f"history has {seq.n_frames} frames, need at least {n_history}")
    history = seq.frames[-n_history:]
    future = predict_future(model, history, n_future)
    out = MotionSequence(future, fps=seq.fps, representation=seq.representation,
                         action=seq.action)
    out_path = Path(args.out)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    save_motion(out, out_path)
    print(f"wrote {n_future} predicted frames to {out_path}")
    return 0


# -- selfcheck --------------------------------------------------------------------


def cmd_selfcheck(args) -> int:
    results = run_selfcheck(seed=args.seed, inject_fault=args.inject_fault)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed")
        return 3
    print(f"all {len(results)} checks passed")
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="mgcn", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write a checkpoint")
    p_train.add_argument("--skeleton", required=True,
                         help="built-in skeleton name or path to a skeleton YAML")
    p_train.add_argument("--data", required=True, nargs="+",
                         help="motion files or directories of *.motion files")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--config", help="YAML config file (lower precedence than flags)")
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch", type=int)
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--n-history", dest="n_history", type=int)
    p_train.add_argument("--n-future", dest="n_future", type=int)
    p_train.add_argument("--dct-coeffs", dest="dct_coeffs", type=int)
    p_train.add_argument("--sim-stack", dest="sim_stack", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--ablate", action="append", choices=sorted(ABLATIONS),
                         help="repeatable architecture ablation switch")
    p_train.add_argument("--feature-width", dest="feature_width", type=int)
    p_train.add_argument("--stm-hidden", dest="stm_hidden", type=int)
    p_train.add_argument("--csb-hidden", dest="csb_hidden", type=int)
    p_train.add_argument("--csb-proj", dest="csb_proj", type=int)
    p_train.add_argument("--gcn-blocks", dest="gcn_blocks", type=int)
    p_train.add_argument("--loss", choices=["auto", "angle_mae", "position_mpjpe"])
    p_train.add_argument("--val-fraction", dest="val_fraction", type=float)
    p_train.add_argument("--window-stride", dest="window_stride", type=int)
    p_train.add_argument("--max-steps", dest="max_steps", type=int)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True, nargs="+")
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.add_argument("--horizons", default="80,160,320,400",
                        help="comma-separated milliseconds")
    p_eval.add_argument("--skeleton", help="optional skeleton to cross-check")
    p_eval.add_argument("--n-history", dest="n_history", type=int)
    p_eval.add_argument("--n-future", dest="n_future", type=int)
    p_eval.set_defaults(func=cmd_eval)

    p_pred = sub.add_parser("predict", help="predict future frames from a history file")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--history", required=True, help="motion file with >= N frames")
    p_pred.add_argument("--out", required=True, help="output motion file")
    p_pred.add_argument("--n-future", dest="n_future", type=int)
    p_pred.set_defaults(func=cmd_predict)

    p_check = sub.add_parser("selfcheck", help="run the embedded verification suite")
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--inject-fault", dest="inject_fault", choices=list(FAULTS),
                         default="none", help=argparse.SUPPRESS)
    p_check.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except (ValidationError, InputError, ParseError, SchemaError, CheckpointError,
            ShapeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (NumericError, OSError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
