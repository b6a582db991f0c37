import json

import numpy as np
import pytest

from mgcn.checkpoint import read_header
from mgcn.cli import main
from mgcn.data import load_motion, save_motion, synth_corpus
from mgcn.skeleton import builtin_skeleton
from mgcn.training import mean_joint_distance


@pytest.fixture
def corpus_dir(tmp_path):
    sk = builtin_skeleton("stick6")
    seqs = synth_corpus(sk, 4, 25, "sinusoidal", seed=0, correlated=True)
    d = tmp_path / "data"
    d.mkdir()
    for i, s in enumerate(seqs):
        save_motion(s, d / f"seq{i:02d}.motion")
    return d


def run_train(tmp_path, corpus_dir, *extra):
    out = tmp_path / "run"
    code = main(["train", "--skeleton", "stick6", "--data", str(corpus_dir),
                 "--out", str(out), "--epochs", "0", "--val-fraction", "0",
                 "--feature-width", "8", "--stm-hidden", "4", "--csb-hidden", "8",
                 "--csb-proj", "4", "--sim-stack", "1", "--gcn-blocks", "1",
                 *extra])
    assert code == 0
    return out


def test_epochs_zero_emits_initialization_checkpoint(tmp_path, corpus_dir):
    out = run_train(tmp_path, corpus_dir)
    assert (out / "checkpoint.mgcn").exists()
    assert (out / "manifest.json").exists()
    curve = (out / "loss_curve.txt").read_text()
    assert curve.startswith("# epoch")
    header = read_header(out / "checkpoint.mgcn")
    assert header["hyper"]["model"]["sim_stack"] == 1


def test_manifest_records_resolved_config_and_digests(tmp_path, corpus_dir):
    out = run_train(tmp_path, corpus_dir, "--seed", "7")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "train"
    assert manifest["seed"] == 7
    assert manifest["config"]["epochs"] == 0
    assert manifest["config"]["skeleton"] == "stick6"
    assert len(manifest["inputs"]["data"]) == 4
    for entry in manifest["inputs"]["data"]:
        assert len(entry["sha256"]) == 64


def test_default_preset_mirrors_reference_settings(tmp_path, corpus_dir):
    # flags omitted: 100 epochs, decay 0.96 every 2, SIM stack of 3
    from mgcn.cli import _TRAIN_DEFAULTS
    assert _TRAIN_DEFAULTS["epochs"] == 100
    assert _TRAIN_DEFAULTS["sim_stack"] == 3
    assert _TRAIN_DEFAULTS["batch"] == 256
    from mgcn.training import TrainConfig
    cfg = TrainConfig()
    assert cfg.lr_decay == 0.96 and cfg.lr_decay_every == 2 and cfg.epochs == 100


def test_ablate_no_csb_checkpoint_has_no_csb_records(tmp_path, corpus_dir):
    out = run_train(tmp_path, corpus_dir, "--ablate", "no-csb")
    header = read_header(out / "checkpoint.mgcn")
    names = [r["name"] for r in header["params"]]
    assert names and not [n for n in names if "csb" in n]


def test_ablate_no_stm_checkpoint_has_no_stm_records(tmp_path, corpus_dir):
    out = run_train(tmp_path, corpus_dir, "--ablate", "no-stm")
    header = read_header(out / "checkpoint.mgcn")
    names = [r["name"] for r in header["params"]]
    assert names and not [n for n in names if n.startswith("stm.")]


def test_training_run_writes_loss_curve(tmp_path, corpus_dir):
    out = tmp_path / "run"
    code = main(["train", "--skeleton", "stick6", "--data", str(corpus_dir),
                 "--out", str(out), "--epochs", "2", "--batch", "8",
                 "--feature-width", "8", "--stm-hidden", "4", "--csb-hidden", "8",
                 "--csb-proj", "4", "--sim-stack", "1", "--gcn-blocks", "1",
                 "--val-fraction", "0.25", "--seed", "3"])
    assert code == 0
    lines = (out / "loss_curve.txt").read_text().strip().splitlines()
    assert len(lines) == 3  # header + 2 epochs
    cells = lines[1].split()
    assert not np.isnan(float(cells[2]))  # val loss present


def test_config_file_and_flag_precedence(tmp_path, corpus_dir):
    cfg_file = tmp_path / "cfg.yaml"
    cfg_file.write_text("epochs: 0\nseed: 5\nsim_stack: 1\nfeature_width: 8\n"
                        "stm_hidden: 4\ncsb_hidden: 8\ncsb_proj: 4\ngcn_blocks: 1\n"
                        "val_fraction: 0\n")
    out = tmp_path / "run"
    code = main(["train", "--skeleton", "stick6", "--data", str(corpus_dir),
                 "--out", str(out), "--config", str(cfg_file), "--seed", "9"])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 9  # flag wins
    assert manifest["config"]["epochs"] == 0  # file wins over default


def test_eval_untrained_equals_baseline_columns(tmp_path, corpus_dir):
    run = run_train(tmp_path, corpus_dir)
    out = tmp_path / "eval"
    code = main(["eval", "--checkpoint", str(run / "checkpoint.mgcn"),
                 "--data", str(corpus_dir), "--out", str(out),
                 "--horizons", "80,160,320,400"])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["horizon_frames"] == [2, 4, 8, 10]
    for preds in report["actions"].values():
        assert np.allclose(preds["model"], preds["baseline"], atol=1e-6)


def test_eval_single_horizon_maps_to_frame_10(tmp_path, corpus_dir):
    run = run_train(tmp_path, corpus_dir)
    out = tmp_path / "eval"
    code = main(["eval", "--checkpoint", str(run / "checkpoint.mgcn"),
                 "--data", str(corpus_dir), "--out", str(out), "--horizons", "400"])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["horizons_ms"] == [400] and report["horizon_frames"] == [10]


def test_eval_text_and_json_agree(tmp_path, corpus_dir):
    run = run_train(tmp_path, corpus_dir)
    out = tmp_path / "eval"
    main(["eval", "--checkpoint", str(run / "checkpoint.mgcn"),
          "--data", str(corpus_dir), "--out", str(out)])
    report = json.loads((out / "report.json").read_text())
    for line in (out / "report.txt").read_text().strip().splitlines()[1:]:
        action, predictor, *cells = line.split("\t")
        source = report["average"] if action == "average" else report["actions"][action]
        assert [float(c) for c in cells] == source[predictor]


def test_eval_skeleton_mismatch_is_validation_error(tmp_path, corpus_dir):
    run = run_train(tmp_path, corpus_dir)
    code = main(["eval", "--checkpoint", str(run / "checkpoint.mgcn"),
                 "--data", str(corpus_dir), "--out", str(tmp_path / "e"),
                 "--skeleton", "h36m20"])
    assert code == 2


def test_predict_zero_init_repeats_last_frame(tmp_path, corpus_dir):
    run = run_train(tmp_path, corpus_dir)
    history_file = sorted(corpus_dir.glob("*.motion"))[0]
    out_file = tmp_path / "pred.motion"
    code = main(["predict", "--checkpoint", str(run / "checkpoint.mgcn"),
                 "--history", str(history_file), "--out", str(out_file)])
    assert code == 0
    pred = load_motion(out_file)
    source = load_motion(history_file)
    assert pred.n_frames == 10
    assert np.allclose(pred.frames, np.tile(source.frames[-1], (10, 1)), atol=1e-6)


def test_predict_respects_n_future_flag(tmp_path, corpus_dir):
    run = run_train(tmp_path, corpus_dir)
    history_file = sorted(corpus_dir.glob("*.motion"))[0]
    out_file = tmp_path / "pred.motion"
    code = main(["predict", "--checkpoint", str(run / "checkpoint.mgcn"),
                 "--history", str(history_file), "--out", str(out_file),
                 "--n-future", "14"])
    assert code == 0
    assert load_motion(out_file).n_frames == 14


def test_predict_too_short_history_is_input_error(tmp_path, corpus_dir):
    run = run_train(tmp_path, corpus_dir)
    short = tmp_path / "short.motion"
    sk = builtin_skeleton("stick6")
    seq = synth_corpus(sk, 1, 25, "sinusoidal", seed=1)[0]
    seq.frames = seq.frames[:4]
    save_motion(seq, short)
    code = main(["predict", "--checkpoint", str(run / "checkpoint.mgcn"),
                 "--history", str(short), "--out", str(tmp_path / "p.motion")])
    assert code == 2


def test_predict_then_eval_consistency(tmp_path, corpus_dir):
    # the error computed from a written prediction equals evaluate()'s number
    run = run_train(tmp_path, corpus_dir)
    files = sorted(corpus_dir.glob("*.motion"))
    source = load_motion(files[0])
    history = source.frames[:10]
    future = source.frames[10:20]
    hist_file = tmp_path / "hist.motion"
    save_motion(type(source)(history, fps=source.fps, representation=source.representation,
                             action=source.action), hist_file)
    pred_file = tmp_path / "pred.motion"
    main(["predict", "--checkpoint", str(run / "checkpoint.mgcn"),
          "--history", str(hist_file), "--out", str(pred_file)])
    pred = load_motion(pred_file)

    from mgcn.checkpoint import load_checkpoint
    from mgcn.cli import _model_from_checkpoint
    from mgcn.data import Window
    from mgcn.training import evaluate
    model, _ = _model_from_checkpoint(run / "checkpoint.mgcn")
    report = evaluate(model, [Window(history, future, "x")], [400])
    direct = mean_joint_distance(pred.frames[9][None, :], future[9][None, :])
    assert direct == pytest.approx(report.actions["x"]["model"][0], abs=1e-6)


def test_selfcheck_passes_clean(capsys):
    assert main(["selfcheck"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4 and "FAIL" not in out


def test_selfcheck_fault_injection_fails(capsys):
    assert main(["selfcheck", "--inject-fault", "softmax-skip"]) == 3
    out = capsys.readouterr().out
    assert "FAIL attention_normalized" in out


def test_usage_error_exit_code_1():
    assert main(["train", "--data", "x"]) == 1  # missing required flags
    assert main(["frobnicate"]) == 1


def test_validation_error_exit_code_2(tmp_path, corpus_dir):
    # h36m20 skeleton against 18-wide stick6 data
    code = main(["train", "--skeleton", "h36m20", "--data", str(corpus_dir),
                 "--out", str(tmp_path / "r"), "--epochs", "0"])
    assert code == 2


def test_missing_data_path_maps_to_runtime_exit(tmp_path):
    code = main(["train", "--skeleton", "stick6", "--data", str(tmp_path / "nope.motion"),
                 "--out", str(tmp_path / "r"), "--epochs", "0"])
    assert code == 3  # unreadable file is an OS-level failure


def test_seeded_runs_are_bit_identical(tmp_path, corpus_dir):
    args = ["train", "--skeleton", "stick6", "--data", str(corpus_dir),
            "--epochs", "2", "--batch", "8", "--seed", "13",
            "--feature-width", "8", "--stm-hidden", "4", "--csb-hidden", "8",
            "--csb-proj", "4", "--sim-stack", "1", "--gcn-blocks", "1",
            "--val-fraction", "0"]
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    assert (out_a / "checkpoint.mgcn").read_bytes() == (out_b / "checkpoint.mgcn").read_bytes()
    assert (out_a / "loss_curve.txt").read_text() == (out_b / "loss_curve.txt").read_text()
