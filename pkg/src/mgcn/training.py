"""Losses, optimizer, schedule, training loop, baseline, and evaluation.

The per-step pipeline is: replicate-pad the history, encode to temporal
coefficients, run the model, decode back to frames, and score against the
observed history plus true future (the loss averages over all N+T frames).
Everything is deterministic under a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .autodiff import Tensor, absolute, no_grad, square
from .data import Window, WindowedDataset
from .dct import DctConfig, dct_decode, dct_encode, pad_replicate
from .errors import InputError, NumericError, TrainingDiverged, ValidationError
from .model import MGCN

LOSS_KINDS = ("angle_mae", "position_mpjpe")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    lr: float = 5e-4
    lr_decay: float = 0.96
    lr_decay_every: int = 2
    n_history: int = 10
    n_future: int = 10
    seed: int = 0
    loss_kind: str = "position_mpjpe"
    grad_clip: float | None = 1.0
    attention_check: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValidationError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if self.lr_decay_every < 1:
            raise ValidationError(f"lr_decay_every must be >= 1, got {self.lr_decay_every}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.loss_kind not in LOSS_KINDS:
            raise ValidationError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")


# -- losses and metrics ------------------------------------------------------


def loss_mae(pred, truth) -> Tensor:
    """Mean absolute error over every frame and pose dimension."""
    pred = pred if isinstance(pred, Tensor) else Tensor(pred)
    truth = truth if isinstance(truth, Tensor) else Tensor(truth)
    if pred.shape != truth.shape:
        raise InputError(f"loss_mae: shapes differ, {pred.shape} vs {truth.shape}")
    return absolute(pred - truth).mean()


def loss_mpjpe(pred, truth, dims: int = 3) -> Tensor:
    """Mean squared per-joint displacement: sum of squared coordinate errors
    divided by (n_joints * n_frames)."""
    pred = pred if isinstance(pred, Tensor) else Tensor(pred)
    truth = truth if isinstance(truth, Tensor) else Tensor(truth)
    if pred.shape != truth.shape:
        raise InputError(f"loss_mpjpe: shapes differ, {pred.shape} vs {truth.shape}")
    n_frames, k = pred.shape
    if k % dims != 0:
        raise InputError(f"loss_mpjpe: pose width {k} is not divisible by {dims}")
    n_joints = k // dims
    return square(pred - truth).sum() / (n_joints * n_frames)


def mean_joint_distance(pred: np.ndarray, truth: np.ndarray, dims: int = 3) -> float:
    """Evaluation metric: mean Euclidean per-joint distance over all frames."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise InputError(f"mean_joint_distance: shapes differ, {pred.shape} vs {truth.shape}")
    n_frames, k = pred.shape
    if k % dims != 0:
        raise InputError(f"mean_joint_distance: pose width {k} is not divisible by {dims}")
    diff = (pred - truth).reshape(n_frames, k // dims, dims)
    return float(np.linalg.norm(diff, axis=2).mean())


def mean_absolute_distance(pred: np.ndarray, truth: np.ndarray) -> float:
    """Evaluation metric for angle data: mean absolute error."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise InputError(f"mean_absolute_distance: shapes differ, {pred.shape} vs {truth.shape}")
    return float(np.abs(pred - truth).mean())


def make_loss(loss_kind: str, dims: int = 3):
    if loss_kind == "angle_mae":
        return loss_mae
    if loss_kind == "position_mpjpe":
        return lambda p, t: loss_mpjpe(p, t, dims=dims)
    raise ValidationError(f"unknown loss kind {loss_kind!r}")


# -- optimizer and schedule ---------------------------------------------------


class Adam:
    """First/second-moment adaptive optimizer with bias correction."""

    def __init__(self, params: Mapping[str, Tensor], lr: float = 5e-4,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_gradients(params: Mapping[str, Tensor], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    norm = math.sqrt(total)
    if norm > max_norm > 0.0:
        factor = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad = p.grad * factor
    return norm


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    if epoch < 0:
        raise InputError(f"epoch must be >= 0, got {epoch}")
    return cfg.lr * cfg.lr_decay ** (epoch // cfg.lr_decay_every)


# -- baseline and prediction ---------------------------------------------------


def zero_velocity_baseline(history: np.ndarray, t_future: int) -> np.ndarray:
    """Repeat the last observed frame t_future times."""
    history = np.asarray(history, dtype=np.float64)
    if history.ndim != 2 or history.shape[0] < 1:
        raise InputError(f"history must be a non-empty matrix, got shape {history.shape}")
    return np.repeat(history[-1:], t_future, axis=0)


def predict_sequence(model: MGCN, history: np.ndarray, n_future: int) -> np.ndarray:
    """Run the full pipeline and return all N+T decoded frames."""
    history = np.asarray(history, dtype=np.float64)
    cfg = DctConfig(history.shape[0], n_future, model.config.n_coeffs)
    padded = pad_replicate(history, n_future)
    coeffs = dct_encode(padded, cfg)
    with no_grad():
        pred = model.forward(Tensor(coeffs))
    return dct_decode(pred.data, cfg.length)


def predict_future(model: MGCN, history: np.ndarray, n_future: int) -> np.ndarray:
    """Predicted future frames only (T x K)."""
    return predict_sequence(model, history, n_future)[history.shape[0]:]


def window_loss(model: MGCN, window: Window, dct_cfg: DctConfig, loss_fn) -> Tensor:
    padded = pad_replicate(window.history, dct_cfg.n_future)
    coeffs = dct_encode(padded, dct_cfg)
    pred_coeffs = model.forward(Tensor(coeffs))
    pred_seq = dct_decode(pred_coeffs, dct_cfg.length)
    truth = Tensor(np.concatenate([window.history, window.future], axis=0))
    return loss_fn(pred_seq, truth)


# -- training loop -------------------------------------------------------------


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class TrainResult:
    epochs: list[EpochStats] = field(default_factory=list)
    steps: int = 0
    final_train_loss: float = float("nan")
    attention_checks: int = 0

    def loss_curve(self) -> list[tuple[int, float, float, float]]:
        return [(e.epoch, e.train_loss, e.val_loss, e.lr) for e in self.epochs]


def loss_curve_text(result: TrainResult) -> str:
    lines = ["# epoch train_loss val_loss lr"]
    for e in result.epochs:
        lines.append(f"{e.epoch} {e.train_loss:.10g} {e.val_loss:.10g} {e.lr:.10g}")
    return "\n".join(lines) + "\n"


def _check_attention(model: MGCN, tol: float = 1e-9) -> int:
    """Validate shape and row normalization of every recorded attention map."""
    expected = {
        "s2_to_s1": (model.skeleton.n_joints, model.skeleton.n_s2),
        "s3_to_s2": (model.skeleton.n_s2, model.skeleton.n_s3),
    }
    checked = 0
    for tag, mat in model.attention_maps:
        if mat.shape != expected[tag]:
            raise NumericError(
                f"attention {tag} has shape {mat.shape}, expected {expected[tag]}")
        row_sums = mat.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0)) > tol:
            raise NumericError(
                f"attention {tag} rows are not normalized (max deviation "
                f"{np.max(np.abs(row_sums - 1.0)):.3e})")
        if mat.min() < -tol or mat.max() > 1.0 + tol:
            raise NumericError(f"attention {tag} has entries outside [0, 1]")
        checked += 1
    return checked


def dataset_loss(model: MGCN, windows: Sequence[Window], dct_cfg: DctConfig, loss_fn) -> float:
    with no_grad():
        total = 0.0
        for w in windows:
            total += window_loss(model, w, dct_cfg, loss_fn).item()
    return total / len(windows) if windows else float("nan")


def train(model: MGCN, dataset: WindowedDataset | Sequence[Window], cfg: TrainConfig,
          val_dataset: WindowedDataset | Sequence[Window] | None = None,
          max_steps: int | None = None) -> TrainResult:
    """Adam training with the stepped learning-rate decay.

    Raises TrainingDiverged with the offending step if the loss goes
    non-finite. Bitwise deterministic for a fixed (seed, config, data).
    """
    windows = list(dataset.windows if isinstance(dataset, WindowedDataset) else dataset)
    val_windows = None
    if val_dataset is not None:
        val_windows = list(val_dataset.windows if isinstance(val_dataset, WindowedDataset)
                           else val_dataset)
    if not windows:
        raise InputError("training dataset has no windows")
    for w in windows:
        if w.history.shape[0] != cfg.n_history or w.future.shape[0] != cfg.n_future:
            raise ValidationError(
                f"window geometry {w.history.shape[0]}+{w.future.shape[0]} does not match "
                f"config {cfg.n_history}+{cfg.n_future}")

    dct_cfg = DctConfig(cfg.n_history, cfg.n_future, model.config.n_coeffs)
    loss_fn = make_loss(cfg.loss_kind, dims=model.skeleton.dims_per_joint)
    opt = Adam(model.named_parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)

    result = TrainResult()
    step = 0
    stop = False
    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(cfg, epoch)
        order = rng.permutation(len(windows))
        epoch_losses: list[float] = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [windows[i] for i in order[start:start + cfg.batch_size]]
            loss = window_loss(model, batch[0], dct_cfg, loss_fn)
            for w in batch[1:]:
                loss = loss + window_loss(model, w, dct_cfg, loss_fn)
            loss = loss / len(batch)
            if cfg.attention_check:
                result.attention_checks += _check_attention(model)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss {value} at step {step} (epoch {epoch})")
            opt.zero_grad()
            loss.backward()
            if cfg.grad_clip is not None:
                clip_gradients(opt.params, cfg.grad_clip)
            opt.step(lr=lr)
            epoch_losses.append(value)
            step += 1
            if max_steps is not None and step >= max_steps:
                stop = True
                break
        train_loss = float(np.mean(epoch_losses)) if epoch_losses else float("nan")
        val_loss = (dataset_loss(model, val_windows, dct_cfg, loss_fn)
                    if val_windows else float("nan"))
        result.epochs.append(EpochStats(epoch, train_loss, val_loss, lr))
        result.final_train_loss = train_loss
        if stop:
            break
    result.steps = step
    return result


# -- evaluation ----------------------------------------------------------------


def horizon_frames(horizons_ms: Sequence[int], fps: int) -> list[int]:
    return [int(round(ms * fps / 1000.0)) for ms in horizons_ms]


@dataclass
class EvalReport:
    horizons_ms: list[int]
    horizon_frames: list[int]
    fps: int
    metric: str
    actions: dict[str, dict[str, list[float]]]
    average: dict[str, list[float]]

    def _fmt(self, value: float) -> str:
        return f"{value:.6f}"

    def to_text(self) -> str:
        lines = ["action\tpredictor\t" + "\t".join(str(ms) for ms in self.horizons_ms)]
        for action in sorted(self.actions):
            for predictor in ("model", "baseline"):
                if predictor not in self.actions[action]:
                    continue
                cells = "\t".join(self._fmt(v) for v in self.actions[action][predictor])
                lines.append(f"{action}\t{predictor}\t{cells}")
        for predictor in ("model", "baseline"):
            if predictor not in self.average:
                continue
            cells = "\t".join(self._fmt(v) for v in self.average[predictor])
            lines.append(f"average\t{predictor}\t{cells}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        def rounded(values):
            return [float(self._fmt(v)) for v in values]

        return {
            "horizons_ms": list(self.horizons_ms),
            "horizon_frames": list(self.horizon_frames),
            "fps": self.fps,
            "metric": self.metric,
            "actions": {a: {p: rounded(vs) for p, vs in preds.items()}
                        for a, preds in self.actions.items()},
            "average": {p: rounded(vs) for p, vs in self.average.items()},
        }


def evaluate(model: MGCN, dataset: WindowedDataset | Sequence[Window],
             horizons_ms: Sequence[int], fps: int = 25,
             include_baseline: bool = True, metric: str | None = None) -> EvalReport:
    """Per-action, per-horizon error table with zero-velocity baseline columns.

    The metric is mean per-joint Euclidean distance for 3D data and mean
    absolute error for angle data, at each requested horizon frame.
    """
    windows = list(dataset.windows if isinstance(dataset, WindowedDataset) else dataset)
    if not windows:
        raise InputError("evaluation dataset has no windows")
    t_future = windows[0].future.shape[0]
    frames = horizon_frames(horizons_ms, fps)
    for ms, h in zip(horizons_ms, frames):
        if not 1 <= h <= t_future:
            raise InputError(
                f"horizon {ms} ms maps to frame {h}, outside the predicted range "
                f"[1, {t_future}]")
    dims = model.skeleton.dims_per_joint
    if metric is None:
        metric = "mean_joint_distance" if dims == 3 else "mean_absolute_error"

    def frame_error(pred_frame: np.ndarray, truth_frame: np.ndarray) -> float:
        if metric == "mean_joint_distance":
            return mean_joint_distance(pred_frame[None, :], truth_frame[None, :], dims=dims)
        return mean_absolute_distance(pred_frame[None, :], truth_frame[None, :])

    per_action: dict[str, dict[str, list[list[float]]]] = {}
    for w in windows:
        pred = predict_future(model, w.history, t_future)
        base = zero_velocity_baseline(w.history, t_future)
        bucket = per_action.setdefault(w.action, {"model": [], "baseline": []})
        bucket["model"].append([frame_error(pred[h - 1], w.future[h - 1]) for h in frames])
        if include_baseline:
            bucket["baseline"].append([frame_error(base[h - 1], w.future[h - 1]) for h in frames])

    actions: dict[str, dict[str, list[float]]] = {}
    for action, preds in per_action.items():
        actions[action] = {}
        for predictor, rows in preds.items():
            if rows:
                actions[action][predictor] = list(np.mean(np.array(rows), axis=0))
    predictors = ["model"] + (["baseline"] if include_baseline else [])
    average = {p: list(np.mean(np.array([actions[a][p] for a in actions]), axis=0))
               for p in predictors}
    return EvalReport(horizons_ms=list(horizons_ms), horizon_frames=frames, fps=fps,
                      metric=metric, actions=actions, average=average)
