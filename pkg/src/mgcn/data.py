"""Motion corpora: the `#motion v1` text format, preprocessing, sliding
windows, and synthetic motion generators for dataset-free experiments.

File format, one sequence per file:

    #motion v1 fps=<int> rep=<angle|position3d> action=<label>
    <K space-separated floats>          one line per frame
    ...

Pose columns are joint-major: all dims of joint 0, then joint 1, and so on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, ParseError, SchemaError
from .skeleton import ScaleId, SkeletonConfig

REPRESENTATIONS = ("angle", "position3d")
_HEADER_RE = re.compile(r"^#motion v1 fps=(\d+) rep=(angle|position3d) action=(\S+)$")


@dataclass
class MotionSequence:
    frames: np.ndarray
    fps: int
    representation: str = "position3d"
    action: str = "unknown"

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise InputError(f"frames must be a non-empty matrix, got shape {self.frames.shape}")
        if self.representation not in REPRESENTATIONS:
            raise InputError(f"unknown representation {self.representation!r}")
        if self.fps < 1:
            raise InputError(f"fps must be >= 1, got {self.fps}")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def k(self) -> int:
        return self.frames.shape[1]


def save_motion(seq: MotionSequence, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#motion v1 fps={seq.fps} rep={seq.representation} action={seq.action}\n")
        for row in seq.frames:
            fh.write(" ".join(f"{v:.9g}" for v in row) + "\n")


def load_motion(path) -> MotionSequence:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}:1: empty file, expected '#motion v1' header")
    m = _HEADER_RE.match(lines[0])
    if not m:
        raise ParseError(f"{path}:1: malformed header {lines[0]!r}")
    fps, rep, action = int(m.group(1)), m.group(2), m.group(3)
    rows: list[list[float]] = []
    width = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            values = [float(tok) for tok in line.split()]
        except ValueError as err:
            raise ParseError(f"{path}:{lineno}: non-numeric value ({err})") from err
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ParseError(
                f"{path}:{lineno}: ragged row has {len(values)} values, expected {width}")
        rows.append(values)
    if not rows:
        raise ParseError(f"{path}:2: no frames in file")
    return MotionSequence(np.array(rows), fps=fps, representation=rep, action=action)


def load_corpus(paths: Iterable) -> list[MotionSequence]:
    """Load several motion files; widths must agree across the corpus."""
    seqs = []
    k = None
    for path in paths:
        seq = load_motion(path)
        if k is None:
            k = seq.k
        elif seq.k != k:
            raise SchemaError(f"{path}: pose width {seq.k} differs from corpus width {k}")
        seqs.append(seq)
    return seqs


def corpus_files(root) -> list[Path]:
    root = Path(root)
    if root.is_dir():
        return sorted(root.glob("*.motion"))
    return [root]


# -- preprocessing ---------------------------------------------------------


def decimate(seq: MotionSequence, stride: int) -> MotionSequence:
    """Keep every stride-th frame; fps must divide evenly."""
    if stride < 1:
        raise InputError(f"stride must be >= 1, got {stride}")
    if stride == 1:
        return seq
    if seq.fps % stride != 0:
        raise InputError(f"fps {seq.fps} is not divisible by stride {stride}")
    return MotionSequence(seq.frames[::stride].copy(), fps=seq.fps // stride,
                          representation=seq.representation, action=seq.action)


@dataclass
class ColumnMask:
    """Which constant pose columns were dropped, with their values for reinsertion."""

    total_columns: int
    dropped: tuple[tuple[int, float], ...] = ()

    @property
    def kept_indices(self) -> np.ndarray:
        dropped = {i for i, _ in self.dropped}
        return np.array([i for i in range(self.total_columns) if i not in dropped], dtype=np.intp)

    def restore(self, frames: np.ndarray) -> np.ndarray:
        frames = np.asarray(frames, dtype=np.float64)
        kept = self.kept_indices
        if frames.shape[1] != kept.size:
            raise InputError(f"expected {kept.size} columns to restore, got {frames.shape[1]}")
        full = np.empty((frames.shape[0], self.total_columns))
        full[:, kept] = frames
        for idx, value in self.dropped:
            full[:, idx] = value
        return full


def save_column_mask(mask: ColumnMask, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#colmask v1 k={mask.total_columns}\n")
        for idx, value in mask.dropped:
            fh.write(f"{idx} {value:.9g}\n")


def load_column_mask(path) -> ColumnMask:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    m = re.match(r"^#colmask v1 k=(\d+)$", lines[0]) if lines else None
    if not m:
        raise ParseError(f"{path}:1: malformed column-mask header")
    dropped = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'index value'")
        dropped.append((int(parts[0]), float(parts[1])))
    return ColumnMask(total_columns=int(m.group(1)), dropped=tuple(dropped))


def drop_constant_columns(seqs: Sequence[MotionSequence],
                          threshold: float = 1e-8) -> tuple[list[MotionSequence], ColumnMask]:
    """Remove columns whose variance over the whole corpus is below threshold."""
    if not seqs:
        raise InputError("empty corpus")
    stacked = np.concatenate([s.frames for s in seqs], axis=0)
    variance = stacked.var(axis=0)
    dropped = tuple((int(i), float(stacked[:, i].mean()))
                    for i in np.flatnonzero(variance < threshold))
    mask = ColumnMask(total_columns=stacked.shape[1], dropped=dropped)
    kept = mask.kept_indices
    out = [MotionSequence(s.frames[:, kept].copy(), fps=s.fps,
                          representation=s.representation, action=s.action) for s in seqs]
    return out, mask


def preprocess(seqs: Sequence[MotionSequence], target_fps: int = 25,
               var_threshold: float = 1e-8) -> tuple[list[MotionSequence], ColumnMask]:
    """Down-sample to target_fps and strip constant columns. Idempotent."""
    resampled = []
    for s in seqs:
        if s.fps == target_fps:
            resampled.append(s)
        elif s.fps % target_fps == 0:
            resampled.append(decimate(s, s.fps // target_fps))
        else:
            raise InputError(f"cannot decimate {s.fps} fps to {target_fps} fps by integer stride")
    return drop_constant_columns(resampled, threshold=var_threshold)


# -- windows ---------------------------------------------------------------


@dataclass
class Window:
    history: np.ndarray
    future: np.ndarray
    action: str = "unknown"


@dataclass
class WindowedDataset:
    windows: list[Window]
    split: str = "train"
    skipped_sequences: int = 0

    def __len__(self) -> int:
        return len(self.windows)


def make_windows(seqs: Sequence[MotionSequence], n_history: int, n_future: int,
                 stride: int = 1, split: str = "train") -> WindowedDataset:
    """All maximal (history, future) windows; short sequences are skipped."""
    if n_history < 1 or n_future < 1:
        raise InputError("window sizes must be >= 1")
    if stride < 1:
        raise InputError(f"stride must be >= 1, got {stride}")
    total = n_history + n_future
    windows: list[Window] = []
    skipped = 0
    for seq in seqs:
        if seq.n_frames < total:
            skipped += 1
            continue
        for start in range(0, seq.n_frames - total + 1, stride):
            chunk = seq.frames[start:start + total]
            windows.append(Window(history=chunk[:n_history].copy(),
                                  future=chunk[n_history:].copy(),
                                  action=seq.action))
    return WindowedDataset(windows=windows, split=split, skipped_sequences=skipped)


def split_sequences(seqs: Sequence[MotionSequence],
                    val_fraction: float = 0.0,
                    test_fraction: float = 0.0) -> dict[str, list[MotionSequence]]:
    """Deterministic index-based split, disjoint at the sequence level."""
    n = len(seqs)
    n_test = int(round(n * test_fraction))
    n_val = int(round(n * val_fraction))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise InputError("split leaves no training sequences")
    return {
        "train": list(seqs[:n_train]),
        "val": list(seqs[n_train:n_train + n_val]),
        "test": list(seqs[n_train + n_val:]),
    }


# -- synthetic motion --------------------------------------------------------


def synth_motion(cfg: SkeletonConfig, kind: str, n_frames: int, seed: int,
                 fps: int = 25, correlated: bool = False,
                 freq_range: tuple[float, float] = (0.2, 2.0),
                 amp_range: tuple[float, float] = (0.1, 1.0),
                 action: str | None = None) -> MotionSequence:
    """Deterministic synthetic pose trajectories on a given skeleton.

    kinds: "sinusoidal", "piecewise_linear", "mixed". With ``correlated``,
    dimensions belonging to the same s2 component share a base waveform
    (scaled per dimension), so within-component correlation dominates.
    """
    if kind not in ("sinusoidal", "piecewise_linear", "mixed"):
        raise InputError(f"unknown synthetic kind {kind!r}")
    rng = np.random.default_rng(seed)
    t = np.arange(n_frames, dtype=np.float64) / fps
    k = cfg.k
    frames = np.zeros((n_frames, k))

    if correlated:
        column_groups = cfg.group_slices(ScaleId.S1)
    else:
        column_groups = [[j * cfg.dims_per_joint + c for c in range(cfg.dims_per_joint)]
                         for j in range(cfg.n_joints)]

    for cols in column_groups:
        base = np.zeros(n_frames)
        if kind in ("sinusoidal", "mixed"):
            freq = rng.uniform(*freq_range)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            base = base + np.sin(2.0 * np.pi * freq * t + phase)
        if kind in ("piecewise_linear", "mixed"):
            base = base + _piecewise(rng, n_frames)
        for col in cols:
            amp = rng.uniform(*amp_range)
            if correlated:
                jitter = 0.05 * np.sin(2.0 * np.pi * rng.uniform(0.05, 0.3) * t
                                       + rng.uniform(0.0, 2.0 * np.pi))
                frames[:, col] = amp * base + jitter
            else:
                if kind in ("sinusoidal", "mixed"):
                    phase = rng.uniform(0.0, 2.0 * np.pi)
                    freq = rng.uniform(*freq_range)
                    own = np.sin(2.0 * np.pi * freq * t + phase)
                    if kind == "mixed":
                        own = own + _piecewise(rng, n_frames)
                else:
                    own = _piecewise(rng, n_frames)
                frames[:, col] = amp * own
    rep = "position3d" if cfg.dims_per_joint == 3 else "angle"
    return MotionSequence(frames, fps=fps, representation=rep,
                          action=action or f"synthetic_{kind}")


def _piecewise(rng: np.random.Generator, n_frames: int) -> np.ndarray:
    n_knots = max(2, n_frames // 8)
    inner = np.sort(rng.uniform(0, n_frames - 1, size=max(0, n_knots - 2)))
    knots_t = np.concatenate([[0.0], inner, [float(n_frames - 1)]])
    knots_v = rng.uniform(-1.0, 1.0, size=knots_t.size)
    return np.interp(np.arange(n_frames, dtype=np.float64), knots_t, knots_v)


def synth_corpus(cfg: SkeletonConfig, n_sequences: int, n_frames: int, kind: str,
                 seed: int, fps: int = 25, correlated: bool = False,
                 freq_range: tuple[float, float] = (0.2, 2.0),
                 action: str | None = None) -> list[MotionSequence]:
    children = np.random.SeedSequence(seed).spawn(n_sequences)
    return [synth_motion(cfg, kind, n_frames, seed=child, fps=fps, correlated=correlated,
                         freq_range=freq_range, action=action)
            for child in children]
