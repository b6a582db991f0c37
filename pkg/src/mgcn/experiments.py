"""Synthetic-data experiment presets shared by the acceptance suite and the
runnable scripts.

Two studies:

* overfit: a handful of group-correlated sequences memorized in a few
  hundred steps; success is the trained future error collapsing far below
  the hold-last-frame baseline.
* generalization: disjoint train/test windows (one window per generated
  sequence) with observation noise; the full model and its three ablated
  variants train under identical budgets and are compared on the test
  horizon error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import MotionSequence, WindowedDataset, make_windows, synth_corpus
from .model import MGCN, ModelConfig
from .skeleton import SkeletonConfig, builtin_skeleton
from .training import (TrainConfig, TrainResult, evaluate, mean_joint_distance,
                       predict_future, train, zero_velocity_baseline)

VARIANTS = {
    "full": {},
    "no_stm": {"no_stm_mean_pool": True},
    "no_csb": {"no_csb": True},
    "parallel_decoder": {"parallel_decoder": True},
}

N_HISTORY = 10
N_FUTURE = 10


def _model_config(skeleton: SkeletonConfig, seed: int, width: int,
                  sim_stack: int, **ablate) -> ModelConfig:
    return ModelConfig(n_coeffs=N_HISTORY + N_FUTURE, feature_width=width,
                       stm_hidden=16, csb_hidden=width, csb_proj=16,
                       sim_stack=sim_stack, gcn_blocks=2, init_seed=seed, **ablate)


# -- overfit study -------------------------------------------------------------


@dataclass
class OverfitOutcome:
    result: TrainResult
    model_error: float
    baseline_error: float
    checkpoint_arrays: dict[str, np.ndarray]

    @property
    def ratio(self) -> float:
        return self.model_error / self.baseline_error


def overfit_dataset(seed: int = 42, n_sequences: int = 8) -> WindowedDataset:
    skeleton = builtin_skeleton("stick6")
    seqs = synth_corpus(skeleton, n_sequences, N_HISTORY + N_FUTURE, "sinusoidal",
                        seed=seed, correlated=True)
    return make_windows(seqs, N_HISTORY, N_FUTURE)


def future_error(model: MGCN, dataset: WindowedDataset) -> float:
    """Mean per-joint distance over the predicted future frames."""
    errors = [mean_joint_distance(predict_future(model, w.history, N_FUTURE), w.future)
              for w in dataset.windows]
    return float(np.mean(errors))


def baseline_future_error(dataset: WindowedDataset) -> float:
    errors = [mean_joint_distance(zero_velocity_baseline(w.history, N_FUTURE), w.future)
              for w in dataset.windows]
    return float(np.mean(errors))


def run_overfit(seed: int = 0, max_steps: int = 500, data_seed: int = 42) -> OverfitOutcome:
    skeleton = builtin_skeleton("stick6")
    dataset = overfit_dataset(seed=data_seed)
    model = MGCN(skeleton, _model_config(skeleton, seed, width=64, sim_stack=1))
    cfg = TrainConfig(epochs=max_steps, batch_size=len(dataset.windows), lr=2e-3,
                      lr_decay_every=50, n_history=N_HISTORY, n_future=N_FUTURE,
                      seed=seed, attention_check=True)
    result = train(model, dataset, cfg, max_steps=max_steps)
    arrays = {name: p.data.copy() for name, p in model.named_parameters().items()}
    return OverfitOutcome(result=result, model_error=future_error(model, dataset),
                          baseline_error=baseline_future_error(dataset),
                          checkpoint_arrays=arrays)


# -- generalization / ablation study ----------------------------------------------


def generalization_data(skeleton: SkeletonConfig, n_train: int = 200, n_test: int = 50,
                        train_seed: int = 100, test_seed: int = 5000
                        ) -> tuple[WindowedDataset, WindowedDataset]:
    """Disjoint sinusoidal train/test windows, one window per sequence.

    Drawing every window from its own sequence keeps the 200/50 windows
    statistically independent; windows sliced out of a handful of long
    sequences would be near-duplicates of each other.
    """
    length = N_HISTORY + N_FUTURE
    train_seqs = synth_corpus(skeleton, n_train, length, "sinusoidal",
                              seed=train_seed, correlated=True)
    test_seqs = synth_corpus(skeleton, n_test, length, "sinusoidal",
                             seed=test_seed, correlated=True)
    return (make_windows(train_seqs, N_HISTORY, N_FUTURE, split="train"),
            make_windows(test_seqs, N_HISTORY, N_FUTURE, split="test"))


@dataclass
class GeneralizationOutcome:
    variant: str
    seed: int
    test_error: float
    baseline_error: float
    horizon_errors: list[float] = field(default_factory=list)
    train_result: TrainResult = field(repr=False, default=None)


def run_generalization(train_set: WindowedDataset, test_set: WindowedDataset,
                       variant: str = "full", seed: int = 0, max_steps: int = 2000,
                       width: int = 32, sim_stack: int = 1,
                       skeleton: SkeletonConfig | None = None) -> GeneralizationOutcome:
    """Train one variant and score it at the 400 ms (10-frame) horizon.

    Gradient clipping is off here: a global-norm cap binds harder on the
    variants with more parameters and would skew the comparison.
    """
    skeleton = skeleton or builtin_skeleton("stick6")
    model = MGCN(skeleton, _model_config(skeleton, seed, width=width,
                                         sim_stack=sim_stack, **VARIANTS[variant]))
    cfg = TrainConfig(epochs=10 ** 9, batch_size=16, lr=2e-3, lr_decay_every=20,
                      n_history=N_HISTORY, n_future=N_FUTURE, seed=seed,
                      grad_clip=None)
    result = train(model, train_set, cfg, max_steps=max_steps)
    report = evaluate(model, test_set, [80, 160, 320, 400])
    return GeneralizationOutcome(variant=variant, seed=seed,
                                 test_error=report.average["model"][-1],
                                 baseline_error=report.average["baseline"][-1],
                                 horizon_errors=list(report.average["model"]),
                                 train_result=result)
