"""Embedded verification suite behind the ``selfcheck`` CLI command.

Four checks: codec roundtrip, finite-difference gradient agreement on the
toy skeleton, attention-row normalization, and the zero-init identity.
``inject_fault`` deliberately breaks the softmax normalization so the
attention check can demonstrate a failure (negative control).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as model_module
from .autodiff import Tensor, exp, no_grad
from .data import Window, synth_motion
from .dct import DctConfig, dct_decode, dct_encode, pad_replicate
from .gradcheck import check_gradients
from .model import MGCN, ModelConfig
from .skeleton import builtin_skeleton
from .training import _check_attention, make_loss, window_loss

FAULTS = ("none", "softmax-skip")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _tiny_setup(seed: int):
    skeleton = builtin_skeleton("stick6")
    config = ModelConfig(n_coeffs=6, feature_width=8, stm_hidden=8, csb_hidden=8,
                         csb_proj=4, sim_stack=1, gcn_blocks=1, init_seed=seed)
    model = MGCN(skeleton, config)
    seq = synth_motion(skeleton, "sinusoidal", n_frames=6, seed=seed)
    window = Window(history=seq.frames[:4], future=seq.frames[4:], action=seq.action)
    dct_cfg = DctConfig(4, 2, config.n_coeffs)
    return skeleton, model, window, dct_cfg


def check_dct_roundtrip(seed: int = 0, tol: float = 1e-9) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        length = int(rng.integers(2, 40))
        x = rng.uniform(-2, 2, size=(length, int(rng.integers(1, 8))))
        cfg = DctConfig(length, 0)
        back = dct_decode(dct_encode(x, cfg), length)
        worst = max(worst, float(np.max(np.abs(back - x))))
    return CheckResult("dct_roundtrip", worst < tol, f"max abs error {worst:.3e}")


def check_gradients_stick6(seed: int = 0, tol: float = 1e-3,
                           max_entries_per_param: int = 8) -> CheckResult:
    _, model, window, dct_cfg = _tiny_setup(seed)
    loss_fn = make_loss("position_mpjpe", dims=3)

    def loss_builder():
        return window_loss(model, window, dct_cfg, loss_fn)

    report = check_gradients(loss_builder, model.named_parameters(), eps=1e-5,
                             max_entries_per_param=max_entries_per_param, seed=seed)
    detail = (f"max rel error {report.max_rel_error:.3e} over {report.entries_checked} "
              f"entries (worst: {report.worst_param})")
    return CheckResult("gradient_check", report.ok(tol), detail)


def check_attention_normalized(seed: int = 0, fault: str = "none") -> CheckResult:
    _, model, window, dct_cfg = _tiny_setup(seed)
    saved = model_module.softmax_rows
    if fault == "softmax-skip":
        model_module.softmax_rows = lambda x: exp(x)
    try:
        with no_grad():
            coeffs = dct_encode(pad_replicate(window.history, dct_cfg.n_future), dct_cfg)
            model.forward(Tensor(coeffs))
        checked = _check_attention(model)
        return CheckResult("attention_normalized", True,
                           f"{checked} attention maps normalized")
    except Exception as err:  # the check is expected to throw under the fault
        return CheckResult("attention_normalized", False, str(err))
    finally:
        model_module.softmax_rows = saved


def check_zero_init_identity(seed: int = 0, tol: float = 1e-9) -> CheckResult:
    _, model, window, dct_cfg = _tiny_setup(seed)
    padded = pad_replicate(window.history, dct_cfg.n_future)
    coeffs = dct_encode(padded, dct_cfg)
    with no_grad():
        pred = model.forward(Tensor(coeffs))
    coeff_err = float(np.max(np.abs(pred.data - coeffs)))
    decoded = dct_decode(pred.data, dct_cfg.length)
    frame_err = float(np.max(np.abs(decoded - padded)))
    ok = coeff_err <= tol and frame_err <= tol
    return CheckResult("zero_init_identity", ok,
                       f"coeff residual {coeff_err:.3e}, frame residual {frame_err:.3e}")


def run_selfcheck(seed: int = 0, inject_fault: str = "none") -> list[CheckResult]:
    if inject_fault not in FAULTS:
        raise ValueError(f"unknown fault {inject_fault!r}; choices: {FAULTS}")
    return [
        check_dct_roundtrip(seed),
        check_gradients_stick6(seed),
        check_attention_normalized(seed, fault=inject_fault),
        check_zero_init_identity(seed),
    ]
