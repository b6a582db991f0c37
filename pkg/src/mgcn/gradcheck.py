"""Central finite-difference gradient checking utilities.

Used by both the test suite and the ``selfcheck`` CLI command. The loss
builder is an argument-free callable returning a scalar Tensor; analytic
gradients come from one tape replay, numeric ones from perturbing each
parameter entry and re-running the builder with recording disabled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .autodiff import Tensor, no_grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Worst entrywise |a-n| / max(|a|, |n|, floor).

    The floor keeps near-zero gradients from inflating the ratio with
    finite-difference noise at the 1e-11 level.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / denom))


def finite_difference_grad(loss_fn: Callable[[], Tensor], param: Tensor, eps: float = 1e-5,
                           entries=None) -> np.ndarray:
    """Central-difference gradient of loss_fn wrt the given entries of param.

    Returns a flat array aligned with ``entries`` (all entries when None).
    The parameter is perturbed in place and restored afterwards.
    """
    flat = param.data.reshape(-1)
    if entries is None:
        entries = range(flat.size)
    grads = np.empty(len(entries) if hasattr(entries, "__len__") else flat.size)
    with no_grad():
        for out_i, i in enumerate(entries):
            saved = flat[i]
            flat[i] = saved + eps
            up = loss_fn().item()
            flat[i] = saved - eps
            down = loss_fn().item()
            flat[i] = saved
            grads[out_i] = (up - down) / (2.0 * eps)
    return grads


@dataclass
class GradCheckReport:
    max_rel_error: float
    entries_checked: int
    worst_param: str = ""
    per_param: dict[str, float] = field(default_factory=dict)

    def ok(self, tol: float) -> bool:
        return self.max_rel_error < tol


def check_gradients(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor],
                    eps: float = 1e-5, max_entries_per_param: int | None = None,
                    seed: int = 0, floor: float = 1e-6) -> GradCheckReport:
    """Compare analytic and central-difference gradients for every parameter.

    ``max_entries_per_param`` subsamples large parameters (deterministic
    under ``seed``); None checks every entry.
    """
    for p in params.values():
        p.grad = None
    loss = loss_fn()
    loss.backward()
    rng = np.random.default_rng(seed)

    report = GradCheckReport(max_rel_error=0.0, entries_checked=0)
    for name, p in params.items():
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        analytic = analytic.reshape(-1)
        n = p.data.size
        if max_entries_per_param is not None and n > max_entries_per_param:
            entries = np.sort(rng.choice(n, size=max_entries_per_param, replace=False))
        else:
            entries = np.arange(n)
        numeric = finite_difference_grad(loss_fn, p, eps=eps, entries=entries)
        err = max_relative_error(analytic[entries], numeric, floor=floor)
        report.per_param[name] = err
        report.entries_checked += len(entries)
        if err > report.max_rel_error:
            report.max_rel_error = err
            report.worst_param = name
    return report
