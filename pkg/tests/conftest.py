import numpy as np
import pytest

from mgcn.autodiff import Tensor
from mgcn.gradcheck import finite_difference_grad, max_relative_error


def fd_gradients(build_loss, inputs, eps=1e-6, tol=1e-6):
    """Assert analytic == central-difference gradients for every input tensor.

    ``build_loss`` maps the given Tensors to a scalar Tensor; inputs must
    have requires_grad set.
    """
    for t in inputs:
        t.grad = None
    loss = build_loss()
    loss.backward()
    worst = 0.0
    for t in inputs:
        numeric = finite_difference_grad(lambda: build_loss(), t, eps=eps)
        analytic = (t.grad if t.grad is not None else np.zeros_like(t.data)).reshape(-1)
        worst = max(worst, max_relative_error(analytic, numeric))
    assert worst < tol, f"max relative gradient error {worst:.3e} >= {tol}"
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def rand_tensor(rng, shape, requires_grad=True, low=-2.0, high=2.0):
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=requires_grad)
