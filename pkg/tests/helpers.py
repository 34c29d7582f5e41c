"""Finite-difference oracle shared by the gradient tests."""

import numpy as np

FD_STEP = 1e-5
# entries whose true gradient is below this magnitude are compared absolutely
REL_FLOOR = 1e-6


def central_difference(loss_fn, param, step=FD_STEP):
    """d loss / d param by central differences, perturbing ``param.data`` in place."""
    grad = np.zeros(param.shape)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = loss_fn()
        flat[i] = orig - step
        down = loss_fn()
        flat[i] = orig
        out[i] = (up - down) / (2 * step)
    return grad


def relative_error(analytic, numeric):
    a = np.asarray(analytic).reshape(-1)
    n = np.asarray(numeric).reshape(-1)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), REL_FLOOR)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def max_gradient_error(params, forward_loss):
    """Run one analytic backward, then compare every parameter against FD.

    ``forward_loss()`` must build a fresh graph and return a scalar Tensor.
    Returns ``{name: relative error}``.
    """
    for p in params.values():
        p.grad = None
    forward_loss().backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros(p.shape)) for k, p in params.items()}
    errors = {}
    for k, p in params.items():
        numeric = central_difference(lambda: float(forward_loss().data), p)
        errors[k] = relative_error(analytic[k], numeric)
    return errors
