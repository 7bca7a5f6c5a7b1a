"""Central finite-difference gradient checks."""
from __future__ import annotations

import numpy as np

from .tensor import backward, no_grad


def _coordinates(size, max_entries, rng):
    if max_entries is None or size <= max_entries:
        return np.arange(size)
    return np.sort(rng.choice(size, size=max_entries, replace=False))


def numeric_gradient(fn, tensors, step=1e-5, max_entries=None, seed=0):
    """Central differences of scalar ``fn()`` w.r.t. each tensor.

    With ``max_entries`` only that many randomly chosen coordinates per tensor
    are perturbed; the others are left as NaN.
    """
    rng = np.random.default_rng(seed)
    grads = []
    with no_grad():
        for t in tensors:
            g = np.full(t.data.shape, np.nan)
            flat, gflat = t.data.reshape(-1), g.reshape(-1)
            for k in _coordinates(flat.size, max_entries, rng):
                orig = flat[k]
                flat[k] = orig + step
                hi = float(fn().data)
                flat[k] = orig - step
                lo = float(fn().data)
                flat[k] = orig
                gflat[k] = (hi - lo) / (2.0 * step)
            grads.append(g)
    return grads


def max_relative_error(fn, tensors, step=1e-5, max_entries=None, seed=0):
    """Largest deviation between tape and finite-difference gradients.

    The absolute deviation is divided by the largest gradient magnitude over
    all checked tensors.  Parameters whose true gradient vanishes (a bias
    feeding a normalization that removes it) would otherwise be judged on
    rounding noise alone.
    """
    for t in tensors:
        t.requires_grad = True
        t.grad = None
    backward(fn())
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad for t in tensors]
    numeric = numeric_gradient(fn, tensors, step, max_entries, seed)
    scale = max([float(np.abs(g).max()) for g in analytic if g.size] +
                [float(np.nanmax(np.abs(n))) for n in numeric if n.size and not np.all(np.isnan(n))] + [1e-12])
    diff = 0.0
    for a, n in zip(analytic, numeric):
        checked = ~np.isnan(n)
        if checked.any():
            diff = max(diff, float(np.abs(a[checked] - n[checked]).max()))
    return diff / scale
