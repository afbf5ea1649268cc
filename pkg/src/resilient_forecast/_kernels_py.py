"""Pure numpy implementation of the training and inference kernels.

Same signatures as the compiled ``_kernels`` module. All arrays are float64
and C-contiguous; ``fit`` updates the parameter arrays in place.
"""

import numpy as np


def predict(w1, b1, w2, b2, x):
    """Network outputs for the rows of ``x`` (already input-standardized)."""
    h = 1.0 / (1.0 + np.exp(-(x @ w1.T + b1)))
    return h @ w2 + b2


def fit(w1, b1, w2, b2, x, z, weight, eta, max_epochs, tol):
    """Full-batch gradient descent on ``sum_k weight[k] * 0.5 * (out_k - z_k)**2``.

    ``b2`` is a length-1 array so it can be updated in place. Returns
    ``(trace, diverged_at)`` where ``trace[j]`` is the loss at the parameters
    entering epoch ``j`` and ``diverged_at`` is the failing epoch or -1.
    Stops early once the loss decrease between consecutive epochs is below
    ``tol``.
    """
    trace = np.empty(max_epochs)
    for j in range(max_epochs):
        h = 1.0 / (1.0 + np.exp(-(x @ w1.T + b1)))
        r = h @ w2 + b2[0] - z
        e = 0.5 * np.dot(weight, r * r)
        trace[j] = e
        if not np.isfinite(e):
            return trace[: j + 1], j
        d = weight * r
        dh = np.outer(d, w2) * h * (1.0 - h)
        w2 -= eta * (h.T @ d)
        b2[0] -= eta * d.sum()
        w1 -= eta * (dh.T @ x)
        b1 -= eta * dh.sum(axis=0)
        if j > 0 and trace[j - 1] - e < tol:
            return trace[: j + 1], -1
    return trace, -1
