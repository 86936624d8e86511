"""Gaussian tail function and its inverse."""

import math

import numpy as np
from scipy.special import erfc, log_ndtr

__all__ = ["q_function", "q_inverse", "single_bit_bound", "critical_load"]


def q_function(x):
    """``Q(x) = P(Z > x)`` for standard normal ``Z``."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def q_inverse(p, tol=1e-12, max_iter=100):
    """Solve ``Q(x) = p`` by Newton iteration on ``log Q``."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"q_inverse needs p in (0, 1), got {p}")
    if p > 0.5:
        return -q_inverse(1.0 - p, tol, max_iter)
    # tail-asymptotic starting point, exact at p = 0.5
    x = math.sqrt(max(0.0, -2.0 * math.log(2.0 * p)))
    target = math.log(p)
    for _ in range(max_iter):
        logq = float(log_ndtr(-x))
        # d/dx log Q(x) = -phi(x) / Q(x)
        slope = -math.exp(-0.5 * x * x - 0.5 * math.log(2.0 * math.pi) - logq)
        step = (logq - target) / slope
        x -= step
        if abs(step) <= tol * max(1.0, abs(x)):
            return x
    raise RuntimeError(f"q_inverse({p}) did not converge")


def single_bit_bound(A, sigma):
    """BER of a lone BPSK bit of amplitude ``A``: ``Q(A / sigma)``; zero when ``sigma == 0``."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return 0.0
    return q_function(A / sigma)


def critical_load():
    """Load below which every LML detector has unit AME: ``1/2 - 1/(4 ln 2)``."""
    return 0.5 - 1.0 / (4.0 * math.log(2.0))
