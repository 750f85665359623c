"""Central finite differences, used as an independent check on analytic derivatives."""
from __future__ import annotations

import numpy as np


def central_gradient(f, x, step=1e-6) -> np.ndarray:
    """Gradient of scalar ``f``; ``step`` may be a scalar or one value per coordinate."""
    x = np.asarray(x, dtype=float)
    step = np.broadcast_to(np.asarray(step, dtype=float), x.shape)
    g = np.empty_like(x)
    a = x.copy()
    for i in range(len(x)):
        a[i] = x[i] + step[i]
        fp = f(a)
        a[i] = x[i] - step[i]
        fm = f(a)
        a[i] = x[i]
        g[i] = (fp - fm) / (2 * step[i])
    return g


def central_jacobian(f, x, step=1e-6) -> np.ndarray:
    """Jacobian of a vector field ``f: R^n -> R^m``, shape ``(m, n)``."""
    x = np.asarray(x, dtype=float)
    step = np.broadcast_to(np.asarray(step, dtype=float), x.shape)
    a = x.copy()
    cols = []
    for i in range(len(x)):
        a[i] = x[i] + step[i]
        fp = np.asarray(f(a), dtype=float)
        a[i] = x[i] - step[i]
        fm = np.asarray(f(a), dtype=float)
        a[i] = x[i]
        cols.append((fp - fm) / (2 * step[i]))
    return np.stack(cols, axis=1)


def max_relative_error(approx, exact, floor: float = 1.0) -> float:
    """``max |approx - exact| / max(|exact|, floor)``, elementwise."""
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    return float(np.max(np.abs(approx - exact) / np.maximum(np.abs(exact), floor)))
