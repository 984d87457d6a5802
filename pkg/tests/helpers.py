"""Finite-difference oracle shared by the gradient tests."""
import numpy as np

H = 1e-5


def numeric_grad(f, p, h=H):
    """Central differences of scalar ``f()`` with respect to array ``p`` (perturbed in place)."""
    g = np.zeros_like(p)
    for i in np.ndindex(p.shape):
        old = p[i]
        p[i] = old + h
        fp = f()
        p[i] = old - h
        fm = f()
        p[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(analytic, numeric):
    """Largest absolute discrepancy relative to the largest numeric entry of the group."""
    return float(np.abs(analytic - numeric).max() / max(np.abs(numeric).max(), 1e-8))
