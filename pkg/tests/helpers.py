import numpy as np


def central_fd(f, x, h=1e-6):
    """Central-difference gradient of scalar ``f`` w.r.t. every entry of ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gf[i] = (fp - fm) / (2 * h)
    return g


def rel_err(analytic, numeric):
    """Largest entry error relative to the largest gradient entry."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    scale = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-300)
    return float(np.abs(analytic - numeric).max() / scale)
