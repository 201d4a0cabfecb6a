"""Benchmark fields A-E, the MSE metric, and diffusion-coefficient recovery.

    A  noisy Helmholtz-type wave field on [-1, 1]^2
    B  Shepp-Logan phantom sampled at 2% of the pixels
    C  manufactured 1-D diffusion problem, -(k u')' = f
    D  noisy chirp sin(30 x^2) on [0, 1]
    E  Taylor-Green x-velocity over (x, y, t), rescaled to [-1, 1]^3
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .rng import stream

TASK_IDS = ("A", "B", "C", "D", "E")


@dataclass
class TaskData:
    task_id: str
    X_train: np.ndarray
    y_train: np.ndarray
    X_eval: np.ndarray
    y_eval_clean: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def in_dim(self) -> int:
        return self.X_train.shape[1]


def mse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.size == 0 or truth.size == 0:
        raise ValueError("mse of empty input")
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} vs {truth.size}")
    d = pred - truth
    return float(d @ d) / d.size


def square_lattice(n: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    """``n*n`` points, row-major with y varying slowest."""
    t = np.linspace(lo, hi, n)
    xx, yy = np.meshgrid(t, t, indexing="xy")
    return np.column_stack([xx.ravel(), yy.ravel()])


def _add_noise(seed, u, rel_sigma):
    sigma = rel_sigma * float(np.std(u))
    return u + sigma * stream(seed, "noise").standard_normal(u.shape), sigma


# --------------------------------------------------------------------------
# A: Helmholtz


def helmholtz_field(x, y):
    return np.sin(20 * x) * np.cos(20 * y) + 0.5 * np.sin(5 * x) * np.sin(5 * y)


def gen_helmholtz(seed: int, n_grid: int = 128) -> TaskData:
    if n_grid < 32:
        raise ValueError("n_grid must be >= 32")
    X = square_lattice(n_grid)
    u = helmholtz_field(X[:, 0], X[:, 1])
    y, sigma = _add_noise(seed, u, 0.1)
    return TaskData("A", X, y, X, u, {"noise_sigma": sigma, "n_grid": n_grid})


# --------------------------------------------------------------------------
# B: Shepp-Logan phantom

# Shepp & Logan (1974), IEEE Trans. Nucl. Sci. 21(3); also Kak &
# Slaney, "Principles of Computerized Tomographic Imaging", Table 3.1.
# Columns: x0, y0, semi-axis along x, semi-axis along y, rotation (deg), intensity.
SHEPP_LOGAN = np.array([
    [0.0, 0.0, 0.69, 0.92, 0.0, 2.0],
    [0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98],
    [0.22, 0.0, 0.11, 0.31, -18.0, -0.02],
    [-0.22, 0.0, 0.16, 0.41, 18.0, -0.02],
    [0.0, 0.35, 0.21, 0.25, 0.0, 0.01],
    [0.0, 0.1, 0.046, 0.046, 0.0, 0.01],
    [0.0, -0.1, 0.046, 0.046, 0.0, 0.01],
    [-0.08, -0.605, 0.046, 0.023, 0.0, 0.01],
    [0.0, -0.605, 0.023, 0.023, 0.0, 0.01],
    [0.06, -0.605, 0.023, 0.046, 0.0, 0.01],
])


def shepp_logan(x, y, table=SHEPP_LOGAN) -> np.ndarray:
    """Sum of intensities of all ellipses containing each point."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros(np.broadcast(x, y).shape)
    for x0, y0, a, b, deg, val in table:
        phi = np.deg2rad(deg)
        dx, dy = x - x0, y - y0
        xr = dx * np.cos(phi) + dy * np.sin(phi)
        yr = -dx * np.sin(phi) + dy * np.cos(phi)
        out += np.where((xr / a) ** 2 + (yr / b) ** 2 <= 1.0, val, 0.0)
    return out


def gen_phantom(seed: int, n_grid: int = 128, sample_frac: float = 0.02, K: int = 24) -> TaskData:
    if not 0 < sample_frac <= 1:
        raise ValueError("sample_frac must be in (0, 1]")
    X = square_lattice(n_grid)
    u = shepp_logan(X[:, 0], X[:, 1])
    n_samp = math.ceil(sample_frac * n_grid * n_grid)
    if n_samp < 4 * K:
        warnings.warn(f"only {n_samp} samples for {4 * K} basis columns", RuntimeWarning)
    idx = np.sort(stream(seed, "pixels").choice(len(X), n_samp, replace=False))
    return TaskData("B", X[idx], u[idx], X, u,
                    {"sample_frac": sample_frac, "n_grid": n_grid, "sample_index": idx})


# --------------------------------------------------------------------------
# C: inverse diffusion, manufactured solution


def diffusion_k(x):
    return 1.0 + 0.5 * np.sin(np.pi * x)


def diffusion_u(x):
    return x + 0.1 * np.sin(2 * np.pi * x)


def diffusion_du(x):
    return 1.0 + 0.2 * np.pi * np.cos(2 * np.pi * x)


def diffusion_f(x):
    """Forcing ``-(k u')'`` for the manufactured k and u."""
    dk = 0.5 * np.pi * np.cos(np.pi * x)
    d2u = -0.4 * np.pi ** 2 * np.sin(2 * np.pi * x)
    return -(dk * diffusion_du(x) + diffusion_k(x) * d2u)


def gen_inverse_diffusion(seed: int, n_pts: int = 512, n_eval: int = 4097) -> TaskData:
    if n_pts < 64:
        raise ValueError("n_pts must be >= 64")
    x = np.linspace(0.0, 1.0, n_pts)
    u = diffusion_u(x)
    y, sigma = _add_noise(seed, u, 0.01)
    xe = np.linspace(0.0, 1.0, n_eval)
    meta = {"noise_sigma": sigma, "k0": float(diffusion_k(0.0)),
            "f_eval": diffusion_f(xe), "k_eval": diffusion_k(xe)}
    return TaskData("C", x[:, None], y, xe[:, None], diffusion_u(xe), meta)


def central_diff(fn, x, h):
    """First and second central differences of ``fn`` on 1-D points."""
    fp = fn((x + h)[:, None])
    f0 = fn(x[:, None])
    fm = fn((x - h)[:, None])
    return (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)


def recover_diffusion(model, task: TaskData, h: float = 1e-4):
    """Recover k on the eval grid from a fitted model of u.

    The flux ``k u'`` at x equals ``k(0) u'(0) - int_0^x f``; dividing by the
    model's ``u'`` gives ``k_hat``. Returns ``(k_hat, pde_residual_rms)``
    where the residual ``k_hat' u' + k_hat u'' + f`` exercises the model's
    second derivative.

    ``model`` is a :class:`CascadeModel` or any callable ``X -> values``.
    """
    from .cascade import CascadeModel, predict

    fn = (lambda X: predict(model, X)) if isinstance(model, CascadeModel) else model
    x = task.X_eval[:, 0]
    f = task.meta["f_eval"]
    du, d2u = central_diff(fn, x, h)
    bad = np.flatnonzero(np.abs(du) < 1e-3)
    if bad.size:
        raise FloatingPointError(f"near-singular derivative u'={du[bad[0]]:.3g} at x={x[bad[0]]:.6g}")
    int_f = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(x))])
    k_hat = (task.meta["k0"] * du[0] - int_f) / du
    resid = np.gradient(k_hat, x, edge_order=2) * du + k_hat * d2u + f
    return k_hat, float(np.sqrt(np.mean(resid ** 2)))


# --------------------------------------------------------------------------
# D: chirp


def chirp(x):
    return np.sin(30 * x ** 2)


def gen_chirp(seed: int, n_pts: int = 2048) -> TaskData:
    if n_pts < 64:
        raise ValueError("n_pts must be >= 64")
    x = np.linspace(0.0, 1.0, n_pts)
    u = chirp(x)
    y, sigma = _add_noise(seed, u, 0.1)
    xe = np.linspace(0.0, 1.0, 2 * n_pts)
    return TaskData("D", x[:, None], y, xe[:, None], chirp(xe), {"noise_sigma": sigma})


# --------------------------------------------------------------------------
# E: Taylor-Green vortex


def tgv_u(x, y, t, nu=0.1):
    return np.cos(x) * np.sin(y) * np.exp(-2 * nu * t)


def gen_tgv(seed: int, n_grid_xy: int = 32, n_t: int = 8, viscosity: float = 0.1) -> TaskData:
    if n_grid_xy < 16 or n_t < 4:
        raise ValueError("need n_grid_xy >= 16 and n_t >= 4")
    s = np.linspace(0.0, 2 * np.pi, n_grid_xy)
    t = np.linspace(0.0, 1.0, n_t)
    tt, yy, xx = np.meshgrid(t, s, s, indexing="ij")
    phys = np.column_stack([xx.ravel(), yy.ravel(), tt.ravel()])
    u = tgv_u(phys[:, 0], phys[:, 1], phys[:, 2], viscosity)
    lo = np.array([0.0, 0.0, 0.0])
    hi = np.array([2 * np.pi, 2 * np.pi, 1.0])
    scale = 2.0 / (hi - lo)
    offset = -1.0 - lo * scale
    X = phys * scale + offset
    meta = {"viscosity": viscosity, "affine_scale": scale, "affine_offset": offset,
            "shape": (n_t, n_grid_xy, n_grid_xy)}
    return TaskData("E", X, u, X, u, meta)


def make_task(task_id: str, seed: int, **kwargs) -> TaskData:
    gens = {"A": gen_helmholtz, "B": gen_phantom, "C": gen_inverse_diffusion,
            "D": gen_chirp, "E": gen_tgv}
    if task_id not in gens:
        raise ValueError(f"unknown task {task_id!r}")
    return gens[task_id](seed, **kwargs)
