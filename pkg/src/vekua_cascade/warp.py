"""Residual sine-MLP coordinate warp from R^d into the complex plane.

    h  = sin(X W + b)
    uv = h W_out
    z  = (x1 + uv_0) + i (x2 + uv_1)     for d >= 2
    z  = uv_0 + i uv_1                   for d == 1

Only the first two coordinates get the identity shortcut; any further
coordinates (time, in the space-time task) reach ``z`` through the MLP.
"""

from dataclasses import dataclass

import numpy as np

from .rng import stream

HIDDEN = 32
FIRST_BLOCK_SCALE = 1e-5
LATER_BLOCK_SCALE = 0.1


@dataclass(frozen=True)
class WarpParams:
    W: np.ndarray  # (in_dim, 32)
    b: np.ndarray  # (32,)
    W_out: np.ndarray  # (32, 2)
    scale: float = LATER_BLOCK_SCALE

    @property
    def in_dim(self) -> int:
        return self.W.shape[0]

    def arrays(self) -> dict:
        return {"W": self.W, "b": self.b, "W_out": self.W_out}

    def replace(self, **arrays) -> "WarpParams":
        cur = self.arrays()
        cur.update(arrays)
        return WarpParams(cur["W"], cur["b"], cur["W_out"], self.scale)

    @property
    def size(self) -> int:
        return self.W.size + self.b.size + self.W_out.size


@dataclass(frozen=True)
class LatentPoints:
    z_re: np.ndarray
    z_im: np.ndarray

    def __len__(self):
        return len(self.z_re)

    @property
    def complex(self) -> np.ndarray:
        return self.z_re + 1j * self.z_im


def init_warp(seed: int, in_dim: int, is_first: bool) -> WarpParams:
    """Draw warp weights; near-identity for the first cascade block.

    ``W`` is filled row-major from the stream first, then ``W_out``.
    """
    if in_dim < 1:
        raise ValueError(f"in_dim must be >= 1, got {in_dim}")
    scale = FIRST_BLOCK_SCALE if is_first else LATER_BLOCK_SCALE
    rng = stream(seed, "warp")
    W = rng.standard_normal((in_dim, HIDDEN)) * scale
    W_out = rng.standard_normal((HIDDEN, 2)) * scale
    return WarpParams(W, np.zeros(HIDDEN), W_out, scale)


def _check_input(p: WarpParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != p.in_dim:
        raise ValueError(f"expected X of shape (N, {p.in_dim}), got {X.shape}")
    return X


def warp_forward(p: WarpParams, X: np.ndarray) -> LatentPoints:
    X = _check_input(p, X)
    uv = np.sin(X @ p.W + p.b) @ p.W_out
    if X.shape[1] >= 2:
        return LatentPoints(X[:, 0] + uv[:, 0], X[:, 1] + uv[:, 1])
    return LatentPoints(uv[:, 0].copy(), uv[:, 1].copy())


def warp_backward(p: WarpParams, X: np.ndarray, g_re: np.ndarray, g_im: np.ndarray) -> dict:
    """Gradients of a scalar loss w.r.t. ``W``, ``b``, ``W_out``.

    ``g_re``/``g_im`` are the loss gradients w.r.t. ``z_re``/``z_im``. The
    identity shortcut has no parameters, so it contributes nothing here.
    """
    X = _check_input(p, X)
    g_re = np.asarray(g_re, dtype=np.float64)
    g_im = np.asarray(g_im, dtype=np.float64)
    if g_re.shape != (X.shape[0],) or g_im.shape != (X.shape[0],):
        raise ValueError("upstream gradient must have one entry per point")
    pre = X @ p.W + p.b
    h = np.sin(pre)
    G = np.column_stack([g_re, g_im])
    d_pre = (G @ p.W_out.T) * np.cos(pre)
    return {"W": X.T @ d_pre, "b": d_pre.sum(axis=0), "W_out": h.T @ G}
