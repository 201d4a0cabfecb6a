"""Residual cascade of warp + basis + ridge blocks.

Block ``l`` is fitted to the residual left by blocks ``1..l-1``; the model
prediction is the plain sum of block outputs. Inside a block only the warp
weights (and optionally the frequencies) are trained by Adam; the output
coefficients always come from the ridge solve.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import DEFAULT_K, FrequencyBank, basis_features, init_frequencies
from .rng import stream
from .solver import ridge_solve_retry
from .warp import HIDDEN, WarpParams, init_warp, warp_forward


@dataclass(frozen=True)
class TrainConfig:
    freq_schedule: tuple = (5.0, 15.0, 30.0)
    iters_per_block: int = 2000
    learning_rate: float = 1e-2
    lam: float = 1e-5
    K: int = DEFAULT_K
    train_freqs: bool = False
    ablate_warp: bool = False
    batch_size: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "freq_schedule", tuple(float(f) for f in self.freq_schedule))
        if not self.freq_schedule or min(self.freq_schedule) <= 0:
            raise ValueError("freq_schedule must be a non-empty list of positive scales")
        if self.iters_per_block < 0:
            raise ValueError("iters_per_block must be >= 0")
        if not (self.learning_rate > 0 and self.lam > 0):
            raise ValueError("learning_rate and lam must be positive")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")


@dataclass(frozen=True)
class Block:
    warp: WarpParams
    bank: FrequencyBank
    w: np.ndarray
    lam: float

    def __post_init__(self):
        if len(self.w) != self.bank.width:
            raise ValueError(f"w has length {len(self.w)}, expected {self.bank.width}")


@dataclass(frozen=True)
class CascadeModel:
    in_dim: int
    blocks: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        for b in self.blocks:
            if b.warp.in_dim != self.in_dim:
                raise ValueError("all blocks must share the model's in_dim")

    def add(self, block: Block) -> "CascadeModel":
        return CascadeModel(self.in_dim, self.blocks + (block,))


class BlockTrainingError(RuntimeError):
    def __init__(self, block_index: int, cause: Exception):
        self.block_index = block_index
        super().__init__(f"block {block_index} failed: {cause}")


# --------------------------------------------------------------------------
# Adam


@dataclass(frozen=True)
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, 0)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    t = state.t + 1
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m = beta1 * state.m[k] + (1.0 - beta1) * g
        v = beta2 * state.v[k] + (1.0 - beta2) * (g * g)
        new_p[k] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        new_m[k], new_v[k] = m, v
    return new_p, AdamState(new_m, new_v, t)


# --------------------------------------------------------------------------
# forward


def block_features(warp: WarpParams, bank: FrequencyBank, X) -> np.ndarray:
    return basis_features(bank, warp_forward(warp, X))


def block_forward(block: Block, X) -> np.ndarray:
    return block_features(block.warp, block.bank, X) @ block.w


def predict(model: CascadeModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.in_dim:
        raise ValueError(f"expected X of shape (N, {model.in_dim}), got {X.shape}")
    out = np.zeros(X.shape[0])
    for block in model.blocks:
        out += block_forward(block, X)
    return out


def count_params(model_or_cfg, in_dim: Optional[int] = None) -> int:
    """Warp weights + 2K frequency reals + 4K coefficients, summed over blocks."""
    if isinstance(model_or_cfg, CascadeModel):
        return sum(b.warp.size + 2 * b.bank.K + b.bank.width for b in model_or_cfg.blocks)
    if in_dim is None:
        raise ValueError("in_dim is required when counting from a TrainConfig")
    cfg = model_or_cfg
    per_block = in_dim * HIDDEN + HIDDEN + HIDDEN * 2 + 2 * cfg.K + 4 * cfg.K
    return per_block * len(cfg.freq_schedule)


# --------------------------------------------------------------------------
# training


def block_seed(seed: int, block_index: int) -> int:
    return int(np.random.SeedSequence([seed & 0xFFFFFFFF, block_index]).generate_state(1)[0])


def loss_and_grads(params: dict, X, y, lam: float):
    """Ridge-fit loss of one block and its gradient w.r.t. ``params``.

    ``params`` holds ``W``, ``b``, ``W_out``, ``omega_re``, ``omega_im``.
    Returns ``(loss, grads, lam_used)``.

    This is the composition warp -> basis -> fit_loss_grad -> basis_backward
    -> warp_backward, fused so that the N x 4K upstream gradient is never
    formed: it equals ``alpha w^T - r u^T`` with ``alpha = 2r/N - Phi u``,
    and every pullback through the basis only needs its two factors.
    """
    W, b, W_out = params["W"], params["b"], params["W_out"]
    om_re, om_im = params["omega_re"], params["omega_im"]
    K = len(om_re)
    n, d = X.shape

    pre = X @ W + b
    h = np.sin(pre)
    uv = h @ W_out
    if d >= 2:
        z_re, z_im = X[:, 0] + uv[:, 0], X[:, 1] + uv[:, 1]
    else:
        z_re, z_im = uv[:, 0], uv[:, 1]
    a = np.outer(z_re, om_re)
    a += np.outer(z_im, om_im)
    s, c = np.sin(a), np.cos(a)
    m = np.hypot(z_re, z_im)
    Phi = np.empty((n, 4 * K))
    Phi[:, :K] = s
    Phi[:, K:2 * K] = c
    np.multiply(s, m[:, None], out=Phi[:, 2 * K:3 * K])
    np.multiply(c, m[:, None], out=Phi[:, 3 * K:])

    sol = ridge_solve_retry(Phi, y, lam)
    r = sol.residual
    loss = float(r @ r) / n
    u = sol.solve((2.0 / n) * (Phi.T @ r))
    alpha = (2.0 / n) * r - Phi @ u
    w = sol.w

    # columns of the rank-2 upstream, split by feature block
    L = np.column_stack([alpha, -r, m * alpha, -m * r])
    coef_sin = np.stack([w[:K], u[:K], w[2 * K:3 * K], u[2 * K:3 * K]])
    coef_cos = np.stack([w[K:2 * K], u[K:2 * K], w[3 * K:], u[3 * K:]])
    g_a = (L @ coef_sin) * c
    g_a -= (L @ coef_cos) * s
    g_m = (alpha * (s @ w[2 * K:3 * K] + c @ w[3 * K:])
           - r * (s @ u[2 * K:3 * K] + c @ u[3 * K:]))

    with np.errstate(invalid="ignore", divide="ignore"):
        g_m_over = np.where(m > 0, g_m / m, 0.0)
    g_re = g_a @ om_re + g_m_over * z_re
    g_im = g_a @ om_im + g_m_over * z_im

    G = np.column_stack([g_re, g_im])
    d_pre = (G @ W_out.T) * np.cos(pre)
    grads = {"W": X.T @ d_pre, "b": d_pre.sum(axis=0), "W_out": h.T @ G,
             "omega_re": z_re @ g_a, "omega_im": z_im @ g_a}
    return loss, grads, sol.lam


def train_block(X, r, cfg: TrainConfig, block_index: int,
                trace: Optional[list] = None) -> Block:
    """Fit block ``block_index`` (1-based) to the residual targets ``r``.

    Each Adam step solves the ridge problem on the current features and
    back-propagates the fit loss into the warp. ``trace``, if given,
    receives one training loss per iteration plus the final loss.
    """
    X = np.asarray(X, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if not 1 <= block_index <= len(cfg.freq_schedule):
        raise ValueError(f"block_index must be in [1, {len(cfg.freq_schedule)}]")
    seed = block_seed(cfg.seed, block_index)
    warp = init_warp(seed, X.shape[1], is_first=(block_index == 1))
    bank = init_frequencies(seed, cfg.K, cfg.freq_schedule[block_index - 1])

    trainable = [] if cfg.ablate_warp else ["W", "b", "W_out"]
    if cfg.train_freqs:
        trainable += ["omega_re", "omega_im"]
    fixed = {**warp.arrays(), "omega_re": bank.omega_re, "omega_im": bank.omega_im}
    params = {k: fixed[k] for k in trainable}
    state = AdamState.zeros_like(params)
    batch_rng = stream(seed, "batch")
    n = X.shape[0]
    iters = cfg.iters_per_block if trainable else 0

    for it in range(iters):
        if cfg.batch_size is not None and cfg.batch_size < n:
            idx = batch_rng.choice(n, cfg.batch_size, replace=False)
            Xb, rb = X[idx], r[idx]
        else:
            Xb, rb = X, r
        loss, grads, _ = loss_and_grads({**fixed, **params}, Xb, rb, cfg.lam)
        if trace is not None:
            trace.append(loss)
        params, state = adam_step(params, {k: grads[k] for k in trainable}, state,
                                  cfg.learning_rate)

    final = {**fixed, **params}
    warp = WarpParams(final["W"], final["b"], final["W_out"], warp.scale)
    bank = FrequencyBank(final["omega_re"], final["omega_im"])
    sol = ridge_solve_retry(block_features(warp, bank, X), r, cfg.lam)
    if trace is not None:
        trace.append(float(sol.residual @ sol.residual) / n)
    return Block(warp, bank, sol.w, sol.lam)


def fit(X, y, cfg: TrainConfig, traces: Optional[list] = None) -> CascadeModel:
    """Grow the cascade one block per entry of ``cfg.freq_schedule``.

    ``traces``, if given, receives one loss list per block.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"inconsistent shapes X{X.shape}, y{y.shape}")
    model = CascadeModel(X.shape[1])
    for l in range(1, len(cfg.freq_schedule) + 1):
        resid = y - predict(model, X)
        trace = [] if traces is not None else None
        try:
            block = train_block(X, resid, cfg, l, trace)
        except Exception as exc:
            raise BlockTrainingError(l, exc) from exc
        if traces is not None:
            traces.append(trace)
        model = model.add(block)
    return model
