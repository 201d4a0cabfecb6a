"""Vekua-Taylor feature bank on latent complex points.

For frequencies omega_k and latent points z, with a = Re(z * conj(omega_k))
and m = |z|, the feature matrix has 4K columns laid out as

    [ sin(a) | cos(a) | m sin(a) | m cos(a) ]

each block K wide.
"""

from dataclasses import dataclass

import numpy as np

from .rng import stream
from .warp import LatentPoints

DEFAULT_K = 24


@dataclass(frozen=True)
class FrequencyBank:
    omega_re: np.ndarray
    omega_im: np.ndarray

    @property
    def K(self) -> int:
        return len(self.omega_re)

    @property
    def width(self) -> int:
        return 4 * self.K

    @property
    def magnitudes(self) -> np.ndarray:
        return np.hypot(self.omega_re, self.omega_im)


def init_frequencies(seed: int, K: int = DEFAULT_K, freq_scale: float = 5.0) -> FrequencyBank:
    """Random frequencies with |omega| ~ U[s/2, 3s/2] and phase ~ U[0, 2pi).

    Magnitudes and phases come from separate streams.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if not freq_scale > 0:
        raise ValueError(f"freq_scale must be positive, got {freq_scale}")
    r = stream(seed, "freq-radius").uniform(freq_scale / 2, freq_scale * 1.5, K)
    theta = stream(seed, "freq-phase").uniform(0.0, 2 * np.pi, K)
    return FrequencyBank(r * np.cos(theta), r * np.sin(theta))


def _phase(bank: FrequencyBank, z: LatentPoints) -> np.ndarray:
    if np.shape(z.z_re) != np.shape(z.z_im) or np.ndim(z.z_re) != 1:
        raise ValueError("z_re and z_im must be 1-D of equal length")
    return np.outer(z.z_re, bank.omega_re) + np.outer(z.z_im, bank.omega_im)


def basis_features(bank: FrequencyBank, z: LatentPoints) -> np.ndarray:
    a = _phase(bank, z)
    s, c = np.sin(a), np.cos(a)
    m = np.hypot(z.z_re, z.z_im)[:, None]
    return np.concatenate([s, c, m * s, m * c], axis=1)


def basis_backward(bank: FrequencyBank, z: LatentPoints, upstream: np.ndarray,
                   with_freqs: bool = False):
    """Pull a gradient w.r.t. the feature matrix back to ``z`` (and omega).

    Returns ``(g_re, g_im)``, or ``(g_re, g_im, g_omega_re, g_omega_im)``
    when ``with_freqs`` is set. At ``|z| = 0`` the gradient of the
    magnitude is taken to be zero.
    """
    K = bank.K
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (len(z.z_re), 4 * K):
        raise ValueError(f"upstream shape {upstream.shape} != {(len(z.z_re), 4 * K)}")
    a = _phase(bank, z)
    s, c = np.sin(a), np.cos(a)
    m = np.hypot(z.z_re, z.z_im)
    Gs, Gc, Gms, Gmc = (upstream[:, i * K:(i + 1) * K] for i in range(4))

    Gsm = Gs + m[:, None] * Gms
    Gcm = Gc + m[:, None] * Gmc
    g_a = Gsm * c - Gcm * s
    g_m = np.sum(Gms * s + Gmc * c, axis=1)

    with np.errstate(invalid="ignore", divide="ignore"):
        dm_re = np.where(m > 0, z.z_re / m, 0.0)
        dm_im = np.where(m > 0, z.z_im / m, 0.0)
    g_re = g_a @ bank.omega_re + g_m * dm_re
    g_im = g_a @ bank.omega_im + g_m * dm_im
    if not with_freqs:
        return g_re, g_im
    return g_re, g_im, z.z_re @ g_a, z.z_im @ g_a
