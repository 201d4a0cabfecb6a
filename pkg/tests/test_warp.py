import math

import numpy as np
import pytest

from vekua_cascade.warp import HIDDEN, LatentPoints, WarpParams, init_warp, warp_backward, warp_forward

from helpers import central_fd, rel_err


def zero_warp(d):
    return WarpParams(np.zeros((d, HIDDEN)), np.zeros(HIDDEN), np.zeros((HIDDEN, 2)))


def random_warp(seed, d, scale=0.5):
    rng = np.random.default_rng(seed)
    return WarpParams(rng.normal(0, scale, (d, HIDDEN)), rng.normal(0, scale, HIDDEN),
                      rng.normal(0, scale, (HIDDEN, 2)))


def test_first_block_init_is_tiny():
    p = init_warp(0, 2, is_first=True)
    assert np.abs(p.W).max() < 1e-3
    assert np.abs(p.W_out).max() < 1e-3
    assert np.all(p.b == 0.0)


def test_later_block_shapes():
    p = init_warp(0, 3, is_first=False)
    assert p.W.shape == (3, 32)
    assert p.W_out.shape == (32, 2)
    assert p.b.shape == (32,)
    # N(0, 0.1^2) draws
    assert 0.05 < p.W.std() < 0.15


def test_init_deterministic():
    a, b = init_warp(7, 2, False), init_warp(7, 2, False)
    for k in ("W", "b", "W_out"):
        assert np.array_equal(a.arrays()[k], b.arrays()[k])
    assert not np.array_equal(a.W, init_warp(8, 2, False).W)


def test_init_rejects_zero_dim():
    with pytest.raises(ValueError):
        init_warp(0, 0, True)


def test_zero_warp_is_identity_2d():
    z = warp_forward(zero_warp(2), np.array([[0.3, -0.7]]))
    assert z.z_re[0] == 0.3 and z.z_im[0] == -0.7


def test_zero_warp_1d_has_no_shortcut():
    z = warp_forward(zero_warp(1), np.array([[0.5]]))
    assert z.z_re[0] == 0.0 and z.z_im[0] == 0.0


@pytest.mark.parametrize("d", [1, 2, 3])
def test_forward_matches_scalar_loop(d):
    p = random_warp(3, d, scale=0.2)
    x = np.random.default_rng(4).uniform(-1, 1, d)
    uv = [0.0, 0.0]
    for j in range(HIDDEN):
        pre = sum(x[i] * p.W[i, j] for i in range(d)) + p.b[j]
        hj = math.sin(pre)
        uv[0] += hj * p.W_out[j, 0]
        uv[1] += hj * p.W_out[j, 1]
    if d >= 2:
        expect = (x[0] + uv[0], x[1] + uv[1])
    else:
        expect = (uv[0], uv[1])
    z = warp_forward(p, x[None, :])
    np.testing.assert_allclose([z.z_re[0], z.z_im[0]], expect, rtol=1e-14, atol=1e-15)


def test_forward_shape_error():
    with pytest.raises(ValueError):
        warp_forward(zero_warp(2), np.zeros((4, 3)))


def test_backward_zero_upstream():
    p = random_warp(1, 2)
    X = np.random.default_rng(0).uniform(-1, 1, (5, 2))
    g = warp_backward(p, X, np.zeros(5), np.zeros(5))
    assert all(np.all(v == 0) for v in g.values())


def test_backward_wout_zero_at_zero_weights():
    X = np.random.default_rng(0).uniform(-1, 1, (5, 2))
    g = warp_backward(zero_warp(2), X, np.ones(5), np.ones(5))
    assert np.all(g["W_out"] == 0)


@pytest.mark.parametrize("d,seed", [(1, 0), (2, 1), (2, 2), (3, 3)])
def test_backward_matches_finite_differences(d, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (5, d))
    g_re, g_im = rng.standard_normal(5), rng.standard_normal(5)
    p = random_warp(seed, d)
    grads = warp_backward(p, X, g_re, g_im)

    def loss(name):
        def f(val):
            z = warp_forward(p.replace(**{name: val}), X)
            return g_re @ z.z_re + g_im @ z.z_im
        return f

    for name in ("W", "b", "W_out"):
        fd = central_fd(loss(name), p.arrays()[name])
        assert rel_err(grads[name], fd) <= 1e-6, name


def test_identity_at_init_on_grid():
    t = np.linspace(-1, 1, 64)
    X = np.stack(np.meshgrid(t, t), -1).reshape(-1, 2)
    for seed in range(5):
        z = warp_forward(init_warp(seed, 2, True), X)
        dev = np.abs(z.complex - (X[:, 0] + 1j * X[:, 1]))
        assert dev.max() < 1e-3


def test_forward_is_pure():
    p = random_warp(0, 2)
    X = np.random.default_rng(0).uniform(-1, 1, (8, 2))
    X0 = X.copy()
    a, b = warp_forward(p, X), warp_forward(p, X)
    assert np.array_equal(a.z_re, b.z_re) and np.array_equal(a.z_im, b.z_im)
    assert np.array_equal(X, X0)
    assert isinstance(a, LatentPoints) and len(a) == 8
