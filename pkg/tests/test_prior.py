import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import conv_oracle
from hcnet.checks import check_preseg
from hcnet.objective import weighted_ce_logits
from hcnet.prior import DILATIONS, PresegParams, partition, preseg_backward, preseg_forward
from hcnet.tensor import conv2d_dilated, make_rng, softmax_axis


def test_zero_params_give_uniform_q(rng):
    p = PresegParams.init(3, 4, rng)
    zero = PresegParams.zeros_like(p)
    q, _ = preseg_forward(rng.standard_normal((3, 5, 5)), zero)
    np.testing.assert_allclose(q, 0.25, atol=1e-15)


def test_branch_shapes(rng):
    p = PresegParams.init(3, 5, rng)
    assert all(k.shape == (64, 3, 3, 3) for k in p.kernels)
    assert p.head.shape == (5, 64, 1, 1)
    assert DILATIONS == (1, 3, 5)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_q_is_pixelwise_simplex(seed):
    rng = make_rng(seed)
    p = PresegParams.init(2, 3, rng, branch_channels=8)
    q, _ = preseg_forward(rng.standard_normal((2, 6, 6)) * 3, p)
    assert np.all((q >= 0) & (q <= 1))
    np.testing.assert_allclose(q.sum(axis=0), 1.0, atol=1e-6)


def test_copy_head_argmax_matches_scalar_oracle(rng):
    f = rng.standard_normal((2, 7, 7))
    p = PresegParams.init(2, 3, rng, branch_channels=6)
    head = np.zeros((3, 6, 1, 1))
    picks = [4, 0, 2]
    for n, c in enumerate(picks):
        head[n, c, 0, 0] = 1.0
    p = PresegParams(p.k1, p.k3, p.k5, head=head)
    q, _ = preseg_forward(f, p)
    z = sum(conv_oracle(f, k, d) for k, d in zip(p.kernels, DILATIONS))
    expected = np.argmax(z[picks], axis=0)
    assert np.array_equal(partition(q), expected)


def test_partition_one_hot():
    t = np.array([[0, 2], [1, 1]])
    q = np.eye(3)[t].transpose(2, 0, 1)
    assert np.array_equal(partition(q), t)
    assert partition(q).dtype == np.uint16


def test_partition_tie_goes_to_lowest_class():
    q = np.zeros((4, 1, 1))
    q[1] = q[3] = 0.5
    assert partition(q)[0, 0] == 1


def test_partition_matches_scan(rng):
    q = softmax_axis(rng.standard_normal((4, 3, 3)), axis=0)
    t = partition(q)
    for y in range(3):
        for x in range(3):
            best = 0
            for c in range(1, 4):
                if q[c, y, x] > q[best, y, x]:
                    best = c
            assert t[y, x] == best


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 5.0), st.floats(-3, 3))
def test_partition_invariant_to_monotone_logit_maps(seed, scale, shift):
    rng = make_rng(seed)
    logits = rng.standard_normal((3, 4, 4))
    base = partition(softmax_axis(logits, axis=0))
    assert np.array_equal(partition(softmax_axis(scale * logits + shift, axis=0)), base)
    assert np.array_equal(partition(softmax_axis(np.tanh(logits), axis=0)), base)


def test_zero_upstream_zero_gradients(rng):
    p = PresegParams.init(2, 3, rng, branch_channels=4)
    _, cache = preseg_forward(rng.standard_normal((2, 5, 5)), p)
    d_f, g = preseg_backward(cache, d_q=np.zeros((3, 5, 5)))
    assert not d_f.any()
    assert not any(k.any() for k in g.kernels) and not g.head.any()


def test_branch_gradients_share_the_head_projection(rng):
    f = rng.standard_normal((2, 5, 5))
    p = PresegParams.init(2, 3, rng, branch_channels=4)
    _, cache = preseg_forward(f, p)
    d_logits = rng.standard_normal((3, 5, 5))
    _, g = preseg_backward(cache, d_logits=d_logits)
    # every branch sees the same d_z = head^T d_logits
    d_z = np.einsum("nc,nhw->chw", p.head[:, :, 0, 0], d_logits)
    for k, d, gk in zip(p.kernels, DILATIONS, g.kernels):
        assert gk.shape == k.shape
        k2 = k.copy()
        k2[1, 0, 1, 1] += 1e-6
        delta = conv2d_dilated(f, k2, d) - conv2d_dilated(f, k, d)
        assert gk[1, 0, 1, 1] == pytest.approx(np.sum(delta * d_z) / 1e-6, rel=1e-4)


def test_logit_and_q_gradients_combine(rng):
    f = rng.standard_normal((2, 4, 4))
    p = PresegParams.init(2, 3, rng, branch_channels=4)
    _, cache = preseg_forward(f, p)
    dq = rng.standard_normal((3, 4, 4))
    dl = rng.standard_normal((3, 4, 4))
    a, ga = preseg_backward(cache, d_q=dq)
    b, gb = preseg_backward(cache, d_logits=dl)
    c, gc = preseg_backward(cache, d_q=dq, d_logits=dl)
    np.testing.assert_allclose(c, a + b, atol=1e-12)
    np.testing.assert_allclose(gc.head, ga.head + gb.head, atol=1e-12)


@pytest.mark.parametrize("seed", range(2))
def test_gradcheck(seed):
    rep = check_preseg(seed=seed, max_coords=300)
    assert rep.passed, rep.summary()


def _fit_prior(params, f, y, steps=150, lr=0.5, frozen=()):
    w = np.ones(2)
    for _ in range(steps):
        _, cache = preseg_forward(f, params)
        loss, d = weighted_ce_logits(cache.logits, y, w)
        _, g = preseg_backward(cache, d_logits=d)
        for name in ("k1", "k3", "k5", "head"):
            if name not in frozen:
                setattr(params, name, getattr(params, name) - lr * getattr(g, name))
    _, cache = preseg_forward(f, params)
    return weighted_ce_logits(cache.logits, y, w)[0]


def test_wide_dilations_fit_long_range_pattern():
    # label 1 where a dot sits exactly 5 pixels to the left or right: only the
    # dilation-5 branch can see it
    rng = make_rng(7)
    h, w = 24, 24
    dots = np.zeros((h, w))
    dots[rng.integers(0, h, 30), rng.integers(0, w, 30)] = 1.0
    y = np.zeros((h, w), int)
    y[:, 5:] |= dots[:, :-5] > 0
    y[:, :-5] |= dots[:, 5:] > 0
    f = np.stack([np.ones((h, w)), dots])

    budget = 6
    multi = PresegParams.init(2, 2, make_rng(0), branch_channels=budget // 3)
    single = PresegParams.init(2, 2, make_rng(0), branch_channels=budget)
    single.k3[:] = 0.0
    single.k5[:] = 0.0
    loss_multi = _fit_prior(multi, f, y)
    loss_single = _fit_prior(single, f, y, frozen=("k3", "k5"))
    assert loss_multi < 0.5 * loss_single
