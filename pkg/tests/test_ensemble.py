import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rfpqe.autograd import Tensor, gradcheck, l1_loss
from rfpqe.ensemble import Augmentation, gated_fuse, mask_net_forward, self_ensemble
from rfpqe.errors import DimensionError
from rfpqe.net import MaskNet, NetworkConfig, QENet
from rfpqe.pipeline.enhance import model_function

frames = arrays(np.float64, st.tuples(st.integers(1, 2), st.integers(1, 3), st.integers(1, 6), st.integers(1, 6)),
                elements=st.floats(-100, 100, allow_subnormal=False))

# Hand-listed D4 elements on a single 2-D array: (forward, inverse).
D4 = [
    (lambda a: a, lambda a: a),
    (lambda a: np.rot90(a, 1), lambda a: np.rot90(a, 3)),
    (lambda a: np.rot90(a, 2), lambda a: np.rot90(a, 2)),
    (lambda a: np.rot90(a, 3), lambda a: np.rot90(a, 1)),
    (np.fliplr, np.fliplr),
    (np.flipud, np.flipud),
    (np.transpose, np.transpose),
    (lambda a: np.rot90(a, 2).T, lambda a: np.rot90(a, 2).T),
]


def test_eight_distinct_elements():
    probe = np.arange(12.0).reshape(3, 4)
    images = {Augmentation(a.value).apply(probe).tobytes() for a in Augmentation}
    assert len(images) == 8
    assert images == {f(probe).tobytes() for f, _ in D4}


@settings(max_examples=30, deadline=None)
@given(frames)
def test_inverse_roundtrip_bitwise(x):
    for aug in Augmentation:
        assert aug.invert(aug.apply(x)).tobytes() == np.ascontiguousarray(x).tobytes()
        assert aug.inverse.apply(aug.apply(x)).tobytes() == np.ascontiguousarray(x).tobytes()
        assert aug.inverse in set(Augmentation)


def test_closed_under_composition():
    probe = np.arange(9.0).reshape(3, 3)
    for a, b in itertools.product(Augmentation, repeat=2):
        c = a.compose(b)
        np.testing.assert_array_equal(c.apply(probe), a.apply(b.apply(probe)))


def target_of(radius=1, c=1):
    return lambda s: s[:, radius * c:(radius + 1) * c].copy()


@settings(max_examples=20, deadline=None)
@given(frames)
def test_identity_model_bitwise(x):
    c = x.shape[1]
    stack = np.concatenate([x[..., ::-1], x, -x], axis=1)
    out = self_ensemble(target_of(1, c), stack)
    assert out.tobytes() == np.ascontiguousarray(x).tobytes()


def test_pointwise_model():
    x = np.random.default_rng(0).random((1, 3, 5, 7))
    out = self_ensemble(lambda s: 2 * s[:, 1:2], x)
    np.testing.assert_array_equal(out, 2 * x[:, 1:2])


def test_matches_explicit_branch_mean():
    model = QENet(NetworkConfig.from_preset("mini", radius=1, width=8, reduction=4), seed=3, dtype=np.float64)
    fn = model_function(model)
    x = np.random.default_rng(1).random((1, 3, 6, 8))
    branches = []
    for fwd, inv in D4:
        aug = np.stack([np.stack([fwd(x[0, k]) for k in range(3)])])
        y = fn(np.ascontiguousarray(aug))
        branches.append(inv(y[0, 0]))
    want = np.mean(branches, axis=0)
    got = self_ensemble(fn, x)
    np.testing.assert_allclose(got[0, 0], want, rtol=1e-12, atol=1e-12)
    assert got.shape == (1, 1, 6, 8)


def test_order_independent_and_repeatable():
    x = np.random.default_rng(2).random((1, 3, 4, 6))
    model = lambda s: np.sin(s[:, 1:2]) * s[:, :1]  # noqa: E731
    a = self_ensemble(model, x)
    assert a.tobytes() == self_ensemble(model, x).tobytes()
    branches = [aug.invert(model(aug.apply(x))) for aug in Augmentation]
    for perm in itertools.islice(itertools.permutations(branches), 0, 40320, 997):
        np.testing.assert_allclose(sum(perm) / 8, a, rtol=1e-13)


def test_gated_fuse_examples():
    y1, y2 = np.array([[[[2.0]]]]), np.array([[[[4.0]]]])
    assert gated_fuse(y1, y2, np.full_like(y1, 0.5)).item() == 3.0
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal((2, 3, 4, 4)), rng.standard_normal((2, 3, 4, 4))
    ones, zeros = np.ones((2, 1, 4, 4)), np.zeros((2, 1, 4, 4))
    assert gated_fuse(a, b, ones).tobytes() == a.tobytes()
    assert gated_fuse(a, b, zeros).tobytes() == b.tobytes()
    t = gated_fuse(Tensor(a), Tensor(b), Tensor(ones))
    assert t.data.tobytes() == a.tobytes()


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (1, 2, 3, 3), elements=st.floats(-1e3, 1e3)),
       arrays(np.float64, (1, 2, 3, 3), elements=st.floats(-1e3, 1e3)),
       arrays(np.float64, (1, 1, 3, 3), elements=st.floats(0, 1)))
def test_gated_fuse_bounded(a, b, m):
    out = gated_fuse(a, b, m)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    tol = 1e-12 * np.maximum(1.0, np.abs(hi))
    assert np.all(out >= lo - tol) and np.all(out <= hi + tol)


def test_gated_fuse_shape_errors():
    with pytest.raises(DimensionError):
        gated_fuse(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 3)), np.zeros((1, 1, 2, 2)))
    with pytest.raises(DimensionError):
        gated_fuse(np.zeros((1, 2, 2, 2)), np.zeros((1, 2, 2, 2)), np.zeros((1, 3, 2, 2)))


def test_mask_net_zero_weights_and_shape():
    net = MaskNet(channels=2, hidden=4).zero_()
    x = Tensor(np.random.default_rng(4).random((3, 2, 5, 6)).astype(np.float32))
    m = mask_net_forward(x, x, x, net)
    assert m.shape == (3, 1, 5, 6)
    assert np.all(m.data == 0.5)
    with pytest.raises(DimensionError):
        net(x, x, Tensor(np.zeros((3, 2, 5, 5), np.float32)))


def test_mask_and_fusion_gradcheck():
    rng = np.random.default_rng(5)
    net = MaskNet(channels=1, hidden=4, seed=1, dtype=np.float64)
    xt, y1, y2 = (Tensor(rng.random((1, 1, 5, 5)), requires_grad=True) for _ in range(3))
    gt = Tensor(rng.random((1, 1, 5, 5)))
    params = {"y1": y1, "y2": y2, **net.named_parameters()}
    errors = gradcheck(lambda: l1_loss(gated_fuse(y1, y2, net(xt, y1, y2)), gt), params)
    assert max(errors.values()) < 1e-4, errors
