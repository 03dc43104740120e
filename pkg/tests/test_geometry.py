import numpy as np
import pytest
from hypothesis import given, strategies as st

from advslam.geometry import Intrinsics, Pose, cross_covariance_rank, quaternion_to_rotation, rigid_fit

from oracles import random_rotation


@given(st.integers(0, 2**31 - 1))
def test_quaternion_roundtrip(seed):
    rng = np.random.default_rng(seed)
    p = Pose(random_rotation(rng), rng.normal(size=3))
    q = p.quaternion()
    assert q[3] >= 0 and abs(np.linalg.norm(q) - 1) < 1e-12
    np.testing.assert_allclose(quaternion_to_rotation(q), p.rotation, atol=1e-12)
    np.testing.assert_allclose(Pose.from_quaternion(q, p.translation).matrix(), p.matrix(), atol=1e-12)


def test_compose_inverse():
    rng = np.random.default_rng(0)
    a = Pose(random_rotation(rng), rng.normal(size=3))
    b = Pose(random_rotation(rng), rng.normal(size=3))
    np.testing.assert_allclose(a.compose(b).matrix(), a.matrix() @ b.matrix(), atol=1e-12)
    np.testing.assert_allclose(a.compose(a.inverse()).matrix(), np.eye(4), atol=1e-12)
    pts = rng.normal(size=(5, 3))
    np.testing.assert_allclose(a.apply(pts), pts @ a.rotation.T + a.translation)


def test_validity():
    assert not Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3)).is_valid()
    assert not Pose(np.eye(3) * 2, np.zeros(3)).is_valid()
    assert not Pose(np.eye(3), [np.nan, 0, 0]).is_valid()
    assert Pose.identity().is_valid()
    with pytest.raises(ValueError):
        Intrinsics(0, 1, 0, 0)


def test_pose_is_immutable():
    p = Pose.identity()
    with pytest.raises(ValueError):
        p.translation[0] = 1.0


def test_rigid_fit_batched():
    rng = np.random.default_rng(1)
    R = np.stack([random_rotation(rng) for _ in range(4)])
    t = rng.normal(size=(4, 3))
    src = rng.normal(size=(4, 6, 3))
    dst = np.einsum("bij,bnj->bni", R, src) + t[:, None]
    Rf, tf = rigid_fit(src, dst)
    np.testing.assert_allclose(Rf, R, atol=1e-10)
    np.testing.assert_allclose(tf, t, atol=1e-10)


def test_rank():
    line = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0.0]])
    assert cross_covariance_rank(line, line) < 2
    pts = np.random.default_rng(2).normal(size=(5, 3))
    assert cross_covariance_rank(pts, pts) == 3
