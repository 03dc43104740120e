import numpy as np
import pytest
from hypothesis import given, strategies as st
from PIL import Image

from advslam import dataset_io as dio
from advslam.dataset_io import DepthFrame, ImageFrame, RegionSet
from advslam.errors import DataError
from advslam.geometry import Pose


def write_sequence(root, rgb_ts, depth_ts, gt_ts, size=(8, 6)):
    (root / "rgb").mkdir()
    (root / "depth").mkdir()
    w, h = size
    for k, t in enumerate(rgb_ts):
        Image.fromarray(np.full((h, w, 3), k * 10, np.uint8)).save(root / "rgb" / f"{t:.6f}.png")
    for t in depth_ts:
        Image.fromarray(np.full((h, w), 5000, np.uint16)).save(root / "depth" / f"{t:.6f}.png")
    (root / "rgb.txt").write_text("# rgb\n" + "".join(f"{t:.6f} rgb/{t:.6f}.png\n" for t in rgb_ts))
    (root / "depth.txt").write_text("".join(f"{t:.6f} depth/{t:.6f}.png\n" for t in depth_ts))
    (root / "groundtruth.txt").write_text(
        "".join(f"{t:.6f} {k} 0 0 0 0 0 1\n" for k, t in enumerate(gt_ts)))


def test_exact_timestamps(tmp_path):
    ts = [1.0, 1.1, 1.2]
    write_sequence(tmp_path, ts, ts, ts)
    seq = dio.load_tum_sequence(tmp_path)
    assert len(seq) == 3
    rgb, depth = seq[1]
    assert rgb.timestamp == 1.1 and np.allclose(rgb.pixels, 10 / 255)
    assert np.allclose(depth.depth, 1.0)
    gt = seq.ground_truth_trajectory()
    assert [p.translation[0] for _, p in gt] == [0.0, 1.0, 2.0]


def test_tolerance(tmp_path):
    write_sequence(tmp_path, [1.0, 2.0], [1.019, 2.05], [1.0, 2.0])
    seq = dio.load_tum_sequence(tmp_path, tolerance=0.02)
    assert seq.timestamps == [1.0]


def test_no_associations(tmp_path):
    write_sequence(tmp_path, [1.0], [3.0], [1.0])
    with pytest.raises(DataError):
        dio.load_tum_sequence(tmp_path)


def test_malformed_list_reports_line(tmp_path):
    write_sequence(tmp_path, [1.0], [1.0], [1.0])
    (tmp_path / "groundtruth.txt").write_text("1.0 0 0 0 0 0 0 1\n2.0 0 0\n")
    with pytest.raises(DataError, match=":2:"):
        dio.load_tum_sequence(tmp_path)


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        dio.load_tum_sequence(tmp_path)


def test_associate_greedy():
    assert dio.associate([1.0, 1.01], [1.005], 0.02) == [(0, 0)]
    assert dio.associate([1.0, 1.02], [1.019, 1.0], 0.02) == [(0, 1), (1, 0)]
    assert dio.associate([], [1.0], 0.1) == []


@given(st.lists(st.floats(0, 10), max_size=20), st.lists(st.floats(0, 10), max_size=20),
       st.floats(0, 0.5), st.floats(0, 1))
def test_association_monotone_in_tolerance(a, b, tol, shrink):
    pairs = dio.associate(a, b, tol)
    assert len(dio.associate(a, b, tol * shrink)) <= len(pairs)
    assert len({i for i, _ in pairs}) == len(pairs) == len({j for _, j in pairs})


def test_rgb_decode_values(tmp_path):
    img = np.array([[[0, 255, 128]]], np.uint8)
    Image.fromarray(img).save(tmp_path / "a.png")
    f = dio.decode_rgb(tmp_path / "a.png")
    assert f.pixels[0, 0, 0] == 0.0 and f.pixels[0, 0, 1] == 1.0 and f.pixels[0, 0, 2] == 128 / 255


def test_depth_decode_values(tmp_path):
    Image.fromarray(np.array([[5000, 0, 25000]], np.uint16)).save(tmp_path / "d.png")
    d = dio.decode_depth(tmp_path / "d.png")
    assert d.depth.tolist() == [[1.0, 0.0, 5.0]]
    assert d.valid.tolist() == [[True, False, True]]
    Image.fromarray(np.zeros((2, 2, 3), np.uint8)).save(tmp_path / "rgb.png")
    with pytest.raises(DataError):
        dio.decode_depth(tmp_path / "rgb.png")
    (tmp_path / "junk.png").write_bytes(b"not a png")
    with pytest.raises(DataError):
        dio.decode_rgb(tmp_path / "junk.png")


def test_png_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    f = ImageFrame(0.0, rng.integers(0, 256, (6, 9, 3)) / 255.0)
    dio.encode_rgb(tmp_path / "r.png", f)
    assert np.array_equal(dio.decode_rgb(tmp_path / "r.png").pixels, f.pixels)
    d = DepthFrame(0.0, rng.integers(0, 60000, (6, 9)) / 5000.0)
    dio.encode_depth(tmp_path / "d.png", d)
    assert np.allclose(dio.decode_depth(tmp_path / "d.png").depth, d.depth, atol=1e-12)


def test_frame_validation():
    with pytest.raises(ValueError):
        ImageFrame(0.0, np.full((2, 2, 3), 1.5))
    with pytest.raises(ValueError):
        ImageFrame(0.0, np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        DepthFrame(0.0, np.full((2, 2), -1.0))
    f = ImageFrame(0.0, np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        f.pixels[0, 0, 0] = 1.0


def test_gray_luminance():
    f = ImageFrame(0.0, np.array([[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]]))
    np.testing.assert_allclose(f.gray()[0], [0.299, 0.587, 0.114])


def test_trajectory_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    from oracles import random_rotation
    traj = [(1.0 + i / 30, Pose(random_rotation(rng), rng.normal(size=3))) for i in range(5)]
    dio.write_tum_trajectory(tmp_path / "t.txt", traj)
    back = dio.read_tum_trajectory(tmp_path / "t.txt")
    for (ta, pa), (tb, pb) in zip(traj, back):
        assert abs(ta - tb) < 1e-6
        np.testing.assert_allclose(pa.matrix(), pb.matrix(), atol=1e-8)


def test_regions(tmp_path):
    p = tmp_path / "r.txt"
    p.write_text("1.30 10 20 100 50\n1.30 0 0 5 5\n2.0 1 1 3 3\n")
    r = dio.load_regions(p)
    assert r.for_timestamp(1.30) == [(10, 20, 100, 50), (0, 0, 5, 5)]
    assert r.for_timestamp(5.0) == []
    p.write_text("")
    assert len(dio.load_regions(p)) == 0
    for bad in ("1.0 1 2 3\n", "1.0 a b c d\n", "1.0 0 0 0 5\n"):
        p.write_text(bad)
        with pytest.raises(DataError):
            dio.load_regions(p)
    regions = RegionSet({1.5: ((1, 2, 3, 4),)})
    dio.write_regions(p, regions)
    assert dio.load_regions(p).for_timestamp(1.5) == [(1, 2, 3, 4)]


def test_clamp_and_mask():
    assert dio.clamp_boxes([(-5, -5, 10, 10), (95, 95, 10, 10), (200, 0, 5, 5)], 100, 100) == [
        (0, 0, 5, 5), (95, 95, 5, 5)]
    m = dio.box_mask([(0, 0, 50, 50), (30, 0, 50, 50)], 100, 100)
    assert m.sum() == 80 * 50
