"""Deterministic textured-room renderer for desk-scale RGB-D sequences.

The scene is an axis-aligned room (floor, ceiling, four walls) holding a few
axis-aligned boxes. Every surface carries its own seeded block texture. Rays
are cast from a pinhole camera (x right, y down, z forward); colour is
supersampled, depth is the camera-frame z of the centre ray.
"""

from dataclasses import dataclass, field

import numpy as np

from .dataset_io import DepthFrame, ImageFrame, RegionSet
from .errors import DataError
from .geometry import Intrinsics, Pose, axis_angle

DEFAULT_INTRINSICS = Intrinsics(fx=130.0, fy=130.0, cx=79.5, cy=59.5)
DEFAULT_SIZE = (160, 120)
FRAME_RATE = 30.0

ROOM = ((-2.0, 2.0), (-1.5, 1.2), (-1.0, 3.5))
OBJECTS = (
    ((-1.3, 0.3, 2.1), (-0.6, 1.2, 2.7)),
    ((0.35, 0.25, 1.8), (1.0, 1.2, 2.3)),
    ((-0.35, -0.7, 2.9), (0.35, -0.05, 3.3)),
)


@dataclass(frozen=True)
class TrajectorySpec:
    """Scripted camera motion.

    ``position(i) = start + i * velocity + amplitude * sin(2 pi i / period)``
    and the rotation is ``yaw_rate * i + yaw_amplitude * sin(2 pi i / period)``
    about the camera y axis followed by a pitch wobble about x.
    """

    start: tuple = (0.0, 0.0, 0.0)
    velocity: tuple = (0.0, 0.0, 0.0)
    amplitude: tuple = (0.0, 0.0, 0.0)
    period: float = 200.0
    yaw_rate: float = 0.0
    yaw_amplitude: float = 0.0
    pitch_amplitude: float = 0.0

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def default(cls):
        return cls(velocity=(0.0, 0.0, 0.0015), amplitude=(0.45, 0.08, 0.0), period=200.0,
                   yaw_amplitude=0.12, pitch_amplitude=0.04)

    def pose(self, i):
        s = np.sin(2.0 * np.pi * i / self.period)
        c = np.sin(2.0 * np.pi * i / (0.75 * self.period))
        p = np.asarray(self.start, float) + i * np.asarray(self.velocity, float) + s * np.asarray(self.amplitude, float)
        yaw = self.yaw_rate * i + self.yaw_amplitude * s
        R = axis_angle((0, 1, 0), yaw) @ axis_angle((1, 0, 0), self.pitch_amplitude * c)
        return Pose(R, p)


@dataclass
class SyntheticSequence:
    frames: list
    depths: list
    ground_truth: list
    intrinsics: Intrinsics
    regions: RegionSet = field(default_factory=RegionSet)

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, k):
        return self.frames[k], self.depths[k]

    @property
    def timestamps(self):
        return [f.timestamp for f in self.frames]

    def ground_truth_trajectory(self):
        return list(self.ground_truth)


def _surfaces(seed, cells=64):
    """Texture tables and tints, indexed by ``(object id * 3 + axis) * 2 + side``."""
    rng = np.random.default_rng(seed)
    n = (len(OBJECTS) + 1) * 6
    tables = np.empty((n, cells, cells))
    tints = np.empty((n, 3))
    for k in range(n):
        tables[k] = rng.uniform(0.08, 0.92, size=(cells, cells))
        tints[k] = rng.uniform(0.55, 1.0, size=3)
    return tables, tints


def _ray_hits(origin, dirs):
    """Nearest hit per ray: (distance along dir, object id, axis, side, point)."""
    d = [np.ascontiguousarray(dirs[:, k]) for k in range(3)]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = [1.0 / dk for dk in d]
    # room interior: exit through the nearest wall
    exits = []
    for k in range(3):
        lo, hi = ROOM[k]
        exits.append(np.where(d[k] > 0, (hi - origin[k]) * inv[k],
                              np.where(d[k] < 0, (lo - origin[k]) * inv[k], np.inf)))
    best_t = np.minimum(np.minimum(exits[0], exits[1]), exits[2])
    best_axis = np.where(exits[0] == best_t, 0, np.where(exits[1] == best_t, 1, 2))
    best_obj = np.zeros(best_t.shape, dtype=int)

    for n, (blo, bhi) in enumerate(OBJECTS, start=1):
        near, far = [], []
        for k in range(3):
            t1 = (blo[k] - origin[k]) * inv[k]
            t2 = (bhi[k] - origin[k]) * inv[k]
            lo_t = np.fmin(t1, t2)
            hi_t = np.fmax(t1, t2)
            # rays parallel to a slab: inside -> unconstrained, outside -> miss
            if np.any(d[k] == 0):
                par = d[k] == 0
                inside = blo[k] < origin[k] < bhi[k]
                lo_t = np.where(par, -np.inf if inside else np.inf, lo_t)
                hi_t = np.where(par, np.inf if inside else -np.inf, hi_t)
            near.append(lo_t)
            far.append(hi_t)
        t_near = np.maximum(np.maximum(near[0], near[1]), near[2])
        t_far = np.minimum(np.minimum(far[0], far[1]), far[2])
        ax = np.where(near[0] == t_near, 0, np.where(near[1] == t_near, 1, 2))
        hit = (t_near <= t_far) & (t_near > 1e-9) & (t_near < best_t)
        best_t = np.where(hit, t_near, best_t)
        best_obj = np.where(hit, n, best_obj)
        best_axis = np.where(hit, ax, best_axis)

    rows = np.arange(best_t.shape[0])
    best_side = (dirs[rows, best_axis] > 0).astype(int)
    points = origin + best_t[:, None] * dirs
    return best_t, best_obj, best_axis, best_side, points


def _shade(points, obj, axis, side, surfaces, cell_size):
    tables, tints = surfaces
    sid = (obj * 3 + axis) * 2 + side
    cells = tables.shape[1]
    # in-plane coordinates: the two world axes other than the face normal
    u_axis = np.where(axis == 0, 1, 0)
    v_axis = np.where(axis == 2, 1, 2)
    rows = np.arange(points.shape[0])
    iu = np.floor(points[rows, u_axis] / cell_size).astype(int) % cells
    iv = np.floor(points[rows, v_axis] / cell_size).astype(int) % cells
    return tables[sid, iu, iv][:, None] * tints[sid]


def _camera_rays(intr, width, height, supersample):
    s = supersample
    offs = (np.arange(s) + 0.5) / s - 0.5
    u = (np.arange(width)[:, None] + offs[None, :]).ravel()
    v = (np.arange(height)[:, None] + offs[None, :]).ravel()
    uu, vv = np.meshgrid(u, v)
    return np.stack([(uu - intr.cx) / intr.fx, (vv - intr.cy) / intr.fy, np.ones_like(uu)], axis=-1)


def render(pose, intrinsics=DEFAULT_INTRINSICS, size=DEFAULT_SIZE, seed=0, supersample=2, cell_size=0.07,
           surfaces=None):
    """Render (rgb (h, w, 3), depth (h, w)) seen from camera-to-world ``pose``."""
    width, height = size
    surfaces = surfaces if surfaces is not None else _surfaces(seed)
    rays = _camera_rays(intrinsics, width, height, supersample)
    hh, ww = rays.shape[:2]
    dirs = rays.reshape(-1, 3) @ pose.rotation.T
    t, obj, axis, side, pts = _ray_hits(pose.translation, dirs)
    rgb = _shade(pts, obj, axis, side, surfaces, cell_size).reshape(hh, ww, 3)
    s = supersample
    rgb = rgb.reshape(height, s, width, s, 3).mean(axis=(1, 3))

    centre = _camera_rays(intrinsics, width, height, 1).reshape(-1, 3) @ pose.rotation.T
    depth, *_ = _ray_hits(pose.translation, centre)
    # ray parameter equals camera z because the camera-frame ray has unit z
    return np.clip(rgb, 0.0, 1.0), depth.reshape(height, width)


def _check_pose(pose, clearance=0.15):
    p = pose.translation
    for k in range(3):
        if not (ROOM[k][0] + clearance < p[k] < ROOM[k][1] - clearance):
            raise DataError(f"camera at {p.tolist()} is outside the room")
    for blo, bhi in OBJECTS:
        if np.all(p > np.asarray(blo) - clearance) and np.all(p < np.asarray(bhi) + clearance):
            raise DataError(f"camera at {p.tolist()} is inside an object")


def object_regions(pose, intrinsics=DEFAULT_INTRINSICS, size=DEFAULT_SIZE):
    """Image bounding boxes of the scene objects in front of the camera."""
    width, height = size
    inv = pose.inverse()
    boxes = []
    for blo, bhi in OBJECTS:
        corners = np.array([[x, y, z] for x in (blo[0], bhi[0]) for y in (blo[1], bhi[1]) for z in (blo[2], bhi[2])])
        pc = inv.apply(corners)
        if np.any(pc[:, 2] <= 0.05):
            continue
        u = intrinsics.fx * pc[:, 0] / pc[:, 2] + intrinsics.cx
        v = intrinsics.fy * pc[:, 1] / pc[:, 2] + intrinsics.cy
        x0, x1 = int(np.floor(max(u.min(), 0))), int(np.ceil(min(u.max(), width)))
        y0, y1 = int(np.floor(max(v.min(), 0))), int(np.ceil(min(v.max(), height)))
        if x1 - x0 >= 1 and y1 - y0 >= 1:
            boxes.append((x0, y0, x1 - x0, y1 - y0))
    return boxes


def generate_synthetic_sequence(trajectory=None, seed=0, n_frames=200, intrinsics=DEFAULT_INTRINSICS,
                                size=DEFAULT_SIZE, supersample=2, start_time=1.0):
    if n_frames < 2:
        raise ValueError("need at least 2 frames")
    trajectory = trajectory or TrajectorySpec.default()
    surfaces = _surfaces(seed)
    frames, depths, gt, regions = [], [], [], {}
    for i in range(n_frames):
        pose = trajectory.pose(i)
        _check_pose(pose)
        ts = round(start_time + i / FRAME_RATE, 6)
        rgb, depth = render(pose, intrinsics, size, seed, supersample, surfaces=surfaces)
        frames.append(ImageFrame(ts, rgb))
        depths.append(DepthFrame(ts, depth))
        gt.append((ts, pose))
        boxes = object_regions(pose, intrinsics, size)
        if boxes:
            regions[ts] = tuple(boxes)
    return SyntheticSequence(frames, depths, gt, intrinsics, RegionSet(regions))
