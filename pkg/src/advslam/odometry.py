"""Frame-to-keyframe RGB-D tracking on top of the feature front-end.

Each frame's features are lifted to 3-D with its depth map, matched to the
current keyframe, and a 3-point RANSAC rigid fit gives the keyframe-to-frame
motion. A frame whose best hypothesis has too few inliers is Untracked; the
keyframe is left untouched and the next frame retries against it.
"""

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .frontend import FeatureSet, FrontendConfig, extract, match_features
from .geometry import Pose, rigid_fit


@dataclass(frozen=True)
class TrackerConfig:
    min_inliers: int = 15
    refresh_inliers: int = 40
    refresh_distance: float = 0.15
    ransac_iterations: int = 300
    inlier_radius: float = 0.02
    ransac_confidence: Optional[float] = 0.999
    seed: int = 0
    timing: str = "model"

    def __post_init__(self):
        if self.timing not in ("model", "wall"):
            raise ValueError("timing must be 'model' or 'wall'")
        if self.min_inliers < 3:
            raise ValueError("min_inliers must be >= 3")


@dataclass(frozen=True)
class TrackingResult:
    timestamp: float
    pose: Optional[Pose]
    inliers: int
    matches: int = 0
    features: int = 0
    exec_time: float = 0.0
    bootstrap: bool = False

    @property
    def tracked(self):
        return self.pose is not None


def back_project(xy, depth_frame, intrinsics):
    """3-D point for one keypoint, or None where the depth is invalid."""
    pts, ok = back_project_many(np.asarray(xy, dtype=np.float64).reshape(1, 2), depth_frame, intrinsics)
    return pts[0] if ok[0] else None


def back_project_many(xy, depth_frame, intrinsics):
    """``(points (n, 3), valid (n,))`` sampling depth at the nearest pixel."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    d = depth_frame.depth
    h, w = d.shape
    ix = np.clip(np.rint(xy[:, 0]).astype(int), 0, w - 1)
    iy = np.clip(np.rint(xy[:, 1]).astype(int), 0, h - 1)
    z = d[iy, ix]
    pts = np.stack([(xy[:, 0] - intrinsics.cx) / intrinsics.fx * z,
                    (xy[:, 1] - intrinsics.cy) / intrinsics.fy * z, z], axis=1)
    return pts, z > 0


@dataclass(frozen=True, eq=False)
class RigidEstimate:
    pose: Pose
    inliers: np.ndarray   # bool mask over correspondences
    iterations: int

    @property
    def n_inliers(self):
        return int(self.inliers.sum())


def _degenerate(tri, tol):
    a = tri[..., 1, :] - tri[..., 0, :]
    b = tri[..., 2, :] - tri[..., 0, :]
    return np.linalg.norm(np.cross(a, b), axis=-1) <= tol


def _sample_triples(rng, n, count, src, dst, tol, retries=20):
    idx = rng.integers(0, n, size=(count, 3))
    for _ in range(retries):
        bad = (idx[:, 0] == idx[:, 1]) | (idx[:, 0] == idx[:, 2]) | (idx[:, 1] == idx[:, 2])
        bad |= _degenerate(src[idx], tol) | _degenerate(dst[idx], tol)
        if not bad.any():
            break
        idx[bad] = rng.integers(0, n, size=(int(bad.sum()), 3))
    else:
        idx = idx[~bad]
    return idx


def estimate_rigid(src, dst, iterations=500, radius=0.02, min_inliers=3, seed=0, confidence=None,
                   batch=50):
    """RANSAC rigid transform with ``dst ~ R src + t``.

    Hypotheses come from 3-point closed-form fits; the best (most inliers,
    earliest on ties) is re-fit on its inliers, inliers are re-counted and the
    fit repeated once. With ``confidence`` set, sampling stops once the
    standard adaptive bound is met. Returns None when fewer than
    ``min_inliers`` inliers support the best model.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    n = len(src)
    if n < 3 or n != len(dst):
        return None
    rng = np.random.default_rng(seed)
    scale = max(float(np.ptp(src, axis=0).max()), float(np.ptp(dst, axis=0).max()), 1e-12)
    tol = 1e-9 * scale * scale
    best_count, best_R, best_t = -1, None, None
    done, needed = 0, iterations
    r2 = radius * radius
    while done < min(needed, iterations):
        m = min(batch, iterations - done)
        idx = _sample_triples(rng, n, m, src, dst, tol)
        done += m
        if len(idx) == 0:
            continue
        R, t = rigid_fit(src[idx], dst[idx])
        res = np.einsum("hij,nj->hni", R, src) + t[:, None, :] - dst[None]
        counts = ((res * res).sum(-1) <= r2).sum(1)
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_count, best_R, best_t = int(counts[k]), R[k], t[k]
            if confidence is not None:
                w = best_count / n
                if w >= 1.0:
                    needed = 0
                elif w > 0:
                    needed = int(math.ceil(math.log(1 - confidence) / math.log(1 - w ** 3)))
    if best_R is None or best_count < min_inliers:
        return None
    inl = _inliers(best_R, best_t, src, dst, r2)
    for _ in range(2):
        if inl.sum() < 3:
            break
        R, t = rigid_fit(src[inl], dst[inl])
        new = _inliers(R, t, src, dst, r2)
        if new.sum() < inl.sum():
            break
        best_R, best_t, inl = R, t, new
    if inl.sum() < min_inliers:
        return None
    return RigidEstimate(Pose(best_R, best_t), inl, done)


def _inliers(R, t, src, dst, r2):
    res = src @ R.T + t - dst
    return (res * res).sum(1) <= r2


@dataclass(frozen=True, eq=False)
class Keyframe:
    features: FeatureSet
    points: np.ndarray
    pose: Pose


def cost_model(n_features, n_keyframe, n_matches, ransac_iterations):
    """Deterministic stand-in for per-frame tracking time, in seconds.

    Detection is linear in features, matching in the descriptor pair count
    and RANSAC in hypotheses x correspondences.
    """
    return 0.010 + 2e-5 * n_features + 2e-8 * n_features * n_keyframe + 5e-8 * ransac_iterations * n_matches


class Tracker:
    """Sequential tracking state: the keyframe and the last good pose."""

    def __init__(self, intrinsics, frontend=FrontendConfig(), config=TrackerConfig()):
        self.intrinsics = intrinsics
        self.frontend = frontend
        self.config = config
        self.keyframe = None
        self.last_pose = None
        self.n_frames = 0

    def track(self, rgb, depth):
        t0 = time.perf_counter()
        result = self._track(rgb, depth)
        if self.config.timing == "wall":
            result = _with_time(result, time.perf_counter() - t0)
        self.n_frames += 1
        return result

    def _track(self, rgb, depth):
        cfg = self.config
        feats, _ = extract(rgb.gray(), self.frontend)
        pts, ok = back_project_many(feats.xy, depth, self.intrinsics)
        feats, pts = feats.subset(ok), pts[ok]
        ts = rgb.timestamp

        if self.keyframe is None:
            cost = cost_model(len(feats), 0, 0, 0)
            if len(feats) < cfg.min_inliers:
                return TrackingResult(ts, None, 0, 0, len(feats), cost)
            pose = self.last_pose or Pose.identity()
            self.keyframe = Keyframe(feats, pts, pose)
            self.last_pose = pose
            return TrackingResult(ts, pose, len(feats), 0, len(feats), cost, bootstrap=True)

        kf = self.keyframe
        m = match_features(kf.features, feats, self.frontend.max_distance, self.frontend.ratio)
        est = None
        if len(m) >= 3:
            est = estimate_rigid(pts[m.ib], kf.points[m.ia], cfg.ransac_iterations, cfg.inlier_radius,
                                 cfg.min_inliers, seed=(cfg.seed, self.n_frames), confidence=cfg.ransac_confidence)
        iters = est.iterations if est is not None else (cfg.ransac_iterations if len(m) >= 3 else 0)
        cost = cost_model(len(feats), len(kf.features), len(m), iters)
        if est is None:
            return TrackingResult(ts, None, 0, len(m), len(feats), cost)

        pose = kf.pose.compose(est.pose)
        self.last_pose = pose
        if est.n_inliers < cfg.refresh_inliers or np.linalg.norm(est.pose.translation) > cfg.refresh_distance:
            self.keyframe = Keyframe(feats, pts, pose)
        return TrackingResult(ts, pose, est.n_inliers, len(m), len(feats), cost)


def _with_time(result, seconds):
    return TrackingResult(result.timestamp, result.pose, result.inliers, result.matches, result.features,
                          seconds, result.bootstrap)


def track_frame(tracker, rgb, depth):
    """Functional-style alias for ``tracker.track``; returns ``(result, tracker)``."""
    return tracker.track(rgb, depth), tracker
