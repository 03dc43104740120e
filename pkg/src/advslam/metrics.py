"""Absolute Trajectory Error and untracked-frame statistics."""

import io
from dataclasses import dataclass

import numpy as np

from .dataset_io import associate
from .errors import TrackingLost
from .geometry import Pose, cross_covariance_rank, rigid_fit


class DegenerateAlignment(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AteReport:
    timestamps: np.ndarray
    errors: np.ndarray
    tracked: np.ndarray
    alignment: Pose
    untracked_fraction: float = 0.0

    @property
    def mean(self):
        return float(self.errors.mean())

    @property
    def rmse(self):
        return float(np.sqrt(np.mean(self.errors ** 2)))

    @property
    def max(self):
        return float(self.errors.max())

    def summary(self):
        return {
            "frames": len(self.errors),
            "ate_mean": self.mean,
            "ate_rmse": self.rmse,
            "ate_max": self.max,
            "untracked_fraction": self.untracked_fraction,
        }

    def to_csv(self):
        out = io.StringIO()
        out.write("timestamp,error,tracked\n")
        for ts, e, tr in zip(self.timestamps, self.errors, self.tracked):
            out.write(f"{ts:.6f},{e:.9f},{int(tr)}\n")
        return out.getvalue()

    def summary_text(self):
        return "".join(f"{k}={_fmt(v)}\n" for k, v in self.summary().items())


def _fmt(v):
    return f"{v:.9f}" if isinstance(v, float) else str(v)


def fill_untracked(results):
    """Stamped poses for every result; untracked frames take the most recent
    tracked pose, leading untracked frames the first tracked one."""
    first = next((r.pose for r in results if r.tracked), None)
    if first is None:
        raise TrackingLost("no frame was tracked")
    out, last = [], first
    for r in results:
        if r.tracked:
            last = r.pose
        out.append((r.timestamp, last))
    return out


def untracked_fraction(results):
    """Untracked share of the frames after the first keyframe was established.

    Results without any bootstrap marker are all counted.
    """
    first = next((i for i, r in enumerate(results) if getattr(r, "bootstrap", False)), -1)
    counted = results[first + 1:]
    if not counted:
        return 0.0
    return sum(not r.tracked for r in counted) / len(counted)


def align_rigid(estimated, ground_truth, allow_degenerate=False):
    """Rigid ``Pose`` minimising ``sum |g_i - (R e_i + t)|^2`` (no scale).

    Rank-deficient configurations (collinear or coincident points) leave the
    rotation ambiguous and raise unless ``allow_degenerate``; per-point
    residuals are the same for every optimal rotation, so ATE can still use it.
    """
    e = np.asarray(estimated, dtype=np.float64).reshape(-1, 3)
    g = np.asarray(ground_truth, dtype=np.float64).reshape(-1, 3)
    if len(e) != len(g) or len(e) < 3:
        raise DegenerateAlignment("need at least 3 corresponding points")
    if not (np.all(np.isfinite(e)) and np.all(np.isfinite(g))):
        raise DegenerateAlignment("non-finite points")
    if not allow_degenerate and cross_covariance_rank(e, g) < 2:
        raise DegenerateAlignment("points are collinear or coincident; rotation is not unique")
    R, t = rigid_fit(e, g)
    return Pose(R, t)


def compute_ate(estimated, ground_truth, tolerance=0.02, results=None):
    """ATE of stamped poses ``[(t, Pose)]`` against ground truth.

    Timestamps are associated greedily within ``tolerance``; the estimate is
    rigidly aligned to ground truth over the associated positions and the
    per-frame error is the Euclidean distance after alignment.
    """
    est_ts = [t for t, _ in estimated]
    gt_ts = [t for t, _ in ground_truth]
    pairs = associate(est_ts, gt_ts, tolerance)
    if len(pairs) < 3:
        raise DegenerateAlignment(f"only {len(pairs)} associated poses (need 3)")
    E = np.array([estimated[i][1].translation for i, _ in pairs])
    G = np.array([ground_truth[j][1].translation for _, j in pairs])
    T = align_rigid(E, G, allow_degenerate=True)
    errors = np.linalg.norm(G - T.apply(E), axis=1)
    if results is not None:
        tracked = np.array([results[i].tracked for i, _ in pairs])
        frac = untracked_fraction(results)
    else:
        tracked = np.ones(len(pairs), dtype=bool)
        frac = 0.0
    return AteReport(np.array([est_ts[i] for i, _ in pairs]), errors, tracked, T, frac)
