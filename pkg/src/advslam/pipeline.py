"""End-to-end loop: schedule -> attack -> track -> record timing."""

from dataclasses import dataclass

import numpy as np

from . import attacks
from .errors import StageError
from .frontend import FrontendConfig
from .metrics import fill_untracked
from .odometry import Tracker, TrackerConfig
from .scheduler import Schedule, SchedulerState, regions_for, should_attack

TARGETS = ("rgb", "depth", "both")


@dataclass(frozen=True)
class FrameLog:
    index: int
    timestamp: float
    attacked: bool
    label: int
    target: int
    tracked: bool
    inliers: int
    matches: int
    features: int
    exec_time: float
    moving_avg: float


@dataclass
class SequenceRun:
    results: list
    log: list
    trajectory: list   # [(t, Pose)] with untracked frames filled

    @property
    def attack_flags(self):
        return [e.attacked for e in self.log]


def attack_frame(model, rgb, depth, config, target, boxes, index, depth_range):
    """Perturb one RGB-D pair; returns (rgb, depth, label fed to the attack, clean prediction)."""
    label = y_true = -1
    if target in ("rgb", "both"):
        label, y_true = attacks.attack_label(model, config, attacks.surrogate_input(model, rgb.pixels), index)
        adv = attacks.attack(model, rgb, label, config)
        if boxes is not None:
            adv = attacks.apply_perturbation(rgb, attacks.mask_perturbation(adv.perturbation, boxes))
        rgb = adv.frame
    if target in ("depth", "both"):
        depth, dlabel = attacks.attack_depth(model, depth, None, config, depth_range, frame_index=index,
                                             boxes=boxes)
        if label < 0:
            label = dlabel
    return rgb, depth, label, y_true


def run_sequence(sequence, intrinsics, model=None, attack=None, schedule=Schedule(), target="rgb",
                 frontend=FrontendConfig(), tracker=TrackerConfig(), depth_range=attacks.DEFAULT_DEPTH_RANGE,
                 on_frame=None):
    """Track every frame of ``sequence`` (indexable ``(ImageFrame, DepthFrame)`` pairs).

    ``attack=None`` (or no model) is the clean baseline. The returned
    trajectory applies the untracked-fill rule.
    """
    if len(sequence) == 0:
        raise ValueError("empty sequence")
    if target not in TARGETS:
        raise ValueError(f"attack target must be one of {TARGETS}")
    trk = Tracker(intrinsics, frontend, tracker)
    state = SchedulerState(schedule.window)
    results, log = [], []
    for i in range(len(sequence)):
        stage = "load"
        try:
            rgb, depth = sequence[i]
            stage = "schedule"
            attacked = attack is not None and model is not None and should_attack(schedule, state, i, rgb.timestamp)
            label = y_true = -1
            if attacked:
                stage = "attack"
                boxes = regions_for(schedule, rgb.timestamp, size=(rgb.width, rgb.height))
                rgb, depth, label, y_true = attack_frame(model, rgb, depth, attack, target, boxes, i, depth_range)
            stage = "track"
            res = trk.track(rgb, depth)
        except Exception as exc:
            raise StageError(i, stage, exc) from exc
        state.record(i, res.exec_time)
        results.append(res)
        entry = FrameLog(i, rgb.timestamp, attacked, y_true, label, res.tracked, res.inliers, res.matches,
                         res.features, res.exec_time, state.moving_average)
        log.append(entry)
        if on_frame is not None:
            on_frame(entry)
    return SequenceRun(results, log, fill_untracked(results))


def untracked_trajectory_gaps(run):
    """Index spans ``[(start, end)]`` of consecutive untracked frames."""
    flags = np.array([not r.tracked for r in run.results])
    return contiguous_spans(flags)


def contiguous_spans(flags):
    spans, start = [], None
    for i, f in enumerate(flags):
        if f and start is None:
            start = i
        elif not f and start is not None:
            spans.append((start, i - 1))
            start = None
    if start is not None:
        spans.append((start, len(flags) - 1))
    return spans
