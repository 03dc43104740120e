"""Per-frame attack scheduling: all frames, a fixed rate, execution-time
triggered, or restricted to object regions."""

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .dataset_io import RegionSet, box_mask, clamp_boxes

RATE_PRESETS = tuple(Fraction(1, q) for q in range(1, 8))


@dataclass(frozen=True)
class Schedule:
    """``kind`` is one of ``all``, ``rate``, ``time``, ``spatial``.

    ``rate`` is a Fraction in (0, 1]; ``window`` is the moving-average length
    for ``time`` (``None`` = cumulative average).
    """

    kind: str = "all"
    rate: Fraction = Fraction(1)
    window: Optional[int] = 30
    regions: RegionSet = field(default_factory=RegionSet)

    def __post_init__(self):
        if self.kind not in ("all", "rate", "time", "spatial"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        object.__setattr__(self, "rate", Fraction(self.rate))
        if not (0 < self.rate <= 1):
            raise ValueError("rate must lie in (0, 1]")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")

    @classmethod
    def all_frames(cls):
        return cls("all")

    @classmethod
    def at_rate(cls, rate):
        return cls("rate", rate=Fraction(rate))

    @classmethod
    def time_adaptive(cls, window=30):
        return cls("time", window=window)

    @classmethod
    def spatial(cls, regions):
        return cls("spatial", regions=regions)

    @property
    def name(self):
        if self.kind == "rate":
            return f"rate:{self.rate}"
        if self.kind == "time":
            return f"time:{self.window if self.window is not None else 'inf'}"
        return self.kind

    @classmethod
    def parse(cls, text, regions=None):
        """``all``, ``rate:1/3``, ``time:30``, ``time:inf`` or ``spatial``."""
        kind, _, arg = text.strip().partition(":")
        if kind == "all":
            return cls.all_frames()
        if kind == "rate":
            return cls.at_rate(Fraction(arg or "1"))
        if kind == "time":
            return cls.time_adaptive(None if arg in ("inf", "cumulative") else int(arg or 30))
        if kind == "spatial":
            return cls.spatial(regions if regions is not None else RegionSet())
        raise ValueError(f"unknown schedule {text!r}")


class SchedulerState:
    """Frame counter plus a window of recent per-frame execution times."""

    def __init__(self, window=30):
        self.window = window
        self.times = deque(maxlen=window)
        self.frames = 0
        self.last_time = None

    @property
    def moving_average(self):
        # recomputed from the buffer: a running sum drifts under eviction
        return sum(self.times) / len(self.times) if self.times else 0.0

    def record(self, frame_index, seconds):
        if seconds < 0:
            raise ValueError("execution time must be >= 0")
        self.times.append(float(seconds))
        self.last_time = float(seconds)
        self.frames = frame_index + 1
        return self


def record_execution_time(state, frame_index, seconds):
    return state.record(frame_index, seconds)


def should_attack(schedule, state, frame_index, timestamp=None):
    if schedule.kind == "all":
        return True
    if schedule.kind == "rate":
        p, q = schedule.rate.numerator, schedule.rate.denominator
        return frame_index % q < p
    if schedule.kind == "time":
        if state is None or state.last_time is None:
            return False
        return state.last_time > state.moving_average
    return bool(schedule.regions.for_timestamp(timestamp)) if timestamp is not None else False


def regions_for(schedule, timestamp, regions=None, size=None):
    """Boxes to attack in this frame; ``None`` means the full frame."""
    if schedule.kind != "spatial":
        return None
    src = regions if regions is not None else schedule.regions
    boxes = src.for_timestamp(timestamp)
    if size is not None:
        boxes = clamp_boxes(boxes, *size)
    return boxes


def coverage_stats(schedule, timestamps, size, regions=None, exec_times=None):
    """(fraction of frames attacked, mean attacked pixel fraction over attacked frames).

    ``size`` is ``(width, height)``. Time-adaptive coverage needs the per-frame
    execution times of the run (``exec_times``).
    """
    width, height = size
    state = SchedulerState(schedule.window)
    attacked, pixel_fracs = 0, []
    for i, ts in enumerate(timestamps):
        if schedule.kind == "spatial":
            boxes = regions_for(schedule, ts, regions, size)
            hit = bool(boxes)
            frac = box_mask(boxes, width, height).mean() if hit else 0.0
        else:
            hit = should_attack(schedule, state, i, ts)
            frac = 1.0
        if hit:
            attacked += 1
            pixel_fracs.append(float(frac))
        if exec_times is not None:
            state.record(i, exec_times[i])
    n = len(timestamps)
    frame_frac = attacked / n if n else 0.0
    pixel_frac = sum(pixel_fracs) / len(pixel_fracs) if pixel_fracs else 0.0
    return frame_frac, pixel_frac
