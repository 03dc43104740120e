"""Config-driven experiments: single runs, epsilon x schedule sweeps, plot data.

Config files are INI-style (``configparser``): sections ``[dataset]``,
``[surrogate]``, ``[attack]``, ``[schedule]``, ``[frontend]``, ``[tracker]``,
``[output]`` and ``[run]``. Every run writes ``config.ini`` with all
defaults and seeds resolved, so a report directory can be re-run verbatim.
"""

import configparser
import csv
import dataclasses
import hashlib
import io
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from . import dataset_io, surrogate
from .attacks import DEFAULT_DEPTH_RANGE, AttackConfig
from .dataset_io import load_regions, load_tum_sequence, read_tum_trajectory, write_tum_trajectory
from .errors import ConfigError, DataError
from .frontend import FrontendConfig
from .geometry import Intrinsics, Pose
from .metrics import align_rigid, compute_ate
from .odometry import TrackerConfig
from .pipeline import TARGETS, contiguous_spans, run_sequence
from .scheduler import Schedule, coverage_stats
from .synthetic import DEFAULT_INTRINSICS, DEFAULT_SIZE, TrajectorySpec, generate_synthetic_sequence

log = logging.getLogger(__name__)

TUM_FR1_INTRINSICS = Intrinsics(517.3, 516.5, 318.6, 255.3)
FRAME_COLUMNS = ("index", "timestamp", "attacked", "label", "target", "tracked", "inliers", "matches",
                 "features", "exec_time", "moving_avg", "ate")


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "synthetic"
    path: str = ""
    frames: int = 200
    seed: int = 0
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec.default)
    width: int = DEFAULT_SIZE[0]
    height: int = DEFAULT_SIZE[1]
    intrinsics: Intrinsics = DEFAULT_INTRINSICS
    tolerance: float = dataset_io.DEFAULT_ASSOCIATION_TOLERANCE
    depth_factor: float = dataset_io.DEFAULT_DEPTH_FACTOR
    regions: str = ""


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    surrogate_weights: str = ""
    surrogate_seed: int = 0
    attack: Optional[AttackConfig] = field(default_factory=AttackConfig)
    target: str = "rgb"
    depth_range: tuple = DEFAULT_DEPTH_RANGE
    schedule: str = "all"
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    output: str = "out"
    companion_baseline: bool = False
    seed: int = 0

    def with_attack(self, **kw):
        base = self.attack or AttackConfig(seed=self.seed)
        return dataclasses.replace(self, attack=base.replace(**kw))


# --- parsing ---------------------------------------------------------------------

def _floats(text, n=None):
    vals = tuple(float(v) for v in text.replace(",", " ").split())
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} numbers, got {text!r}")
    return vals


def _section(cp, name):
    return cp[name] if cp.has_section(name) else {}


def _get(sec, key, conv, default):
    if key not in sec or str(sec[key]).strip() == "":
        return default
    try:
        return conv(sec[key])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key}: {sec[key]!r} ({exc})") from None


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _trajectory(sec):
    preset = _get(sec, "trajectory", str, "default").strip()
    if preset == "identity":
        base = TrajectorySpec.identity()
    elif preset == "default":
        base = TrajectorySpec.default()
    else:
        raise ConfigError(f"unknown trajectory preset {preset!r}")
    kw = {}
    for key in ("start", "velocity", "amplitude"):
        if key in sec:
            kw[key] = _get(sec, key, lambda s: _floats(s, 3), None)
    for key in ("period", "yaw_rate", "yaw_amplitude", "pitch_amplitude"):
        if key in sec:
            kw[key] = _get(sec, key, float, None)
    return dataclasses.replace(base, **kw)


def parse_config(text, base_dir="."):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    run = _section(cp, "run")
    seed = _get(run, "seed", int, 0)

    ds = _section(cp, "dataset")
    source = _get(ds, "source", str, "synthetic")
    if source not in ("synthetic", "tum"):
        raise ConfigError("dataset.source must be 'synthetic' or 'tum'")
    path = _get(ds, "path", str, "")
    if source == "tum" and not path:
        raise ConfigError("dataset.path is required for a TUM source")
    if source == "synthetic" and path:
        raise ConfigError("dataset.path given for a synthetic source; pick exactly one")
    default_intr = DEFAULT_INTRINSICS if source == "synthetic" else TUM_FR1_INTRINSICS
    try:
        intr = Intrinsics(_get(ds, "fx", float, default_intr.fx), _get(ds, "fy", float, default_intr.fy),
                          _get(ds, "cx", float, default_intr.cx), _get(ds, "cy", float, default_intr.cy))
        dataset = DatasetConfig(
            source=source,
            path=_resolve(path, base_dir),
            frames=_get(ds, "frames", int, 200),
            seed=_get(ds, "seed", int, seed),
            trajectory=_trajectory(ds),
            width=_get(ds, "width", int, DEFAULT_SIZE[0]),
            height=_get(ds, "height", int, DEFAULT_SIZE[1]),
            intrinsics=intr,
            tolerance=_get(ds, "tolerance", float, dataset_io.DEFAULT_ASSOCIATION_TOLERANCE),
            depth_factor=_get(ds, "depth_factor", float, dataset_io.DEFAULT_DEPTH_FACTOR),
            regions=_resolve(_get(ds, "regions", str, ""), base_dir),
        )
        if dataset.frames < 2:
            raise ConfigError("dataset.frames must be >= 2")

        sg = _section(cp, "surrogate")
        at = _section(cp, "attack")
        attack = None
        if _get(at, "enabled", _bool, True):
            target_label = _get(at, "target_label", str, "random")
            attack = AttackConfig(
                method=_get(at, "method", str, "fgsm").lower(),
                mode=_get(at, "mode", str, "untargeted").lower(),
                epsilon=_get(at, "epsilon", float, 0.10),
                alpha=_get(at, "alpha", float, None),
                steps=_get(at, "steps", int, 10),
                target=target_label if target_label == "random" else int(target_label),
                seed=_get(at, "seed", int, seed),
            )
        target = _get(at, "target", str, "rgb")
        if target not in TARGETS:
            raise ConfigError(f"attack.target must be one of {TARGETS}")
        depth_range = (_get(at, "depth_min", float, DEFAULT_DEPTH_RANGE[0]),
                       _get(at, "depth_max", float, DEFAULT_DEPTH_RANGE[1]))
        if not depth_range[1] > depth_range[0]:
            raise ConfigError("attack.depth_max must exceed attack.depth_min")

        schedule = _get(_section(cp, "schedule"), "kind", str, "all")
        Schedule.parse(schedule)

        fe = _section(cp, "frontend")
        frontend = FrontendConfig(**{
            f.name: _get(fe, f.name, type(f.default), f.default) for f in dataclasses.fields(FrontendConfig)
        })
        tr = _section(cp, "tracker")
        tracker_kw = {}
        for f in dataclasses.fields(TrackerConfig):
            if f.name == "ransac_confidence":
                tracker_kw[f.name] = _get(tr, f.name, lambda s: None if s.strip() == "none" else float(s), f.default)
            elif f.name == "seed":
                tracker_kw[f.name] = _get(tr, f.name, int, seed)
            else:
                tracker_kw[f.name] = _get(tr, f.name, type(f.default), f.default)
        tracker = TrackerConfig(**tracker_kw)

        out = _section(cp, "output")
        return ExperimentConfig(
            dataset=dataset,
            surrogate_weights=_resolve(_get(sg, "weights", str, ""), base_dir),
            surrogate_seed=_get(sg, "seed", int, seed),
            attack=attack,
            target=target,
            depth_range=depth_range,
            schedule=schedule,
            frontend=frontend,
            tracker=tracker,
            output=_resolve(_get(out, "dir", str, "out"), base_dir),
            companion_baseline=_get(out, "baseline", _bool, False),
            seed=seed,
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _resolve(path, base_dir):
    if not path:
        return ""
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))


def load_config(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def _v(x):
    if isinstance(x, tuple):
        return ", ".join(repr(float(v)) for v in x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def format_config(cfg):
    """Resolved INI text; parsing it back yields an equal config."""
    d, a = cfg.dataset, cfg.attack
    t = d.trajectory
    lines = ["[run]", f"seed = {cfg.seed}", "", "[dataset]", f"source = {d.source}"]
    if d.source == "tum":
        lines.append(f"path = {d.path}")
    lines += [
        f"frames = {d.frames}", f"seed = {d.seed}",
        f"start = {_v(tuple(t.start))}", f"velocity = {_v(tuple(t.velocity))}",
        f"amplitude = {_v(tuple(t.amplitude))}", f"period = {_v(float(t.period))}",
        f"yaw_rate = {_v(float(t.yaw_rate))}", f"yaw_amplitude = {_v(float(t.yaw_amplitude))}",
        f"pitch_amplitude = {_v(float(t.pitch_amplitude))}",
        f"width = {d.width}", f"height = {d.height}",
        f"fx = {_v(d.intrinsics.fx)}", f"fy = {_v(d.intrinsics.fy)}",
        f"cx = {_v(d.intrinsics.cx)}", f"cy = {_v(d.intrinsics.cy)}",
        f"tolerance = {_v(d.tolerance)}", f"depth_factor = {_v(d.depth_factor)}",
        f"regions = {d.regions}",
        "", "[surrogate]", f"weights = {cfg.surrogate_weights}", f"seed = {cfg.surrogate_seed}",
        "", "[attack]", f"enabled = {a is not None}", f"target = {cfg.target}",
        f"depth_min = {_v(cfg.depth_range[0])}", f"depth_max = {_v(cfg.depth_range[1])}",
    ]
    if a is not None:
        lines += [f"method = {a.method}", f"mode = {a.mode}", f"epsilon = {_v(float(a.epsilon))}",
                  f"alpha = {'' if a.alpha is None else _v(float(a.alpha))}",
                  f"# step size in use: {_v(float(a.step_size))}", f"steps = {a.steps}", f"target_label = {a.target}",
                  f"seed = {a.seed}"]
    lines += ["", "[schedule]", f"kind = {cfg.schedule}", "", "[frontend]"]
    lines += [f"{f.name} = {_v(getattr(cfg.frontend, f.name))}" for f in dataclasses.fields(FrontendConfig)]
    lines += ["", "[tracker]"]
    for f in dataclasses.fields(TrackerConfig):
        val = getattr(cfg.tracker, f.name)
        lines.append(f"{f.name} = {'none' if val is None else _v(val)}")
    lines += ["", "[output]", f"dir = {cfg.output}", f"baseline = {cfg.companion_baseline}", ""]
    return "\n".join(lines)


# --- data ----------------------------------------------------------------------------

@lru_cache(maxsize=4)
def _synthetic(frames, seed, trajectory, size, intrinsics):
    return generate_synthetic_sequence(trajectory, seed, frames, intrinsics, size)


class _LoadedTum:
    def __init__(self, manifest):
        self.manifest = manifest
        self._cache = {}

    def __len__(self):
        return len(self.manifest)

    def __getitem__(self, k):
        if k not in self._cache:
            self._cache[k] = self.manifest.frame(k)
        return self._cache[k]

    @property
    def timestamps(self):
        return self.manifest.timestamps

    def ground_truth_trajectory(self):
        return self.manifest.ground_truth_trajectory()


def load_dataset(d):
    """``(sequence, ground truth [(t, Pose)], RegionSet, (width, height))``."""
    if d.source == "synthetic":
        seq = _synthetic(d.frames, d.seed, d.trajectory, (d.width, d.height), d.intrinsics)
        regions = load_regions(d.regions) if d.regions else seq.regions
        return seq, seq.ground_truth_trajectory(), regions, (d.width, d.height)
    manifest = load_tum_sequence(d.path, d.tolerance, d.depth_factor)
    seq = _LoadedTum(manifest)
    regions = load_regions(d.regions) if d.regions else dataset_io.RegionSet()
    first, _ = seq[0]
    return seq, seq.ground_truth_trajectory(), regions, (first.width, first.height)


def load_model(cfg):
    if cfg.surrogate_weights:
        try:
            return surrogate.load_weights(cfg.surrogate_weights)
        except OSError as exc:
            raise DataError(f"cannot read surrogate weights: {exc}") from None
    return surrogate.build_surrogate(cfg.surrogate_seed)


# --- runs ---------------------------------------------------------------------------

@dataclass
class RunReport:
    config: ExperimentConfig
    ate: object
    coverage: tuple
    frames: list            # dicts keyed by FRAME_COLUMNS
    trajectory: list        # filled [(t, Pose)]
    tracked_trajectory: list
    ground_truth: list
    baseline: Optional["RunReport"] = None

    def summary(self):
        s = self.ate.summary()
        s.update({
            "coverage_frames": float(self.coverage[0]),
            "coverage_pixels": float(self.coverage[1]),
            "schedule": self.config.schedule,
            "epsilon": float(self.config.attack.epsilon) if self.config.attack else 0.0,
            "attack_target": self.config.target,
            "surrogate_seed": self.config.surrogate_seed,
            "surrogate_weights": self.config.surrogate_weights or "seeded",
            "label_source": "surrogate prediction on clean frame",
            "untracked_counting": "all frames except the keyframe bootstrap",
            "timing": self.config.tracker.timing,
        })
        if self.baseline is not None:
            b = self.baseline.ate
            s["baseline_ate_mean"] = b.mean
            s["baseline_untracked_fraction"] = b.untracked_fraction
            s["ate_ratio_vs_baseline"] = self.ate.mean / b.mean if b.mean > 0 else math.inf
        return s

    def frames_csv(self):
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(FRAME_COLUMNS)
        for f in self.frames:
            w.writerow([_cell(f[c]) for c in FRAME_COLUMNS])
        return out.getvalue()


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.9f}"
    return v


def _schedule(cfg, regions):
    return Schedule.parse(cfg.schedule, regions)


def execute(cfg, data=None, model=None, with_baseline=None):
    """Run one configuration in memory and return its RunReport."""
    data = data or load_dataset(cfg.dataset)
    seq, gt, regions, size = data
    model = model if model is not None else (load_model(cfg) if cfg.attack is not None else None)
    schedule = _schedule(cfg, regions)
    run = run_sequence(seq, cfg.dataset.intrinsics, model, cfg.attack, schedule, cfg.target, cfg.frontend,
                       cfg.tracker, cfg.depth_range)
    if not gt:
        raise DataError("dataset has no ground truth to evaluate against")
    ate = compute_ate(run.trajectory, gt, cfg.dataset.tolerance, results=run.results)
    per_frame = dict(zip(np.round(ate.timestamps, 6).tolist(), ate.errors.tolist()))
    frames = []
    for e in run.log:
        row = dataclasses.asdict(e)
        row["ate"] = per_frame.get(round(e.timestamp, 6), float("nan"))
        frames.append(row)
    stamps = [e.timestamp for e in run.log]
    if cfg.attack is None:
        coverage = (0.0, 0.0)
    else:
        coverage = coverage_stats(schedule, stamps, size, regions, [e.exec_time for e in run.log])
    tracked = [(r.timestamp, r.pose) for r in run.results if r.tracked]
    report = RunReport(cfg, ate, coverage, frames, run.trajectory, tracked, gt)
    if with_baseline if with_baseline is not None else cfg.companion_baseline:
        report.baseline = execute(baseline_config(cfg), data, model, with_baseline=False)
    return report


def baseline_config(cfg):
    return dataclasses.replace(cfg, attack=None, companion_baseline=False)


def baseline_key(cfg):
    """Cache key for attack-free runs: only dataset, front-end, tracker and seed matter."""
    blob = repr((cfg.dataset, cfg.frontend, cfg.tracker, cfg.seed)).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# --- output -----------------------------------------------------------------------------

def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def summary_text(summary):
    return "".join(f"{k}={_fmt(v)}\n" for k, v in summary.items())


def _fmt(v):
    return f"{v:.9f}" if isinstance(v, float) else str(v)


def parse_summary(text):
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


def write_report(report, outdir):
    atomic_write(os.path.join(outdir, "config.ini"), format_config(report.config))
    atomic_write(os.path.join(outdir, "frames.csv"), report.frames_csv())
    atomic_write(os.path.join(outdir, "ate.csv"), report.ate.to_csv())
    atomic_write(os.path.join(outdir, "summary.txt"), summary_text(report.summary()))
    atomic_write(os.path.join(outdir, "trajectory.txt"), write_tum_trajectory(None, report.tracked_trajectory))
    atomic_write(os.path.join(outdir, "trajectory_filled.txt"), write_tum_trajectory(None, report.trajectory))
    atomic_write(os.path.join(outdir, "groundtruth.txt"), write_tum_trajectory(None, report.ground_truth))
    if report.baseline is not None:
        write_report(report.baseline, os.path.join(outdir, "baseline"))
    return outdir


def run(cfg, outdir=None):
    report = execute(cfg)
    write_report(report, outdir or cfg.output)
    return report


def run_baseline(cfg, outdir=None):
    return run(baseline_config(cfg), outdir)


# --- sweeps ----------------------------------------------------------------------------------

SWEEP_COLUMNS = ("schedule", "epsilon", "ate_mean", "ate_rmse", "untracked_pct", "frames_attacked_pct", "status")


def _sweep_cell(cfg, eps, schedule, data, model):
    cell = dataclasses.replace(cfg.with_attack(epsilon=eps), schedule=schedule, companion_baseline=False)
    return execute(cell, data, model, with_baseline=False)


def sweep(cfg, epsilons, schedules, outdir=None, jobs=1):
    """One run per (schedule, epsilon) sharing a single baseline.

    Failed cells are recorded with their error and NaN metrics; the sweep
    continues. Returns ``{"baseline": RunReport, "cells": [(schedule, eps, RunReport|None, status)]}``.
    """
    if not epsilons or not schedules:
        raise ConfigError("sweep needs at least one epsilon and one schedule")
    for s in schedules:
        try:
            Schedule.parse(s)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    data = load_dataset(cfg.dataset)
    model = load_model(cfg)
    base = _cached_baseline(cfg, data)
    grid = [(s, float(e)) for s in schedules for e in epsilons]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as pool:
            futs = [pool.submit(_sweep_cell, cfg, e, s, data, model) for s, e in grid]
            outcomes = [_outcome(f.result) for f in futs]
    else:
        outcomes = [_outcome(lambda s=s, e=e: _sweep_cell(cfg, e, s, data, model)) for s, e in grid]
    cells = [(s, e, rep, status) for (s, e), (rep, status) in zip(grid, outcomes)]
    result = {"baseline": base, "cells": cells}
    if outdir:
        write_sweep(result, outdir, epsilons, schedules)
    return result


def _outcome(fn):
    try:
        return fn(), "ok"
    except Exception as exc:  # a failed cell must not abort the sweep
        log.warning("sweep cell failed: %s", exc)
        return None, f"failed: {type(exc).__name__}: {exc}".replace("\n", " ").replace(",", ";")


_BASELINES = {}


def _cached_baseline(cfg, data):
    key = baseline_key(cfg)
    if key not in _BASELINES:
        _BASELINES[key] = execute(baseline_config(cfg), data, with_baseline=False)
    return _BASELINES[key]


def sweep_rows(result):
    rows = []
    for s, e, rep, status in result["cells"]:
        if rep is None:
            rows.append((s, e, math.nan, math.nan, math.nan, math.nan, status))
        else:
            rows.append((s, e, rep.ate.mean, rep.ate.rmse, 100 * rep.ate.untracked_fraction,
                         100 * rep.coverage[0], status))
    return rows


def _num(v):
    return "nan" if isinstance(v, float) and math.isnan(v) else (f"{v:.6f}" if isinstance(v, float) else str(v))


def write_sweep(result, outdir, epsilons, schedules, name="synthetic"):
    rows = sweep_rows(result)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_num(v) for v in r])
    atomic_write(os.path.join(outdir, "sweep.csv"), out.getvalue())
    base = result["baseline"].ate
    lookup = {(r[0], r[1]): r for r in rows}
    header = ["name", "baseline"] + [f"{s}@{e:g}" for s in schedules for e in epsilons]
    for fname, col, bval in (("table_ate.csv", 2, base.mean), ("table_untracked.csv", 4, 100 * base.untracked_fraction)):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerow([name, _num(float(bval))] + [_num(lookup[(s, float(e))][col]) for s in schedules for e in epsilons])
        atomic_write(os.path.join(outdir, fname), buf.getvalue())
    write_report(result["baseline"], os.path.join(outdir, "baseline"))
    return outdir


# --- plot data --------------------------------------------------------------------------------

def read_frames_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if rows and tuple(rows[0].keys()) != FRAME_COLUMNS:
        raise DataError(f"{path}: unexpected columns")
    return rows


def _xy_series(name, traj, gt, origin):
    pairs = dataset_io.associate([t for t, _ in traj], [t for t, _ in gt], 0.02)
    T = Pose.identity()
    if len(pairs) >= 3:
        E = np.array([traj[i][1].translation for i, _ in pairs])
        G = np.array([gt[j][1].translation for _, j in pairs])
        T = align_rigid(E, G, allow_degenerate=True)
    return [(name, t, *(T.apply(p.translation) - origin)[:2]) for t, p in traj]


def _xy_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("series", "timestamp", "x", "y"))
    for name, t, x, y in rows:
        w.writerow((name, f"{t:.6f}", f"{x:.9f}", f"{y:.9f}"))
    return buf.getvalue()


def _series_name(report_dir):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read(os.path.join(report_dir, "config.ini"))
    enabled = cp.getboolean("attack", "enabled", fallback=True)
    return "attacked" if enabled else "baseline"


def emit_plot_data(report_dir, kind, outdir=None):
    """Write plot-ready CSVs for a report directory; returns the written paths.

    ``trajectory2d``: ``series,timestamp,x,y`` for the run (``attacked`` or
    ``baseline``) and its companion baseline when present, each rigidly
    aligned to ground truth and shifted so ground truth starts at the origin;
    z is dropped. Ground truth goes to ``trajectory2d_groundtruth.csv``.
    ``timeline``: ``frame,exec_time,moving_avg,ate,attacked`` plus
    ``attacked_spans.csv`` listing contiguous attacked frame ranges.
    """
    outdir = outdir or report_dir
    if kind == "trajectory2d":
        gt = read_tum_trajectory(os.path.join(report_dir, "groundtruth.txt"))
        origin = gt[0][1].translation
        p_gt = os.path.join(outdir, "trajectory2d_groundtruth.csv")
        atomic_write(p_gt, _xy_csv([("ground_truth", t, *(p.translation - origin)[:2]) for t, p in gt]))
        runs = [(_series_name(report_dir), report_dir)]
        if os.path.isdir(os.path.join(report_dir, "baseline")):
            runs.insert(0, ("baseline", os.path.join(report_dir, "baseline")))
        rows = []
        for name, d in runs:
            traj = read_tum_trajectory(os.path.join(d, "trajectory.txt"))
            rows += _xy_series(name, traj, gt, origin)
        path = os.path.join(outdir, "trajectory2d.csv")
        atomic_write(path, _xy_csv(rows))
        return [path, p_gt]
    if kind == "timeline":
        frames = read_frames_csv(os.path.join(report_dir, "frames.csv"))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("frame", "exec_time", "moving_avg", "ate", "attacked"))
        for f in frames:
            w.writerow((f["index"], f["exec_time"], f["moving_avg"], f["ate"], f["attacked"]))
        p1 = os.path.join(outdir, "timeline.csv")
        atomic_write(p1, buf.getvalue())
        spans = contiguous_spans([f["attacked"] == "1" for f in frames])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("span", "start_frame", "end_frame"))
        for k, (a, b) in enumerate(spans):
            w.writerow((_span_label(k), a, b))
        p2 = os.path.join(outdir, "attacked_spans.csv")
        atomic_write(p2, buf.getvalue())
        return [p1, p2]
    raise ConfigError(f"unknown plot kind {kind!r} (trajectory2d | timeline)")


def _span_label(k):
    label = ""
    k += 1
    while k:
        k, r = divmod(k - 1, 26)
        label = chr(65 + r) + label
    return label


# --- synthetic export -------------------------------------------------------------------------

def export_synthetic(cfg, outdir):
    """Write the configured synthetic sequence as a TUM-format directory."""
    d = cfg.dataset
    seq = _synthetic(d.frames, d.seed, d.trajectory, (d.width, d.height), d.intrinsics)
    os.makedirs(os.path.join(outdir, "rgb"), exist_ok=True)
    os.makedirs(os.path.join(outdir, "depth"), exist_ok=True)
    rgb_lines, depth_lines = ["# timestamp filename"], ["# timestamp filename"]
    for frame, depth in zip(seq.frames, seq.depths):
        name = f"{frame.timestamp:.6f}.png"
        dataset_io.encode_rgb(os.path.join(outdir, "rgb", name), frame)
        dataset_io.encode_depth(os.path.join(outdir, "depth", name), depth, d.depth_factor)
        rgb_lines.append(f"{frame.timestamp:.6f} rgb/{name}")
        depth_lines.append(f"{depth.timestamp:.6f} depth/{name}")
    atomic_write(os.path.join(outdir, "rgb.txt"), "\n".join(rgb_lines) + "\n")
    atomic_write(os.path.join(outdir, "depth.txt"), "\n".join(depth_lines) + "\n")
    atomic_write(os.path.join(outdir, "groundtruth.txt"), write_tum_trajectory(None, seq.ground_truth))
    dataset_io.write_regions(os.path.join(outdir, "regions.txt"), seq.regions)
    return outdir
