"""TUM RGB-D sequence loading, PNG decoding and object-region files.

TUM list files (``rgb.txt``, ``depth.txt``, ``groundtruth.txt``) hold one
entry per line, timestamp first, with ``#`` comments. Depth PNGs are 16-bit
with raw value / factor = meters (factor 5000 by default).
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import DataError
from .geometry import Pose

DEFAULT_ASSOCIATION_TOLERANCE = 0.02
DEFAULT_DEPTH_FACTOR = 5000.0


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ImageFrame:
    """Pixels in [0, 1], shape (height, width, channels)."""

    timestamp: float
    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim == 2:
            p = p[:, :, None]
        if p.ndim != 3 or p.shape[2] not in (1, 3):
            raise ValueError(f"pixels must be (h, w, 1|3), got {p.shape}")
        if not (math.isfinite(self.timestamp) and self.timestamp >= 0):
            raise ValueError(f"bad timestamp {self.timestamp}")
        if p.size and (not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", _readonly(p))

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def channels(self):
        return self.pixels.shape[2]

    def with_pixels(self, pixels):
        return ImageFrame(self.timestamp, pixels)

    def gray(self):
        """Luminance image (h, w)."""
        if self.channels == 1:
            return self.pixels[:, :, 0]
        return self.pixels @ np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class DepthFrame:
    """Depth in meters, shape (height, width); 0 marks an invalid pixel."""

    timestamp: float
    depth: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError(f"depth must be 2-D, got {d.shape}")
        if d.size and (not np.all(np.isfinite(d)) or d.min() < 0):
            raise ValueError("depth must be finite and non-negative")
        object.__setattr__(self, "depth", _readonly(d))

    @property
    def height(self):
        return self.depth.shape[0]

    @property
    def width(self):
        return self.depth.shape[1]

    @property
    def valid(self):
        return self.depth > 0

    def with_depth(self, depth):
        return DepthFrame(self.timestamp, depth)


# --- TUM lists -------------------------------------------------------------

def read_tum_list(path, min_fields=2):
    """Parse a TUM list file into ``[(timestamp, [fields...]), ...]`` sorted by time."""
    if not os.path.isfile(path):
        raise DataError(f"missing file: {path}")
    entries = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) < min_fields:
                raise DataError(f"{path}:{lineno}: expected {min_fields} fields, got {len(parts)}")
            try:
                ts = float(parts[0])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad timestamp {parts[0]!r}") from None
            if not math.isfinite(ts):
                raise DataError(f"{path}:{lineno}: non-finite timestamp")
            entries.append((ts, parts[1:]))
    entries.sort(key=lambda e: e[0])
    return entries


def read_tum_trajectory(path):
    """Read ``timestamp tx ty tz qx qy qz qw`` lines into ``[(t, Pose), ...]``."""
    out = []
    for ts, fields in read_tum_list(path, min_fields=8):
        try:
            v = [float(x) for x in fields[:7]]
        except ValueError:
            raise DataError(f"{path}: bad pose entry at t={ts}") from None
        out.append((ts, Pose.from_quaternion(v[3:7], v[0:3])))
    return out


def write_tum_trajectory(path, stamped_poses):
    lines = ["# timestamp tx ty tz qx qy qz qw"]
    for ts, pose in stamped_poses:
        t = pose.translation
        q = pose.quaternion()
        lines.append(f"{ts:.6f} " + " ".join(f"{v:.9f}" for v in (*t, *q)))
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text


def associate(stamps_a, stamps_b, tolerance):
    """Greedy nearest-timestamp association.

    Candidate pairs with ``|ta - tb| <= tolerance`` are taken in order of
    increasing time difference; each index is used at most once. Returns
    index pairs sorted by the first index.
    """
    a = np.asarray(stamps_a, dtype=np.float64)
    b = np.asarray(stamps_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        return []
    diff = np.abs(a[:, None] - b[None, :])
    ia, ib = np.nonzero(diff <= tolerance)
    order = np.lexsort((ib, ia, diff[ia, ib]))
    used_a, used_b, pairs = set(), set(), []
    for k in order:
        i, j = int(ia[k]), int(ib[k])
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((i, j))
    pairs.sort()
    return pairs


@dataclass(frozen=True)
class SequenceManifest:
    root: str
    rgb: tuple
    depth: tuple
    ground_truth: tuple
    associations: tuple
    depth_factor: float = DEFAULT_DEPTH_FACTOR
    tolerance: float = DEFAULT_ASSOCIATION_TOLERANCE

    def __len__(self):
        return len(self.associations)

    @property
    def timestamps(self):
        return [self.rgb[i][0] for i, _, _ in self.associations]

    def frame(self, k):
        i, j, _ = self.associations[k]
        rgb = decode_rgb(os.path.join(self.root, self.rgb[i][1]), timestamp=self.rgb[i][0])
        depth = decode_depth(os.path.join(self.root, self.depth[j][1]), self.depth_factor,
                             timestamp=self.rgb[i][0])
        return rgb, depth

    def __getitem__(self, k):
        return self.frame(k)

    def ground_truth_trajectory(self):
        """``[(rgb timestamp, Pose)]`` for associations that have ground truth."""
        return [(self.rgb[i][0], self.ground_truth[g][1]) for i, _, g in self.associations if g is not None]


def load_tum_sequence(root, tolerance=DEFAULT_ASSOCIATION_TOLERANCE, depth_factor=DEFAULT_DEPTH_FACTOR):
    rgb = [(ts, f[0]) for ts, f in read_tum_list(os.path.join(root, "rgb.txt"))]
    depth = [(ts, f[0]) for ts, f in read_tum_list(os.path.join(root, "depth.txt"))]
    gt = read_tum_trajectory(os.path.join(root, "groundtruth.txt"))

    rd = associate([t for t, _ in rgb], [t for t, _ in depth], tolerance)
    rg = dict(associate([rgb[i][0] for i, _ in rd], [t for t, _ in gt], tolerance))
    assoc = tuple((i, j, rg.get(k)) for k, (i, j) in enumerate(rd))
    if not assoc:
        raise DataError(f"{root}: no rgb/depth associations within {tolerance} s")
    return SequenceManifest(root, tuple(rgb), tuple(depth), tuple(gt), assoc, depth_factor, tolerance)


# --- PNG -------------------------------------------------------------------

def _open_png(path):
    try:
        img = Image.open(path)
        img.load()
    except (OSError, ValueError) as exc:
        raise DataError(f"unreadable image {path}: {exc}") from None
    return img


def decode_rgb(path, timestamp=0.0):
    img = _open_png(path)
    if img.mode not in ("L", "RGB", "RGBA", "P"):
        raise DataError(f"{path}: unsupported mode {img.mode} (need 8-bit gray or RGB)")
    if img.mode in ("RGBA", "P"):
        img = img.convert("RGB")
    a = np.asarray(img, dtype=np.uint8)
    return ImageFrame(timestamp, a.astype(np.float64) / 255.0)


def decode_depth(path, factor=DEFAULT_DEPTH_FACTOR, timestamp=0.0):
    if not factor > 0:
        raise ValueError("depth factor must be positive")
    img = _open_png(path)
    if img.mode not in ("I;16", "I;16B", "I;16L", "I"):
        raise DataError(f"{path}: depth must be a 16-bit single-channel PNG, got mode {img.mode}")
    raw = np.asarray(img).astype(np.float64)
    if raw.ndim != 2:
        raise DataError(f"{path}: depth must be single-channel")
    return DepthFrame(timestamp, raw / factor)


def encode_rgb(path, frame):
    a = np.rint(np.asarray(frame.pixels) * 255.0).astype(np.uint8)
    Image.fromarray(a[:, :, 0] if a.shape[2] == 1 else a).save(path)


def encode_depth(path, frame, factor=DEFAULT_DEPTH_FACTOR):
    raw = np.rint(np.asarray(frame.depth) * factor)
    if raw.max(initial=0) > 65535:
        raise DataError("depth exceeds 16-bit range at this factor")
    Image.fromarray(raw.astype(np.uint16)).save(path)


# --- object regions -----------------------------------------------------------

@dataclass(frozen=True)
class RegionSet:
    """Axis-aligned boxes ``(x, y, w, h)`` per frame timestamp."""

    boxes: dict = field(default_factory=dict)
    tolerance: float = 1e-4

    def __len__(self):
        return len(self.boxes)

    def for_timestamp(self, ts):
        if not self.boxes:
            return []
        keys = np.fromiter(self.boxes.keys(), dtype=np.float64)
        k = int(np.argmin(np.abs(keys - ts)))
        if abs(keys[k] - ts) > self.tolerance:
            return []
        return list(self.boxes[float(keys[k])])


def load_regions(path):
    if not os.path.isfile(path):
        raise DataError(f"missing file: {path}")
    boxes = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 5:
                raise DataError(f"{path}:{lineno}: expected 'timestamp x y w h'")
            try:
                ts = float(parts[0])
                x, y, w, h = (int(round(float(v))) for v in parts[1:])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric field") from None
            if w < 1 or h < 1:
                raise DataError(f"{path}:{lineno}: box dimensions must be >= 1")
            boxes.setdefault(ts, []).append((x, y, w, h))
    return RegionSet({k: tuple(v) for k, v in boxes.items()})


def write_regions(path, regions):
    lines = ["# timestamp x y w h"]
    for ts in sorted(regions.boxes):
        for x, y, w, h in regions.boxes[ts]:
            lines.append(f"{ts:.6f} {x} {y} {w} {h}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def clamp_boxes(boxes, width, height):
    """Clip boxes to the frame; boxes left with no area are dropped."""
    out = []
    for x, y, w, h in boxes:
        x0, y0 = max(0, x), max(0, y)
        x1, y1 = min(width, x + w), min(height, y + h)
        if x1 - x0 >= 1 and y1 - y0 >= 1:
            out.append((x0, y0, x1 - x0, y1 - y0))
    return out


def box_mask(boxes, width, height):
    m = np.zeros((height, width), dtype=bool)
    for x, y, w, h in clamp_boxes(boxes, width, height):
        m[y:y + h, x:x + w] = True
    return m
