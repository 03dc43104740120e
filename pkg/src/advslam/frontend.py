"""Victim feature layer: segment-test corners, BRIEF-style binary descriptors
and mutual-best Hamming matching."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import gaussian_filter, maximum_filter

DESCRIPTOR_BITS = 256
DESCRIPTOR_BYTES = DESCRIPTOR_BITS // 8

# Bresenham circle of radius 3, clockwise from 12 o'clock, as (dx, dy)
CIRCLE = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)
ARC = 9


@dataclass(frozen=True)
class FrontendConfig:
    threshold: float = 0.06
    max_features: int = 1000
    cell_size: int = 32
    pattern_seed: int = 0
    patch_size: int = 31
    smoothing: float = 2.0
    max_distance: int = 64
    ratio: float = 0.8


@dataclass(frozen=True, eq=False)
class FeatureSet:
    xy: np.ndarray            # (n, 2) float pixel coordinates
    response: np.ndarray      # (n,)
    descriptors: np.ndarray   # (n, 32) uint8, packed bits

    def __post_init__(self):
        if not (len(self.xy) == len(self.response) == len(self.descriptors)):
            raise ValueError("keypoint and descriptor counts differ")

    def __len__(self):
        return len(self.xy)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros((0, DESCRIPTOR_BYTES), np.uint8))

    def subset(self, idx):
        return FeatureSet(self.xy[idx], self.response[idx], self.descriptors[idx])


@dataclass(frozen=True, eq=False)
class MatchSet:
    ia: np.ndarray
    ib: np.ndarray
    distance: np.ndarray

    def __len__(self):
        return len(self.ia)

    def pairs(self):
        return list(zip(self.ia.tolist(), self.ib.tolist()))


@lru_cache(maxsize=1)
def _arc_table():
    """``table[mask]`` is True iff the 16-bit circular mask has ARC consecutive set bits."""
    masks = np.arange(1 << 16, dtype=np.uint32)
    doubled = masks | (masks << 16)
    run = np.ones_like(masks, dtype=bool)
    found = np.zeros_like(run)
    for start in range(16):
        run = np.ones_like(found)
        for k in range(ARC):
            run &= ((doubled >> (start + k)) & 1).astype(bool)
        found |= run
    return found


def segment_test(gray, threshold):
    """Corner score per pixel (0 where the segment test fails or within 3 px of the border)."""
    img = np.asarray(gray, dtype=np.float64)
    h, w = img.shape
    score = np.zeros((h, w))
    if h < 7 or w < 7:
        return score
    c = img[3:h - 3, 3:w - 3]
    bright = np.zeros(c.shape, np.uint32)
    dark = np.zeros(c.shape, np.uint32)
    sb = np.zeros(c.shape)
    sd = np.zeros(c.shape)
    for k, (dx, dy) in enumerate(CIRCLE):
        ring = img[3 + dy:h - 3 + dy, 3 + dx:w - 3 + dx]
        diff = ring - c
        b = diff > threshold
        d = diff < -threshold
        bright |= b.astype(np.uint32) << k
        dark |= d.astype(np.uint32) << k
        sb += np.where(b, diff - threshold, 0.0)
        sd += np.where(d, -diff - threshold, 0.0)
    table = _arc_table()
    ok_b = table[bright]
    ok_d = table[dark]
    s = np.maximum(np.where(ok_b, sb, 0.0), np.where(ok_d, sd, 0.0))
    score[3:h - 3, 3:w - 3] = s
    return score


def detect_features(gray, threshold=0.06, max_features=1000, cell_size=32, margin=0):
    """Corner keypoints as ``(xy, response)``.

    3x3 non-maximum suppression, then the strongest corners per grid cell
    (an even share of ``max_features``), ordered by (cell, -response).
    """
    score = segment_test(gray, threshold)
    h, w = score.shape
    if margin:
        score[:margin] = 0
        score[h - margin:] = 0
        score[:, :margin] = 0
        score[:, w - margin:] = 0
    peak = (score > 0) & (score == maximum_filter(score, size=3, mode="constant"))
    ys, xs = np.nonzero(peak)
    resp = score[ys, xs]
    if len(xs) == 0 or max_features <= 0:
        return np.zeros((0, 2)), np.zeros(0)
    ncols = -(-w // cell_size)
    nrows = -(-h // cell_size)
    cell = (ys // cell_size) * ncols + xs // cell_size
    order = np.lexsort((xs, ys, -resp, cell))
    cell, xs, ys, resp = cell[order], xs[order], ys[order], resp[order]
    per_cell = max(1, -(-max_features // (ncols * nrows)))
    first = np.searchsorted(cell, cell, side="left")
    rank = np.arange(len(cell)) - first
    keep = rank < per_cell
    cell, xs, ys, resp = cell[keep], xs[keep], ys[keep], resp[keep]
    if len(xs) > max_features:
        top = np.sort(np.lexsort((xs, ys, -resp))[:max_features])
        cell, xs, ys, resp = cell[top], xs[top], ys[top], resp[top]
    return np.stack([xs, ys], axis=1).astype(np.float64), resp


@lru_cache(maxsize=8)
def brief_pattern(seed=0, patch_size=31):
    """Seeded (256, 4) integer offsets ``(ax, ay, bx, by)`` inside the patch."""
    half = patch_size // 2
    rng = np.random.default_rng(seed)
    pts = np.rint(rng.normal(0.0, patch_size / 5.0, size=(DESCRIPTOR_BITS, 4)))
    pts = np.clip(pts, -half, half).astype(int)
    pts.setflags(write=False)
    return pts


def compute_descriptors(gray, xy, pattern_seed=0, patch_size=31, smoothing=2.0):
    """Binary descriptors for keypoints far enough from the border.

    Returns ``(descriptors, kept)`` where ``kept`` indexes the surviving keypoints;
    keypoints whose patch would leave the frame are dropped.
    """
    img = np.asarray(gray, dtype=np.float64)
    h, w = img.shape
    half = patch_size // 2
    xy = np.asarray(xy).reshape(-1, 2)
    ix = np.rint(xy[:, 0]).astype(int)
    iy = np.rint(xy[:, 1]).astype(int)
    kept = np.nonzero((ix >= half) & (ix < w - half) & (iy >= half) & (iy < h - half))[0]
    if len(kept) == 0:
        return np.zeros((0, DESCRIPTOR_BYTES), np.uint8), kept
    smooth = gaussian_filter(img, smoothing, mode="nearest") if smoothing > 0 else img
    pat = brief_pattern(pattern_seed, patch_size)
    kx, ky = ix[kept][:, None], iy[kept][:, None]
    a = smooth[ky + pat[None, :, 1], kx + pat[None, :, 0]]
    b = smooth[ky + pat[None, :, 3], kx + pat[None, :, 2]]
    return np.packbits(a < b, axis=1), kept


def extract(gray, config=FrontendConfig()):
    """Detect and describe; returns ``(FeatureSet, n_dropped_at_border)``."""
    xy, resp = detect_features(gray, config.threshold, config.max_features, config.cell_size)
    desc, kept = compute_descriptors(gray, xy, config.pattern_seed, config.patch_size, config.smoothing)
    return FeatureSet(xy[kept], resp[kept], desc), len(xy) - len(kept)


def hamming_matrix(a, b):
    a = np.ascontiguousarray(a, dtype=np.uint8)
    b = np.ascontiguousarray(b, dtype=np.uint8)
    if a.shape[1] != b.shape[1]:
        raise ValueError("descriptor lengths differ")
    if a.shape[1] % 8 == 0:
        a, b = a.view(np.uint64), b.view(np.uint64)
    return np.bitwise_count(a[:, None, :] ^ b[None, :, :]).sum(axis=-1, dtype=np.int64)


def _best_two(D, axis):
    n = D.shape[axis]
    best = np.argmin(D, axis=axis)
    d1 = np.take_along_axis(D, np.expand_dims(best, axis), axis=axis).squeeze(axis)
    if n < 2:
        return best, d1, np.full(d1.shape, np.inf)
    d2 = np.partition(D, 1, axis=axis).take(1, axis=axis).astype(np.float64)
    return best, d1, d2


def match_features(a, b, max_distance=64, ratio=0.8):
    """Mutual-best matches passing the distance cap and the ratio test in both directions."""
    if len(a) == 0 or len(b) == 0:
        z = np.zeros(0, dtype=int)
        return MatchSet(z, z.copy(), z.copy())
    D = hamming_matrix(a.descriptors, b.descriptors)
    best_ab, d1_a, d2_a = _best_two(D, 1)
    best_ba, _, d2_b = _best_two(D, 0)
    ia = np.arange(len(a))
    ib = best_ab
    ok = (best_ba[ib] == ia) & (d1_a <= max_distance) & (d1_a < ratio * d2_a) & (d1_a < ratio * d2_b[ib])
    return MatchSet(ia[ok], ib[ok], d1_a[ok])


def dump_features(features):
    """Text dump, one keypoint per line: ``x y response hex-descriptor``."""
    lines = ["# x y response descriptor"]
    for (x, y), r, d in zip(features.xy, features.response, features.descriptors):
        lines.append(f"{x:.2f} {y:.2f} {r:.6f} {bytes(d).hex()}")
    return "\n".join(lines) + "\n"


def load_feature_dump(text):
    xy, resp, desc = [], [], []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        x, y, r, h = line.split()
        xy.append((float(x), float(y)))
        resp.append(float(r))
        desc.append(np.frombuffer(bytes.fromhex(h), dtype=np.uint8))
    if not xy:
        return FeatureSet.empty()
    return FeatureSet(np.array(xy), np.array(resp), np.stack(desc))
