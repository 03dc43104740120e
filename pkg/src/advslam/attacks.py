"""FGSM and PGD perturbations of RGB and depth frames from a surrogate gradient.

Frames whose shape differs from the surrogate input are bilinearly resized
down for the gradient, and the sign step is bilinearly upsampled back to
frame resolution. Every adversarial frame satisfies
``max |x_adv - x| <= eps`` exactly in float64.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import surrogate
from .dataset_io import DepthFrame, ImageFrame, box_mask

FGSM, PGD = "fgsm", "pgd"
UNTARGETED, TARGETED = "untargeted", "targeted"
TABLE_EPSILONS = (0.005, 0.05, 0.10, 0.15, 0.30)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttackConfig:
    method: str = FGSM
    mode: str = UNTARGETED
    epsilon: float = 0.10
    alpha: Optional[float] = None
    steps: int = 10
    target: Union[str, int] = "random"
    seed: int = 0

    def __post_init__(self):
        if self.method not in (FGSM, PGD):
            raise ValueError(f"unknown attack method {self.method!r}")
        if self.mode not in (UNTARGETED, TARGETED):
            raise ValueError(f"unknown attack mode {self.mode!r}")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if self.method == PGD:
            if self.steps < 1:
                raise ValueError("PGD needs at least one step")
            if self.alpha is not None and not self.alpha > 0:
                raise ValueError("PGD step size must be > 0")
        if self.mode == TARGETED and not (self.target == "random" or isinstance(self.target, int)):
            raise ValueError("targeted mode needs target='random' or a fixed label")
        if self.mode == TARGETED and self.method == FGSM:
            log.warning("targeted FGSM is non-canonical: a single step is usually too weak to reach a target")

    @property
    def step_size(self):
        return self.alpha if self.alpha is not None else self.epsilon / 4.0

    def replace(self, **kw):
        fields = dict(self.__dict__)
        fields.update(kw)
        return AttackConfig(**fields)


@dataclass(frozen=True, eq=False)
class Perturbation:
    delta: np.ndarray
    epsilon: float

    def __post_init__(self):
        if np.abs(self.delta).max(initial=0.0) > self.epsilon:
            raise ValueError("perturbation exceeds its epsilon bound")


@dataclass(frozen=True, eq=False)
class AdversarialFrame:
    original: ImageFrame
    perturbation: Perturbation
    pixels: np.ndarray

    @property
    def frame(self):
        return self.original.with_pixels(self.pixels)


# --- numerics --------------------------------------------------------------------

def _interp_matrix(n_out, n_in):
    """Row-stochastic bilinear weights with half-pixel centres."""
    M = np.zeros((n_out, n_in))
    if n_in == 1:
        M[:, 0] = 1.0
        return M
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(int)
    i1 = np.minimum(i0 + 1, n_in - 1)
    w1 = src - i0
    rows = np.arange(n_out)
    M[rows, i0] += 1.0 - w1
    M[rows, i1] += w1
    return M


def resize_bilinear(img, height, width):
    img = np.asarray(img, dtype=np.float64)
    if img.shape[:2] == (height, width):
        return img
    Ry = _interp_matrix(height, img.shape[0])
    Rx = _interp_matrix(width, img.shape[1])
    tmp = np.tensordot(Ry, img, axes=(1, 0))
    return np.tensordot(tmp, Rx, axes=(1, 1)).transpose(0, 2, 1)


def linf_bounds(x, eps):
    """Per-pixel ``[lo, hi]`` = ``[0, 1] ∩ [x - eps, x + eps]`` with ``hi - x <= eps`` and
    ``x - lo <= eps`` holding exactly after float rounding."""
    hi = np.minimum(x + eps, 1.0)
    lo = np.maximum(x - eps, 0.0)
    for _ in range(4):
        bad = hi - x > eps
        if not bad.any():
            break
        hi = np.where(bad, np.nextafter(hi, -np.inf), hi)
    for _ in range(4):
        bad = x - lo > eps
        if not bad.any():
            break
        lo = np.where(bad, np.nextafter(lo, np.inf), lo)
    return lo, hi


class _Bridge:
    """Maps a frame-resolution array to the surrogate input and gradients back."""

    def __init__(self, model, shape):
        self.model = model
        self.shape = shape
        mh, mw, mc = model.input_shape
        self.same = shape[:2] == (mh, mw)
        if shape[2] not in (1, mc):
            raise ValueError(f"frame has {shape[2]} channels, surrogate expects {mc}")

    def to_model(self, x):
        mh, mw, mc = self.model.input_shape
        xs = resize_bilinear(x, mh, mw)
        if xs.shape[2] != mc:
            xs = np.repeat(xs, mc, axis=2)
        return xs

    def gradient(self, x, label):
        g = surrogate.loss_gradient(self.model, self.to_model(x), label)
        if self.shape[2] != g.shape[2]:
            # replicated channels: chain rule sums their gradients
            g = g.sum(axis=2, keepdims=True)
        return g

    def upsample(self, d, eps):
        if self.same:
            return d
        return np.clip(resize_bilinear(d, self.shape[0], self.shape[1]), -eps, eps)


def _as_array(frame):
    return np.asarray(frame.pixels if isinstance(frame, ImageFrame) else frame, dtype=np.float64)


def _wrap(frame, x, delta, eps, pixels):
    original = frame if isinstance(frame, ImageFrame) else ImageFrame(0.0, x)
    return AdversarialFrame(original, Perturbation(delta, eps), pixels)


def _direction(mode):
    return 1.0 if mode == UNTARGETED else -1.0


def fgsm(model, frame, label, config):
    """One signed-gradient step of size eps.

    Untargeted: ascend the loss of ``label``. Targeted: descend the loss of
    ``label`` (the target). ``sign(0) = 0``.
    """
    x = _as_array(frame)
    eps = float(config.epsilon)
    bridge = _Bridge(model, x.shape)
    if eps == 0.0:
        return _wrap(frame, x, np.zeros_like(x), eps, x.copy())
    step = _direction(config.mode) * eps * np.sign(bridge.gradient(x, label))
    delta = bridge.upsample(step, eps)
    lo, hi = linf_bounds(x, eps)
    return _wrap(frame, x, delta, eps, np.clip(x + delta, lo, hi))


def pgd(model, frame, label, config, callback=None):
    """Iterated signed-gradient steps projected onto the eps-ball and [0, 1].

    Starts from zero perturbation; each step evaluates the gradient at the
    current adversarial point. ``callback(iteration, x_adv - x)`` is invoked
    after every projection.
    """
    x = _as_array(frame)
    eps = float(config.epsilon)
    alpha = float(config.step_size)
    bridge = _Bridge(model, x.shape)
    lo, hi = linf_bounds(x, eps)
    sgn = _direction(config.mode)
    d = np.zeros(model.input_shape[:2] + (x.shape[2],)) if not bridge.same else np.zeros_like(x)
    x_adv = x.copy()
    delta = np.zeros_like(x)
    for it in range(config.steps):
        if eps > 0.0:
            d = np.clip(d + sgn * alpha * np.sign(bridge.gradient(x_adv, label)), -eps, eps)
            delta = bridge.upsample(d, eps)
            x_adv = np.clip(x + delta, lo, hi)
            if bridge.same:
                d = x_adv - x
        if callback is not None:
            callback(it, x_adv - x)
    return _wrap(frame, x, delta, eps, x_adv)


def attack(model, frame, label, config, callback=None):
    if config.method == FGSM:
        return fgsm(model, frame, label, config)
    return pgd(model, frame, label, config, callback)


def apply_perturbation(frame, perturbation):
    x = _as_array(frame)
    lo, hi = linf_bounds(x, perturbation.epsilon)
    return _wrap(frame, x, perturbation.delta, perturbation.epsilon, np.clip(x + perturbation.delta, lo, hi))


def mask_perturbation(perturbation, boxes):
    """Zero the perturbation outside the union of ``(x, y, w, h)`` boxes (clamped to the frame)."""
    d = perturbation.delta
    m = box_mask(boxes, d.shape[1], d.shape[0])
    return Perturbation(np.where(m[:, :, None] if d.ndim == 3 else m, d, 0.0), perturbation.epsilon)


# --- labels ---------------------------------------------------------------------------

def frame_rng(seed, frame_index):
    """Independent stream per frame so serial and parallel runs draw the same labels."""
    return np.random.default_rng([int(seed), int(frame_index)])


def pick_target_label(policy, rng, true_label, n_classes):
    if policy != "random":
        return int(policy)
    if n_classes < 2:
        raise ValueError("random targets need at least 2 classes")
    r = int(rng.integers(0, n_classes - 1))
    return r if r < true_label else r + 1


def attack_label(model, config, clean_input, frame_index):
    """(label fed to the attack, surrogate prediction on the clean input)."""
    y_true = surrogate.classify(model, clean_input)
    if config.mode == UNTARGETED:
        return y_true, y_true
    return pick_target_label(config.target, frame_rng(config.seed, frame_index), y_true, model.n_classes), y_true


def surrogate_input(model, x):
    return _Bridge(model, np.asarray(x).shape).to_model(np.asarray(x, dtype=np.float64))


# --- depth -------------------------------------------------------------------------------

DEFAULT_DEPTH_RANGE = (0.0, 10.0)


def normalize_depth(depth, depth_range=DEFAULT_DEPTH_RANGE):
    d_min, d_max = depth_range
    if not d_max > d_min:
        raise ValueError("depth range must satisfy d_max > d_min")
    return np.clip((np.asarray(depth) - d_min) / (d_max - d_min), 0.0, 1.0)


def attack_depth(model, depth_frame, label, config, depth_range=DEFAULT_DEPTH_RANGE, frame_index=0, boxes=None):
    """Attack a depth map through its [0, 1] normalisation; returns (DepthFrame, label used).

    ``label=None`` takes the surrogate's prediction on the normalised depth
    (or a target drawn for ``frame_index`` in targeted mode). Invalid (zero)
    pixels stay invalid and valid pixels stay valid. ``boxes`` restricts the
    perturbation to those regions.
    """
    d = np.asarray(depth_frame.depth, dtype=np.float64)
    span = depth_range[1] - depth_range[0]
    n = normalize_depth(d, depth_range)[:, :, None]
    if label is None:
        label, _ = attack_label(model, config, surrogate_input(model, n), frame_index)
    adv = attack(model, n, label, config)
    if boxes is not None:
        adv = apply_perturbation(n, mask_perturbation(adv.perturbation, boxes))
    change = (adv.pixels - n)[:, :, 0] * span
    valid = d > 0
    out = np.where(valid, np.maximum(d + change, np.minimum(d, 1e-3)), 0.0)
    return depth_frame.with_depth(out), label
