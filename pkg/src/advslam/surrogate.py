"""Small NumPy CNN classifier with exact backprop.

The network only exists to hand the attacks a loss gradient with respect to
input pixels, so it is single-sample, float64 throughout, and stores its
weights as float32-representable values so that the on-disk format
round-trips bit-exactly.

Images are ``(height, width, channels)``; internally activations are
``(channels, height, width)``.
"""

import struct

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError

MAGIC = b"ADVSNET\x00"
FORMAT_VERSION = 1


class Conv2D:
    kind = "conv"

    def __init__(self, in_ch, out_ch, k=3, stride=1, pad=1):
        self.in_ch, self.out_ch, self.k, self.stride, self.pad = in_ch, out_ch, k, stride, pad
        self.params = {
            "W": np.zeros((out_ch, in_ch, k, k)),
            "b": np.zeros(out_ch),
        }

    def describe(self):
        return f"conv {self.in_ch} {self.out_ch} {self.k} {self.stride} {self.pad}"

    def out_shape(self, shape):
        c, h, w = shape
        if c != self.in_ch:
            raise ValueError(f"conv expects {self.in_ch} channels, got {c}")
        ho = (h + 2 * self.pad - self.k) // self.stride + 1
        wo = (w + 2 * self.pad - self.k) // self.stride + 1
        if ho < 1 or wo < 1:
            raise ValueError("conv output is empty")
        return self.out_ch, ho, wo

    def _cols(self, x):
        p, s, k = self.pad, self.stride, self.k
        xp = np.pad(x, ((0, 0), (p, p), (p, p))) if p else x
        win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::s, ::s]
        # (C, Ho, Wo, k, k) -> (Ho*Wo, C*k*k)
        c, ho, wo = win.shape[:3]
        cols = win.transpose(1, 2, 0, 3, 4).reshape(ho * wo, c * k * k)
        return cols, xp.shape, ho, wo

    def forward(self, x):
        cols, xp_shape, ho, wo = self._cols(x)
        W = self.params["W"].reshape(self.out_ch, -1)
        out = cols @ W.T + self.params["b"]
        return out.T.reshape(self.out_ch, ho, wo), (cols, xp_shape, ho, wo)

    def backward(self, dout, cache):
        cols, xp_shape, ho, wo = cache
        k, s, p = self.k, self.stride, self.pad
        d = dout.reshape(self.out_ch, ho * wo)
        grads = {"W": (d @ cols).reshape(self.params["W"].shape), "b": d.sum(axis=1)}
        dcols = (d.T @ self.params["W"].reshape(self.out_ch, -1)).reshape(ho, wo, self.in_ch, k, k)
        dxp = np.zeros(xp_shape)
        for i in range(k):
            for j in range(k):
                dxp[:, i:i + s * ho:s, j:j + s * wo:s] += dcols[:, :, :, i, j].transpose(2, 0, 1)
        dx = dxp[:, p:xp_shape[1] - p, p:xp_shape[2] - p] if p else dxp
        return dx, grads


class ReLU:
    kind = "relu"
    params = {}

    def describe(self):
        return "relu"

    def out_shape(self, shape):
        return shape

    def forward(self, x):
        return np.maximum(x, 0.0), x > 0

    def backward(self, dout, mask):
        return dout * mask, {}


class MaxPool2D:
    kind = "maxpool"
    params = {}

    def __init__(self, size=2):
        self.size = size

    def describe(self):
        return f"maxpool {self.size}"

    def out_shape(self, shape):
        c, h, w = shape
        if h < self.size or w < self.size:
            raise ValueError("maxpool input smaller than window")
        return c, h // self.size, w // self.size

    def forward(self, x):
        s = self.size
        c, h, w = x.shape
        ho, wo = h // s, w // s
        blocks = x[:, :ho * s, :wo * s].reshape(c, ho, s, wo, s).transpose(0, 1, 3, 2, 4).reshape(c, ho, wo, s * s)
        idx = blocks.argmax(axis=-1)
        out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
        return out, (x.shape, idx)

    def backward(self, dout, cache):
        shape, idx = cache
        s = self.size
        c, ho, wo = dout.shape
        blocks = np.zeros((c, ho, wo, s * s))
        np.put_along_axis(blocks, idx[..., None], dout[..., None], axis=-1)
        dx = np.zeros(shape)
        dx[:, :ho * s, :wo * s] = blocks.reshape(c, ho, wo, s, s).transpose(0, 1, 3, 2, 4).reshape(c, ho * s, wo * s)
        return dx, {}


class Flatten:
    kind = "flatten"
    params = {}

    def describe(self):
        return "flatten"

    def out_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x):
        return x.reshape(-1), x.shape

    def backward(self, dout, shape):
        return dout.reshape(shape), {}


class Dense:
    kind = "dense"

    def __init__(self, n_in, n_out):
        self.n_in, self.n_out = n_in, n_out
        self.params = {"W": np.zeros((n_out, n_in)), "b": np.zeros(n_out)}

    def describe(self):
        return f"dense {self.n_in} {self.n_out}"

    def out_shape(self, shape):
        if shape != (self.n_in,):
            raise ValueError(f"dense expects ({self.n_in},), got {shape}")
        return (self.n_out,)

    def forward(self, x):
        return self.params["W"] @ x + self.params["b"], x

    def backward(self, dout, x):
        return self.params["W"].T @ dout, {"W": np.outer(dout, x), "b": dout.copy()}


class SurrogateModel:
    """Ordered layers mapping an ``(h, w, c)`` image to ``n_classes`` logits."""

    def __init__(self, layers, input_shape):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        shape = (input_shape[2], input_shape[0], input_shape[1])
        for layer in self.layers:
            shape = layer.out_shape(shape)
        if len(shape) != 1:
            raise ValueError("network must end in a vector of logits")
        self.n_classes = shape[0]

    def descriptor(self):
        h, w, c = self.input_shape
        return "\n".join([f"input {h} {w} {c}"] + [layer.describe() for layer in self.layers]) + "\n"

    def parameters(self):
        """``[(layer index, name, array)]`` in serialisation order."""
        return [(i, name, layer.params[name]) for i, layer in enumerate(self.layers) for name in ("W", "b")
                if name in layer.params]

    def copy(self):
        m = from_descriptor(self.descriptor())
        for (_, _, dst), (_, _, src) in zip(m.parameters(), self.parameters()):
            dst[...] = src
        return m


def from_descriptor(text):
    lines = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0][0] != "input" or len(lines[0]) != 4:
        raise DataError("descriptor must start with 'input h w c'")
    input_shape = tuple(int(v) for v in lines[0][1:])
    layers = []
    for parts in lines[1:]:
        kind, args = parts[0], [int(v) for v in parts[1:]]
        if kind == "conv":
            layers.append(Conv2D(*args))
        elif kind == "relu":
            layers.append(ReLU())
        elif kind == "maxpool":
            layers.append(MaxPool2D(*args))
        elif kind == "flatten":
            layers.append(Flatten())
        elif kind == "dense":
            layers.append(Dense(*args))
        else:
            raise DataError(f"unknown layer kind {kind!r}")
    try:
        return SurrogateModel(layers, input_shape)
    except ValueError as exc:
        raise DataError(f"inconsistent descriptor: {exc}") from None


def build_surrogate(seed=0, input_shape=(64, 64, 3), n_classes=10, channels=(8, 16), hidden=32):
    """Default desk-scale architecture: two 3x3 conv + ReLU + 2x2 pool stages, one hidden dense layer.

    Weights are seeded He-uniform, rounded to float32.
    """
    h, w, c = input_shape
    c1, c2 = channels
    flat = c2 * (h // 4) * (w // 4)
    layers = [
        Conv2D(c, c1, 3, 1, 1), ReLU(), MaxPool2D(2),
        Conv2D(c1, c2, 3, 1, 1), ReLU(), MaxPool2D(2),
        Flatten(), Dense(flat, hidden), ReLU(), Dense(hidden, n_classes),
    ]
    model = SurrogateModel(layers, input_shape)
    init_weights(model, seed)
    return model


def init_weights(model, seed, bias_scale=0.0):
    rng = np.random.default_rng(seed)
    for layer in model.layers:
        if "W" not in layer.params:
            continue
        W = layer.params["W"]
        fan_in = int(np.prod(W.shape[1:]))
        limit = np.sqrt(6.0 / fan_in)
        W[...] = rng.uniform(-limit, limit, size=W.shape).astype(np.float32)
        layer.params["b"][...] = rng.uniform(-bias_scale, bias_scale, size=layer.params["b"].shape).astype(np.float32)
    return model


def _check_image(model, image):
    x = np.asarray(image, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.shape != model.input_shape:
        raise ValueError(f"image shape {x.shape} does not match model input {model.input_shape}")
    return x


def _forward(model, x):
    a = x.transpose(2, 0, 1)
    caches = []
    for layer in model.layers:
        a, cache = layer.forward(a)
        caches.append(cache)
    if not np.all(np.isfinite(a)):
        raise FloatingPointError("non-finite logits (corrupt weights?)")
    return a, caches


def forward(model, image):
    logits, _ = _forward(model, _check_image(model, image))
    return logits


def softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def cross_entropy(logits, label):
    z = logits - logits.max()
    return float(np.log(np.exp(z).sum()) - z[label])


def _check_label(model, label):
    label = int(label)
    if not 0 <= label < model.n_classes:
        raise ValueError(f"label {label} outside [0, {model.n_classes})")
    return label


def loss_and_gradients(model, image, label, params=True):
    """Cross-entropy loss, d loss / d image and (optionally) per-parameter gradients.

    Parameter gradients are returned in the order of ``model.parameters()``.
    """
    x = _check_image(model, image)
    label = _check_label(model, label)
    logits, caches = _forward(model, x)
    loss = cross_entropy(logits, label)
    d = softmax(logits)
    d[label] -= 1.0
    pgrads = []
    for layer, cache in zip(reversed(model.layers), reversed(caches)):
        d, g = layer.backward(d, cache)
        if params:
            pgrads.extend(g[name] for name in ("b", "W") if name in g)
    if not np.all(np.isfinite(d)):
        raise FloatingPointError("non-finite input gradient")
    return loss, d.transpose(1, 2, 0), pgrads[::-1]


def loss(model, image, label):
    return cross_entropy(forward(model, image), _check_label(model, label))


def loss_gradient(model, image, label, mode="untargeted"):
    """Exact gradient of the cross-entropy loss with respect to the input image.

    ``mode`` is accepted for symmetry with the attacks; the gradient is the
    same for both modes and the caller chooses the step sign (ascend the
    true-label loss, or descend the target-label loss).
    """
    if mode not in ("untargeted", "targeted"):
        raise ValueError(f"unknown mode {mode!r}")
    _, g, _ = loss_and_gradients(model, image, label, params=False)
    return g


def classify(model, image):
    """Argmax of the logits; ``np.argmax`` already breaks ties toward the lowest index."""
    return int(np.argmax(forward(model, image)))


# --- weight files -------------------------------------------------------------

def save_weights(model, path):
    desc = model.descriptor().encode("utf-8")
    flat = [p.ravel() for _, _, p in model.parameters()]
    values = np.concatenate(flat) if flat else np.zeros(0)
    as32 = values.astype("<f4")
    if not np.array_equal(as32.astype(np.float64), values):
        raise ValueError("weights are not float32-representable; round-trip would not be exact")
    blob = MAGIC + struct.pack("<II", FORMAT_VERSION, len(desc)) + desc + struct.pack("<Q", as32.size) + as32.tobytes()
    with open(path, "wb") as f:
        f.write(blob)


def load_weights(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: not a surrogate weight file (bad magic)")
    off = len(MAGIC)
    if len(blob) < off + 8:
        raise DataError(f"{path}: truncated header")
    version, dlen = struct.unpack_from("<II", blob, off)
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    off += 8
    if len(blob) < off + dlen + 8:
        raise DataError(f"{path}: truncated descriptor")
    model = from_descriptor(blob[off:off + dlen].decode("utf-8"))
    off += dlen
    (count,) = struct.unpack_from("<Q", blob, off)
    off += 8
    expected = sum(p.size for _, _, p in model.parameters())
    if count != expected:
        raise DataError(f"{path}: {count} weights stored but descriptor needs {expected}")
    if len(blob) != off + 4 * count:
        raise DataError(f"{path}: truncated or oversized weight block")
    values = np.frombuffer(blob, dtype="<f4", count=count, offset=off).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite weights")
    pos = 0
    for _, _, p in model.parameters():
        p[...] = values[pos:pos + p.size].reshape(p.shape)
        pos += p.size
    return model
