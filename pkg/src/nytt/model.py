"""Context-frame MLP mask estimator with a hand-written backward pass and Adam.

Gradients flow only through the mask: the log-amplitude input features are a
stop-gradient conditioning signal, so backward never forms d(loss)/d(features).
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dsp import Mask, MaskKind
from .errors import ParameterError, ShapeError, TrainingDivergedError

CHECKPOINT_MAGIC = b"NYTTCKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelArch:
    context: int = 2
    feature_bins: int = 257
    hidden_sizes: tuple = (256, 256)
    activation: str = "tanh"
    output_kind: MaskKind = MaskKind.COMPLEX
    # affine map applied to log-amplitude features before the first layer; with
    # level_norm the utterance's mean log-amplitude is used as the shift, which
    # makes the estimator invariant to input gain
    input_shift: float = -3.0
    input_scale: float = 0.3
    head_init_scale: float = 1e-3
    level_norm: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        object.__setattr__(self, "output_kind", MaskKind(self.output_kind))
        if self.activation != "tanh":
            raise ParameterError(f"unsupported activation {self.activation!r}")
        if self.context < 0 or self.feature_bins < 1 or any(h < 1 for h in self.hidden_sizes):
            raise ParameterError("context must be >= 0 and all widths positive")

    @property
    def input_width(self):
        return (2 * self.context + 1) * self.feature_bins

    @property
    def output_width(self):
        f = self.feature_bins
        return 2 * f if self.output_kind is MaskKind.COMPLEX else f

    @property
    def layer_sizes(self):
        return [self.input_width, *self.hidden_sizes, self.output_width]

    @property
    def n_params(self):
        s = self.layer_sizes
        return sum(a * b + b for a, b in zip(s[:-1], s[1:]))

    def to_dict(self):
        return {
            "context": self.context,
            "feature_bins": self.feature_bins,
            "hidden_sizes": list(self.hidden_sizes),
            "activation": self.activation,
            "output_kind": self.output_kind.value,
            "input_shift": self.input_shift,
            "input_scale": self.input_scale,
            "head_init_scale": self.head_init_scale,
            "level_norm": self.level_norm,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class ModelParams:
    arch: ModelArch
    values: np.ndarray
    init_seed: int = 0
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.arch.n_params,):
            raise ShapeError(f"expected {self.arch.n_params} parameters, got {self.values.shape}")

    def layers(self, values=None):
        """(W, b) views into ``values`` (defaults to the parameter vector)."""
        values = self.values if values is None else values
        out, pos = [], 0
        sizes = self.arch.layer_sizes
        for a, b in zip(sizes[:-1], sizes[1:]):
            w = values[pos:pos + a * b].reshape(a, b)
            pos += a * b
            out.append((w, values[pos:pos + b]))
            pos += b
        return out

    def copy(self):
        return ModelParams(self.arch, self.values.copy(), self.init_seed)


def init_params(arch, seed):
    """Glorot-uniform weights, zero biases, head starting as a pass-through mask."""
    rng = np.random.default_rng([0x1417, seed])
    params = ModelParams(arch, np.zeros(arch.n_params), seed)
    layers = params.layers()
    for i, (w, _) in enumerate(layers):
        a = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
        w[...] = rng.uniform(-a, a, size=w.shape)
        if i == len(layers) - 1:
            w *= arch.head_init_scale
    if arch.output_kind is MaskKind.COMPLEX:
        layers[-1][1][:arch.feature_bins] = 1.0
    return params


@dataclass
class Tape:
    arch: ModelArch
    params: ModelParams
    params_version: int
    inputs: np.ndarray
    hidden: list
    head: np.ndarray
    frames: list  # frame count per input matrix


def context_stack(arch, features):
    """(F, T) features -> (T, (2c+1)F) rows, boundary frames replicated."""
    shift = features.mean() if arch.level_norm else arch.input_shift
    z = (features.T - shift) * arch.input_scale
    c = arch.context
    if c == 0:
        return np.ascontiguousarray(z)
    t = z.shape[0]
    padded = np.pad(z, ((c, c), (0, 0)), mode="edge")
    return np.hstack([padded[j:j + t] for j in range(2 * c + 1)])


def _check_features(arch, features):
    if features.ndim != 2 or features.shape[0] != arch.feature_bins:
        raise ShapeError(f"features must be ({arch.feature_bins}, T), got {features.shape}")


def forward_many(params, feature_list):
    """Run the estimator on several (F, T) feature matrices as one batch."""
    arch = params.arch
    for feats in feature_list:
        _check_features(arch, feats)
    x = np.vstack([context_stack(arch, feats) for feats in feature_list])
    layers = params.layers()
    hidden, h = [], x
    for w, b in layers[:-1]:
        h = np.tanh(h @ w + b)
        hidden.append(h)
    w, b = layers[-1]
    head = h @ w + b
    f = arch.feature_bins
    if arch.output_kind is MaskKind.COMPLEX:
        values = head[:, :f] + 1j * head[:, f:]
    else:
        values = np.logaddexp(0.0, head)
    masks, pos = [], 0
    frames = [feats.shape[1] for feats in feature_list]
    for t in frames:
        masks.append(Mask(arch.output_kind, np.ascontiguousarray(values[pos:pos + t].T)))
        pos += t
    tape = Tape(arch, params, params.version, x, hidden, head, frames)
    return masks, tape


def forward(params, features):
    masks, tape = forward_many(params, [features])
    return masks[0], tape


def backward(tape, grad_mask):
    """Reverse-mode gradient of the forward map contracted with ``grad_mask``.

    ``grad_mask`` is an (F, T) array, or a list of them matching ``forward_many``;
    for Complex masks the real/imaginary parts hold d/dRe and d/dIm.
    """
    params = tape.params
    if tape.params_version != params.version:
        raise ShapeError("stale tape: parameters were updated after this forward pass")
    grads = grad_mask if isinstance(grad_mask, (list, tuple)) else [grad_mask]
    grads = [g.values if isinstance(g, Mask) else np.asarray(g) for g in grads]
    if [g.shape[1] for g in grads] != tape.frames:
        raise ShapeError("grad_mask frame counts do not match the tape")
    arch = tape.arch
    g = np.vstack([gm.T for gm in grads])
    if arch.output_kind is MaskKind.COMPLEX:
        d_head = np.hstack([g.real, g.imag])
    else:
        d_head = np.real(g) * expit(tape.head)
    out = np.zeros_like(params.values)
    layers = params.layers()
    glayers = params.layers(out)
    acts = [tape.inputs, *tape.hidden]
    delta = d_head
    for i in range(len(layers) - 1, -1, -1):
        gw, gb = glayers[i]
        np.matmul(acts[i].T, delta, out=gw)
        gb[...] = delta.sum(axis=0)
        if i:
            delta = (delta @ layers[i][0].T) * (1.0 - acts[i] ** 2)
    return out


@dataclass
class AdamState:
    step: int
    m: np.ndarray
    v: np.ndarray
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n, lr=1e-4, **kw):
        return cls(0, np.zeros(n), np.zeros(n), lr, **kw)


def adam_step(params, grads, state):
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    if grads.shape != params.values.shape or state.m.shape != grads.shape:
        raise ShapeError("params, grads and Adam moments must share one length")
    if not np.all(np.isfinite(grads)):
        bad = np.flatnonzero(~np.isfinite(grads))
        raise TrainingDivergedError("non-finite gradient, Adam update aborted",
                                    {"step": state.step, "n_bad": int(bad.size), "first_bad": int(bad[0])})
    state.step += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grads
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * (grads * grads)
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    params.values -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    params.version += 1
    return params, state


def checkpoint_bytes(params, state=None, step=None):
    header = {
        "format_version": CHECKPOINT_VERSION,
        "arch": params.arch.to_dict(),
        "init_seed": int(params.init_seed),
        "step": int(state.step if state is not None else (step or 0)),
        "n_params": int(params.values.size),
        "adam": None if state is None else
        {"lr": state.lr, "beta1": state.beta1, "beta2": state.beta2, "eps": state.eps},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", len(blob)), blob, params.values.astype("<f8").tobytes()]
    if state is not None:
        parts += [state.m.astype("<f8").tobytes(), state.v.astype("<f8").tobytes()]
    return b"".join(parts)


def save_checkpoint(path, params, state=None):
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(params, state))


def parse_checkpoint(data):
    if data[:8] != CHECKPOINT_MAGIC:
        raise ParameterError("not a nytt checkpoint (bad magic)")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + hlen].decode())
    if header["format_version"] != CHECKPOINT_VERSION:
        raise ParameterError(f"unsupported checkpoint version {header['format_version']}")
    n = header["n_params"]
    body = np.frombuffer(data, dtype="<f8", offset=12 + hlen)
    arch = ModelArch.from_dict(header["arch"])
    params = ModelParams(arch, body[:n].copy(), header["init_seed"])
    state = None
    if header["adam"] is not None:
        state = AdamState(header["step"], body[n:2 * n].copy(), body[2 * n:3 * n].copy(), **header["adam"])
    return params, state


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())
