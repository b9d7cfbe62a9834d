"""STFT analysis/synthesis as linear operators, plus their adjoints.

Padding rule: ``window_len - frame_shift`` zeros on the left and enough on the
right to complete the last frame, so a signal of ``L`` samples always gives
``ceil(L / frame_shift)`` frames and every sample is seen by at least one
window. Adjoints treat real and imaginary parts as independent real
coordinates, so ``<A s, g> = <s, A^T g>`` with the plain real inner product.
"""

import enum
import functools
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .corpus import AudioClip
from .errors import DegenerateInputError, ParameterError, ShapeError

WOLA_FLOOR = 1e-8


@dataclass(frozen=True)
class StftConfig:
    frame_shift: int = 128
    window_len: int = 512
    dft_size: int = 512
    window: str = "hamming"

    def __post_init__(self):
        if self.window != "hamming":
            raise ParameterError(f"only the Hamming window is supported, got {self.window!r}")
        if self.dft_size < self.window_len:
            raise ParameterError("dft_size must be >= window_len")
        if not 0 < self.frame_shift <= self.window_len:
            raise ParameterError("frame_shift must lie in (0, window_len]")
        if self.dft_size % 2:
            raise ParameterError("dft_size must be even")

    @property
    def n_bins(self):
        return self.dft_size // 2 + 1

    @property
    def left_pad(self):
        return self.window_len - self.frame_shift

    def n_frames(self, source_len):
        return -(-source_len // self.frame_shift)


@dataclass
class Spectrogram:
    bins: np.ndarray  # (F, T) complex
    config: StftConfig
    source_len: int

    @property
    def shape(self):
        return self.bins.shape

    def __add__(self, other):
        return Spectrogram(self.bins + other.bins, self.config, self.source_len)


class MaskKind(str, enum.Enum):
    COMPLEX = "Complex"
    REAL = "Real"


@dataclass
class Mask:
    kind: MaskKind
    values: np.ndarray  # (F, T), complex for Complex, real >= 0 for Real

    def __post_init__(self):
        self.kind = MaskKind(self.kind)
        if self.kind is MaskKind.REAL and np.any(self.values < 0):
            raise ParameterError("Real masks must be elementwise non-negative")


@functools.lru_cache(maxsize=8)
def hamming(n):
    """Periodic Hamming window."""
    w = 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / n)
    w.setflags(write=False)
    return w


def _frames(padded, cfg, n_frames):
    return sliding_window_view(padded, cfg.window_len)[::cfg.frame_shift][:n_frames]


def _overlap_add(frames, cfg):
    """Sum (T, window_len) frames at hop spacing into a padded-domain buffer."""
    t, w = frames.shape
    hop = cfg.frame_shift
    r = -(-w // hop)
    if r * hop != w:
        frames = np.pad(frames, ((0, 0), (0, r * hop - w)))
    out = np.zeros((t + r - 1) * hop)
    for k in range(r):
        out[k * hop:k * hop + t * hop] += frames[:, k * hop:(k + 1) * hop].reshape(-1)
    return out


@functools.lru_cache(maxsize=64)
def _wola_denominator(cfg, n_frames):
    w = hamming(cfg.window_len)
    d = np.maximum(_overlap_add(np.tile(w * w, (n_frames, 1)), cfg), WOLA_FLOOR)
    d.setflags(write=False)
    return d


def _samples(clip):
    return clip.samples if isinstance(clip, AudioClip) else np.asarray(clip, dtype=np.float64)


def _pad(x, cfg, n_frames):
    padded = np.zeros(n_frames * cfg.frame_shift + cfg.left_pad)
    padded[cfg.left_pad:cfg.left_pad + x.size] = x
    return padded


def stft(clip, cfg=StftConfig()):
    x = _samples(clip)
    if x.size < 1:
        raise DegenerateInputError("stft of an empty signal")
    t = cfg.n_frames(x.size)
    frames = _frames(_pad(x, cfg, t), cfg, t) * hamming(cfg.window_len)
    bins = np.fft.rfft(frames, n=cfg.dft_size, axis=1).T
    return Spectrogram(np.ascontiguousarray(bins), cfg, x.size)


def stft_adjoint(bins, cfg, source_len):
    """Adjoint of :func:`stft` mapping an (F, T) complex matrix to a real signal."""
    t = cfg.n_frames(source_len)
    if bins.shape != (cfg.n_bins, t):
        raise ShapeError(f"expected bins of shape {(cfg.n_bins, t)}, got {bins.shape}")
    half = np.array(bins.T, dtype=np.complex128)
    half[:, 1:cfg.dft_size // 2] *= 0.5
    frames = cfg.dft_size * np.fft.irfft(half, n=cfg.dft_size, axis=1)[:, :cfg.window_len]
    buf = _overlap_add(frames * hamming(cfg.window_len), cfg)
    return buf[cfg.left_pad:cfg.left_pad + source_len]


def istft(spec):
    """Weighted overlap-add synthesis, normalised by the summed squared window."""
    cfg = spec.config
    f, t = spec.bins.shape
    if t == 0:
        raise DegenerateInputError("istft of a spectrogram with zero frames")
    if f != cfg.n_bins or t != cfg.n_frames(spec.source_len):
        raise ShapeError(f"spectrogram shape {spec.bins.shape} inconsistent with config")
    frames = np.fft.irfft(spec.bins.T, n=cfg.dft_size, axis=1)[:, :cfg.window_len]
    buf = _overlap_add(frames * hamming(cfg.window_len), cfg) / _wola_denominator(cfg, t)
    return AudioClip(buf[cfg.left_pad:cfg.left_pad + spec.source_len])


def istft_adjoint(grad_clip, cfg, source_len):
    """Adjoint of :func:`istft`; returns the gradient w.r.t. re/im parts as one complex matrix."""
    g = _samples(grad_clip)
    if g.size != source_len:
        raise ShapeError(f"gradient has {g.size} samples, expected {source_len}")
    t = cfg.n_frames(source_len)
    den = _wola_denominator(cfg, t)
    padded = np.zeros(den.size)
    padded[cfg.left_pad:cfg.left_pad + source_len] = g
    padded /= den
    frames = _frames(padded, cfg, t) * hamming(cfg.window_len)
    out = np.fft.rfft(frames, n=cfg.dft_size, axis=1)
    # irfft weights interior bins twice and the DC/Nyquist bins once
    out *= 2.0 / cfg.dft_size
    out[:, 0] *= 0.5
    out[:, cfg.dft_size // 2] *= 0.5
    return np.ascontiguousarray(out.T)


def log_amp_features(spec, floor=1e-7):
    if floor <= 0:
        raise ParameterError("floor must be positive")
    bins = spec.bins if isinstance(spec, Spectrogram) else spec
    return np.log(np.maximum(np.abs(bins), floor))


def apply_mask(spec, mask):
    if mask.values.shape != spec.bins.shape:
        raise ShapeError(f"mask shape {mask.values.shape} != spectrogram shape {spec.bins.shape}")
    if mask.kind is MaskKind.COMPLEX:
        out = mask.values * spec.bins
    else:
        if np.iscomplexobj(mask.values):
            raise ShapeError("Real mask carries complex values")
        # scaling the magnitude by m >= 0 keeps the phase, i.e. a plain real product
        out = mask.values * spec.bins
    return Spectrogram(out, spec.config, spec.source_len)


def real_inner(a, b):
    """Real inner product treating complex entries as (re, im) pairs."""
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.sum(a.real * b.real) + np.sum(a.imag * b.imag))
