"""Synthetic speech/noise generation, SNR-controlled mixing and dataset building.

All generators are pure functions of their arguments: a given (spec, seed)
always produces bit-identical samples. Per-item randomness is derived from
``(seed, index)`` so serial and parallel construction agree.
"""

import contextlib
import contextvars
import enum
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import CleanAccessError, DegenerateInputError, ParameterError

SAMPLE_RATE = 16000
TARGET_RMS = 0.05

# stream tags keep the rng streams of different generators disjoint
_TAG_SPEECH = 0x5EEC
_TAG_NOISE = 0x4015E
_TAG_MIX = 0x313
_TAG_MACHINE = 0xAC1E


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ParameterError("AudioClip needs a non-empty 1-D sample array")
        if self.sample_rate <= 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ParameterError(f"clip {self.id!r} contains non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate

    def power(self):
        return float(np.mean(self.samples ** 2))

    def segment(self, start, length, id=None):
        if start < 0 or start + length > len(self):
            raise ParameterError(f"segment [{start}, {start + length}) outside clip of {len(self)}")
        return AudioClip(self.samples[start:start + length], self.sample_rate,
                         id or f"{self.id}[{start}:{start + length}]")


class NoiseFamily(str, enum.Enum):
    WHITE = "White"
    PINK = "Pink"
    MACHINERY = "Machinery"
    BABBLE = "BabbleProxy"


@dataclass(frozen=True)
class NoiseFamilySpec:
    family: NoiseFamily
    seed: int
    duration_s: float

    def __post_init__(self):
        object.__setattr__(self, "family", NoiseFamily(self.family))
        if not self.duration_s > 0:
            raise ParameterError(f"duration_s must be positive, got {self.duration_s}")


@dataclass(frozen=True)
class MixtureRecord:
    """Bookkeeping for one ``clean + noise_scale * noise[offset:offset+len]`` mixture."""

    clean_id: str
    noise_id: str
    snr_db: float
    noise_scale: float
    mixture_id: str
    noise_offset: int = 0

    def to_dict(self):
        return dict(self.__dict__)


def _rms_normalize(x, rms=TARGET_RMS):
    p = np.sqrt(np.mean(x ** 2))
    if p == 0:
        raise DegenerateInputError("cannot RMS-normalize an all-zero signal")
    return x * (rms / p)


def _smooth_track(rng, n, sr, lo, hi, step_s):
    """Random targets every ~step_s seconds joined by cosine interpolation."""
    knots = max(2, int(np.ceil(n / (step_s * sr))) + 2)
    values = rng.uniform(lo, hi, size=knots)
    pos = np.arange(n) / (step_s * sr)
    i = np.floor(pos).astype(int)
    frac = pos - i
    w = 0.5 - 0.5 * np.cos(np.pi * frac)
    return values[i] * (1 - w) + values[i + 1] * w


def _syllable_envelope(rng, n, sr):
    """Words of 2-4 raised-cosine syllables separated by silent pauses."""
    env = np.zeros(n)
    t = int(rng.uniform(0.05, 0.25) * sr)
    while t < n:
        for _ in range(rng.integers(2, 5)):
            if t >= n:
                break
            length = int(rng.uniform(0.12, 0.28) * sr)
            amp = rng.uniform(0.5, 1.0)
            seg = amp * np.sin(np.pi * np.arange(length) / length) ** 1.5
            stop = min(n, t + length)
            env[t:stop] = np.maximum(env[t:stop], seg[:stop - t])
            t += int(length * rng.uniform(0.7, 0.95))
        t += int(rng.uniform(0.2, 0.4) * sr)
    return env


def _speech_samples(rng, n, sr):
    f0 = _smooth_track(rng, n, sr, 0.85, 1.15, 0.25) * rng.uniform(100.0, 220.0)
    f0 = np.clip(f0, 80.0, 300.0)
    formants = [
        (_smooth_track(rng, n, sr, 300.0, 900.0, 0.18), 90.0, 1.0),
        (_smooth_track(rng, n, sr, 900.0, 2400.0, 0.18), 130.0, 0.6),
        (_smooth_track(rng, n, sr, 2400.0, 3500.0, 0.25), 200.0, 0.35),
    ]
    env = _syllable_envelope(rng, n, sr)
    phase = 2.0 * np.pi * np.cumsum(f0) / sr
    out = np.zeros(n)
    nyq_guard = 0.45 * sr
    for h in range(1, int(nyq_guard // 80.0) + 1):
        fh = h * f0
        live = fh < nyq_guard
        if not live.any():
            break
        gain = np.zeros(n)
        for centre, bw, weight in formants:
            gain += weight / (1.0 + ((fh - centre) / (0.5 * bw)) ** 2)
        gain = (gain + 0.02) / np.sqrt(h)
        out += np.where(live, gain, 0.0) * np.sin(h * phase)
    return out * env


def synth_speech(seed, duration_s, sample_rate=SAMPLE_RATE):
    """Pseudo-speech: formant-shaped harmonics with syllable rhythm and pauses."""
    if not 0.5 <= duration_s <= 60.0:
        raise ParameterError(f"duration_s must lie in [0.5, 60], got {duration_s}")
    n = int(round(duration_s * sample_rate))
    rng = np.random.default_rng([_TAG_SPEECH, seed])
    x = _rms_normalize(_speech_samples(rng, n, sample_rate))
    return AudioClip(x, sample_rate, f"speech-{seed}")


def _pink(rng, n):
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.arange(spec.size, dtype=np.float64)
    f[0] = np.inf
    return np.fft.irfft(spec / np.sqrt(f), n)


def _machinery(rng, n, sr):
    # the machine itself (tones, resonance) is fixed; the seed only moves phases and noise
    fixed = np.random.default_rng(_TAG_MACHINE)
    freqs = np.sort(fixed.uniform(50.0, 400.0, size=3))
    amps = fixed.uniform(0.5, 1.0, size=3)
    t = np.arange(n) / sr
    tones = sum(a * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
                for f, a in zip(freqs, amps))
    sos = sps.butter(4, [1000.0, 1400.0], btype="bandpass", fs=sr, output="sos")
    band = sps.sosfilt(sos, rng.standard_normal(n))
    tones = _rms_normalize(tones, 1.0)
    band = _rms_normalize(band, 1.0)
    return np.sqrt(0.6) * tones + np.sqrt(0.4) * band


def _babble(rng, n, sr, talkers=8):
    total = np.zeros(n)
    chunk = 60 * sr
    for k in range(talkers):
        voice = np.empty(n)
        for start in range(0, n, chunk):
            stop = min(n, start + chunk)
            sub = np.random.default_rng([_TAG_SPEECH, int(rng.integers(2**62)), k])
            voice[start:stop] = _speech_samples(sub, stop - start, sr)
        total += _rms_normalize(voice)
    return total


def synth_noise(spec, sample_rate=SAMPLE_RATE):
    n = int(round(spec.duration_s * sample_rate))
    if n < 1:
        raise ParameterError("noise duration shorter than one sample")
    rng = np.random.default_rng([_TAG_NOISE, spec.seed])
    if spec.family is NoiseFamily.WHITE:
        x = rng.standard_normal(n)
    elif spec.family is NoiseFamily.PINK:
        x = _pink(rng, n)
    elif spec.family is NoiseFamily.MACHINERY:
        x = _machinery(rng, n, sample_rate)
    else:
        x = _babble(rng, n, sample_rate)
    return AudioClip(_rms_normalize(x), sample_rate, f"{spec.family.value}-{spec.seed}")


def snr_db(target, noise):
    """SNR of ``target`` over ``noise`` using full-clip mean power."""
    return 10.0 * np.log10(np.mean(np.asarray(target) ** 2) / np.mean(np.asarray(noise) ** 2))


def mix_at_snr(clean, noise, snr, rng, mixture_id=None):
    """Add a random crop of ``noise`` to ``clean`` at ``snr`` dB.

    ``clean`` is whichever signal plays the target role; for more-noisy synthesis
    that is the noisy target itself.
    """
    if clean.sample_rate != noise.sample_rate:
        raise ParameterError(f"sample rates differ: {clean.sample_rate} vs {noise.sample_rate}")
    n = len(clean)
    if len(noise) < n:
        raise ParameterError(f"noise ({len(noise)} samples) shorter than target ({n})")
    offset = int(rng.integers(0, len(noise) - n + 1))
    seg = noise.samples[offset:offset + n]
    p_clean = np.mean(clean.samples ** 2)
    p_noise = np.mean(seg ** 2)
    if p_clean == 0 or p_noise == 0:
        raise DegenerateInputError(f"zero-power {'target' if p_clean == 0 else 'noise'} in mix_at_snr")
    g = float(np.sqrt(p_clean / (p_noise * 10.0 ** (snr / 10.0))))
    mixture_id = mixture_id or f"{clean.id}+{noise.id}@{offset}"
    record = MixtureRecord(clean.id, noise.id, float(snr), g, mixture_id, offset)
    return AudioClip(clean.samples + g * seg, clean.sample_rate, mixture_id), record


def remix(clean, noise, record):
    """Rebuild a mixture from its record; bit-identical to the original."""
    seg = noise.samples[record.noise_offset:record.noise_offset + len(clean)]
    return AudioClip(clean.samples + record.noise_scale * seg, clean.sample_rate, record.mixture_id)


# --- clean-reference access guard -------------------------------------------

_clean_forbidden = contextvars.ContextVar("clean_forbidden", default=None)
_guard_violations = [0]


@contextlib.contextmanager
def forbid_clean_access(who="strategy"):
    """Within this block, reading ``NoisyTarget.clean`` raises."""
    token = _clean_forbidden.set(who)
    try:
        yield
    finally:
        _clean_forbidden.reset(token)


def clean_access_violations():
    return _guard_violations[0]


@dataclass
class NoisyTarget:
    """A fixed mixture ``x = s + g*n`` with provenance kept behind a guard."""

    x: AudioClip
    record: MixtureRecord
    _clean: AudioClip = field(repr=False)
    _noise: AudioClip = field(repr=False)

    @property
    def clean(self):
        who = _clean_forbidden.get()
        if who is not None:
            _guard_violations[0] += 1
            raise CleanAccessError(f"{who} may not read the clean component of {self.x.id}")
        return self._clean

    @property
    def noise_source(self):
        return self._noise


def build_noisy_target_set(cleans, noise_source, snr_choices, seed, prefix="mix"):
    """One mixture per clean clip, SNR drawn uniformly from ``snr_choices``."""
    cleans = list(cleans)
    choices = [float(s) for s in snr_choices]
    if not cleans or not choices:
        raise ParameterError("build_noisy_target_set needs clean clips and SNR choices")
    out = []
    for i, s in enumerate(cleans):
        rng = np.random.default_rng([_TAG_MIX, seed, i])
        snr = choices[int(rng.integers(len(choices)))]
        x, rec = mix_at_snr(s, noise_source, snr, rng, mixture_id=f"{prefix}-{i:05d}")
        out.append(NoisyTarget(x, rec, s, noise_source))
    return out


# --- manifests ----------------------------------------------------------------

def manifest_line(id, path, kind, record=None):
    row = {"id": id, "path": str(path), "kind": kind}
    if record is not None:
        row.update(clean_id=record.clean_id, noise_id=record.noise_id, snr_db=record.snr_db,
                   noise_scale=record.noise_scale, noise_offset=record.noise_offset)
    return json.dumps(row, sort_keys=True)


def read_manifest(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
