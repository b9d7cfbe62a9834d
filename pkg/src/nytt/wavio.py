"""16-bit mono PCM WAV reading and writing on top of the stdlib ``wave`` module."""

import logging
import wave
from pathlib import Path

import numpy as np

from .corpus import AudioClip
from .errors import UnsupportedFormatError

log = logging.getLogger(__name__)

_SCALE = 32768.0


def read_wav(path):
    path = Path(path)
    try:
        fh = wave.open(str(path), "rb")
    except wave.Error as exc:
        # the stdlib rejects anything but integer PCM with "unknown format: N"
        msg = str(exc)
        if "unknown format" in msg:
            raise UnsupportedFormatError("audio_format", msg.split(":")[-1].strip(), "1 (PCM)") from exc
        raise UnsupportedFormatError("riff_header", msg, "RIFF/WAVE") from exc
    with fh:
        if fh.getnchannels() != 1:
            raise UnsupportedFormatError("channels", fh.getnchannels(), 1)
        if fh.getsampwidth() != 2:
            raise UnsupportedFormatError("bits_per_sample", 8 * fh.getsampwidth(), 16)
        rate = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    q = np.frombuffer(raw, dtype="<i2")
    return AudioClip(q.astype(np.float64) / _SCALE, rate, path.stem)


def quantize(samples):
    """Map floats to int16 codes; returns (codes, number of clipped samples)."""
    x = np.asarray(samples, dtype=np.float64)
    clipped = int(np.count_nonzero(np.abs(x) > 1.0))
    q = np.clip(np.round(x * _SCALE), -32768, 32767).astype("<i2")
    return q, clipped


def write_wav(clip, path):
    """Write ``clip`` as 16-bit PCM; returns the count of samples clipped to [-1, 1]."""
    q, clipped = quantize(clip.samples)
    if clipped:
        log.warning("%s: %d samples outside [-1, 1] clipped", path, clipped)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(int(clip.sample_rate))
        fh.writeframes(q.tobytes())
    return clipped
