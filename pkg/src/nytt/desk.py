"""The synthetic desk benchmark described by a config: clean pools, noise partitions, test set."""

import functools
from pathlib import Path

import numpy as np

from .corpus import (AudioClip, NoiseFamilySpec, build_noisy_target_set, manifest_line, synth_noise,
                     synth_speech)
from .wavio import write_wav

_TAG_CLEAN = 11
_TAG_TEST_CLEAN = 12
_TAG_FAMILY = 13
_TAG_OBS_SET = 14
_TAG_TEST_SET = 15


def item_seed(*parts):
    """Stable 63-bit seed from a tuple of integers."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0] >> 1)


class DeskCorpus:
    """Lazily built, memoised view of the corpus a config describes."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.c = cfg["corpus"]
        self.seed = int(cfg["seed"])

    @functools.cached_property
    def cleans(self):
        return [AudioClip(synth_speech(item_seed(self.seed, _TAG_CLEAN, i), self.c["clean_duration_s"]).samples,
                          id=f"clean-{i:05d}")
                for i in range(self.c["n_clean"])]

    @functools.cached_property
    def test_cleans(self):
        return [AudioClip(synth_speech(item_seed(self.seed, _TAG_TEST_CLEAN, i), self.c["test_duration_s"]).samples,
                          id=f"testclean-{i:05d}")
                for i in range(self.c["n_test"])]

    @functools.lru_cache(maxsize=None)
    def family_recording(self, label):
        labels = sorted(self.c["families"])
        spec = NoiseFamilySpec(self.c["families"][label], item_seed(self.seed, _TAG_FAMILY, labels.index(label)),
                               self.c["noise_duration_s"])
        return synth_noise(spec)

    @functools.lru_cache(maxsize=None)
    def noise(self, label, role):
        """Partition ``role`` in {obs, add, test} of family ``label``."""
        rec = self.family_recording(label).samples
        lo, hi = (int(f * rec.size) for f in self.c["partition"])
        part = {"obs": rec[:lo], "add": rec[lo:hi], "test": rec[hi:]}[role]
        return AudioClip(part, id=f"{label}:{role}")

    @functools.lru_cache(maxsize=None)
    def noisy_targets(self, label, count=None):
        """Noisy-target set x = s + n_obs over the first ``count`` clean clips."""
        labels = sorted(self.c["families"])
        cleans = self.cleans if count is None else self.cleans[:count]
        return tuple(build_noisy_target_set(cleans, self.noise(label, "obs"), self.c["obs_snr_choices"],
                                            item_seed(self.seed, _TAG_OBS_SET, labels.index(label)),
                                            prefix=f"x-{label}"))

    @functools.cached_property
    def test_set(self):
        return tuple(build_noisy_target_set(self.test_cleans, self.noise(self.c["test_family"], "test"),
                                            self.c["test_snr_choices"], item_seed(self.seed, _TAG_TEST_SET),
                                            prefix="test"))

    def write(self, out_dir):
        """Write every clip as WAV and return the manifest lines (one JSON object each)."""
        out = Path(out_dir)
        for sub in ("clean", "noise", "mixture"):
            (out / sub).mkdir(parents=True, exist_ok=True)
        lines = []

        def put(clip, sub, kind, record=None):
            path = Path(sub) / f"{clip.id.replace(':', '_')}.wav"
            write_wav(clip, out / path)
            lines.append(manifest_line(clip.id, path, kind, record))

        for clip in self.cleans + self.test_cleans:
            put(clip, "clean", "clean")
        for label in sorted(self.c["families"]):
            for role in ("obs", "add", "test"):
                put(self.noise(label, role), "noise", "noise")
        for label in sorted(self.c["families"]):
            for item in self.noisy_targets(label):
                put(item.x, "mixture", "mixture", item.record)
        for item in self.test_set:
            put(item.x, "mixture", "mixture", item.record)
        (out / "manifest.jsonl").write_text("\n".join(lines) + "\n")
        return lines
