"""SI-SDR scoring, evaluation reports and the more-noisy interpretation probe."""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import AudioClip, mix_at_snr
from .errors import DegenerateInputError, ShapeError
from .training import NYTT_SNR_RANGE, enhance_many

SI_SDR_CAP_DB = 100.0


def _arr(x):
    return x.samples if isinstance(x, AudioClip) else np.asarray(x, dtype=np.float64)


def si_sdr(estimate, reference):
    """Scale-invariant SDR in dB (no mean removal), clamped to +/-100 dB."""
    e, s = _arr(estimate), _arr(reference)
    if e.shape != s.shape:
        raise ShapeError(f"length mismatch: {e.shape} vs {s.shape}")
    # np.sum is pairwise, so scores do not depend on BLAS kernels
    ss = np.sum(s * s)
    if ss == 0:
        raise DegenerateInputError("SI-SDR reference has zero energy")
    target = (np.sum(e * s) / ss) * s
    num = np.sum(target * target)
    den = np.sum((e - target) ** 2)
    if den == 0:
        return SI_SDR_CAP_DB
    if num == 0:
        return -SI_SDR_CAP_DB
    return float(np.clip(10.0 * np.log10(num / den), -SI_SDR_CAP_DB, SI_SDR_CAP_DB))


def mse(a, b):
    return float(np.mean((_arr(a) - _arr(b)) ** 2))


@dataclass
class EvalReport:
    rows: list
    metadata: dict = field(default_factory=dict)

    @property
    def enhanced(self):
        return np.array([r["si_sdr_db"] for r in self.rows])

    @property
    def inputs(self):
        return np.array([r["input_si_sdr_db"] for r in self.rows])

    @property
    def mean(self):
        return float(np.mean(self.enhanced))

    @property
    def input_mean(self):
        return float(np.mean(self.inputs))

    def aggregates(self):
        return {
            "mean": self.mean,
            "median": float(np.median(self.enhanced)),
            "input_mean": self.input_mean,
            "input_median": float(np.median(self.inputs)),
            "n": len(self.rows),
        }

    def to_dict(self):
        return {"rows": self.rows, "aggregate": self.aggregates(), "metadata": self.metadata}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(d["rows"], d.get("metadata", {}))


def evaluate(model, test_set, model_id="", dataset_id="", seed=None, stft_cfg=None):
    """Enhance every test mixture and score it, and the unprocessed input, against clean."""
    kw = {} if stft_cfg is None else {"cfg": stft_cfg}
    outputs = enhance_many(model, [item.x for item in test_set], **kw)
    rows = []
    for item, out in zip(test_set, outputs):
        rows.append({
            "id": item.x.id,
            "si_sdr_db": si_sdr(out, item.clean),
            "input_si_sdr_db": si_sdr(item.x, item.clean),
            "reference_kind": "clean",
        })
    meta = {"model_id": model_id, "dataset_id": dataset_id, "seed": seed,
            "si_sdr_convention": "no mean removal, clamped to +/-100 dB"}
    return EvalReport(rows, meta)


@dataclass
class ProbeReport:
    rows: list

    def column_means(self):
        keys = ["si_sdr_noisy_target", "si_sdr_more_noisy", "si_sdr_output", "mse_output_x", "mse_output_s"]
        return {k: float(np.mean([r[k] for r in self.rows])) for k in keys}

    def to_dict(self):
        return {"rows": self.rows, "means": self.column_means()}


def interpretation_probe(model, noisy_target_set, add_noise, seed, n_items=None, snr_range=NYTT_SNR_RANGE,
                         stft_cfg=None):
    """Feed more-noisy signals y = x + n_add to ``model`` and compare output against x and s."""
    items = list(noisy_target_set)[:n_items] if n_items else list(noisy_target_set)
    more_noisy = []
    for i, item in enumerate(items):
        rng = np.random.default_rng([0x9B0BE, seed, i])
        y, _ = mix_at_snr(item.x, add_noise, float(rng.uniform(*snr_range)), rng)
        more_noisy.append(y)
    kw = {} if stft_cfg is None else {"cfg": stft_cfg}
    outputs = enhance_many(model, more_noisy, **kw)
    rows = []
    for item, y, out in zip(items, more_noisy, outputs):
        s = item.clean
        rows.append({
            "id": item.x.id,
            "si_sdr_noisy_target": si_sdr(item.x, s),
            "si_sdr_more_noisy": si_sdr(y, s),
            "si_sdr_output": si_sdr(out, s),
            "mse_output_x": mse(out, item.x),
            "mse_output_s": mse(out, s),
        })
    return ProbeReport(rows)


def report_to_json(obj):
    return json.dumps(obj if isinstance(obj, dict) else asdict(obj), indent=1, sort_keys=True)
