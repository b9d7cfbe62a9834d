"""Experiment configuration: a versioned JSON document with desk-scale defaults.

Noise families are bound to role labels (``A``, ``B``, ``C``); the label named by
``test_family`` plays the test-noise role. Each family recording is split into
three disjoint partitions: ``obs`` (noise inside noisy targets), ``add`` (noise
mixed in during training) and ``test``.
"""

import copy
import json

from .errors import ParameterError

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "corpus": {
        "n_clean": 200,
        "clean_duration_s": 2.0,
        "n_test": 100,
        "test_duration_s": 2.0,
        "noise_duration_s": 600.0,
        "families": {"A": "Pink", "B": "White", "C": "Machinery"},
        "test_family": "A",
        "partition": [0.45, 0.9],
        "obs_snr_choices": [0.0, 5.0, 10.0, 15.0],
        "test_snr_choices": [2.5, 7.5, 12.5, 17.5],
    },
    "model": {
        "context": 2,
        "hidden_sizes": [256, 256],
        "input_shift": -3.0,
        "input_scale": 0.3,
        "head_init_scale": 1e-3,
        "level_norm": True,
    },
    "stft": {"frame_shift": 128, "window_len": 512, "dft_size": 512},
    "train": {"epochs": 10, "batch_size": 8, "lr": 1e-3, "segment_s": 1.0},
    # used by `nytt train`
    "strategy": {"kind": "NyTT", "loss": "Time", "iterations": 3, "joint_enhanced": False},
    "bindings": {"n_obs": "A", "n_add": "A", "add_noise_schedule": None},
    "experiments": {
        "seeds": [0, 1, 2],
        "interpretation": {"n_obs": "B", "n_add": "A", "contrast_n_obs": "A", "probe_items": 100},
        "iter_curve": {"n_obs": "A", "n_add": "A", "iterations": 3},
        "mismatch_grid": {
            "n_obs": ["A", "B", "C"],
            "n_add": ["A", "B"],
            "iterations": 3,
            "switch_obs": "B",
            "switch_schedule": ["B", "B", "A"],
        },
        "joint_scaleup": {"clean_count": 20, "n_obs": ["A", "B"], "n_add": "A"},
    },
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "families":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate(cfg):
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ParameterError(f"config schema_version must be {SCHEMA_VERSION}, got {cfg.get('schema_version')}")
    corpus = cfg["corpus"]
    labels = corpus["families"]
    if corpus["test_family"] not in labels:
        raise ParameterError(f"test_family {corpus['test_family']!r} is not a bound family label")
    lo, hi = corpus["partition"]
    if not 0 < lo < hi < 1:
        raise ParameterError("partition must be two increasing fractions inside (0, 1)")
    ex = cfg["experiments"]
    used = [ex["interpretation"]["n_obs"], ex["interpretation"]["n_add"], ex["interpretation"].get("contrast_n_obs"),
            ex["iter_curve"]["n_obs"],
            ex["iter_curve"]["n_add"], *ex["mismatch_grid"]["n_obs"], *ex["mismatch_grid"]["n_add"],
            *ex["mismatch_grid"]["switch_schedule"], *ex["joint_scaleup"]["n_obs"], ex["joint_scaleup"]["n_add"],
            cfg["bindings"]["n_obs"], cfg["bindings"]["n_add"]]
    missing = sorted({u for u in used if u is not None and u not in labels})
    if missing:
        raise ParameterError(f"config refers to unbound family labels {missing}")
    if not ex["seeds"]:
        raise ParameterError("experiments.seeds must be non-empty")
    return cfg


def make_config(override=None):
    return validate(_merge(DEFAULTS, override or {}))


def load_config(path=None):
    if path is None:
        return make_config()
    with open(path) as fh:
        return make_config(json.load(fh))


def dumps(cfg):
    return json.dumps(cfg, indent=1, sort_keys=True)
