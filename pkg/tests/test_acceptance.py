"""Acceptance suite: one test per numbered criterion, each printing a PASS/FAIL line.

Criteria 5-9 run the four canned experiments on the full desk benchmark
(200 clean clips, 3 noise families, 3 seeds, orderings on the per-seed median).
That takes a while on one core; trained stages land in a content-addressed
cache, so pointing ``NYTT_ACCEPTANCE_DIR`` at a persistent directory makes
reruns cheap. By default a fresh temporary directory is used.
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from nytt import config as config_mod
from nytt.corpus import AudioClip, NoiseFamilySpec, mix_at_snr, snr_db, synth_noise, synth_speech
from nytt.dsp import Spectrogram, StftConfig, istft, istft_adjoint, real_inner, stft, stft_adjoint
from nytt.experiments import Lab, run_experiment
from nytt.metrics import si_sdr
from nytt.model import ModelArch, checkpoint_bytes, init_params
from nytt.training import LossSpec, loss_and_grad

from conftest import TINY_OVERRIDE

pytestmark = pytest.mark.acceptance

ROUNDTRIP_TOL = 1e-6
ADJOINT_TOL = 1e-10
DSP_BUDGET_S = 60.0
GRAD_TOL = 1e-3
GRAD_BUDGET_S = 120.0
MIX_TOL_DB = 1e-9
SI_SDR_TOL_DB = 1e-9
TRAIN_BUDGET_S = 600.0


@pytest.fixture(scope="session")
def desk_dir(tmp_path_factory):
    env = os.environ.get("NYTT_ACCEPTANCE_DIR")
    if env:
        path = Path(env)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp("desk")


@pytest.fixture(scope="session")
def desk_cfg():
    return config_mod.make_config()


_results = {}


@pytest.fixture(scope="session")
def experiment(desk_dir, desk_cfg):
    def get(name):
        if name not in _results:
            _results[name] = run_experiment(name, desk_cfg, desk_dir, figures=True)
        return _results[name]
    return get


def _check_lines(result, names):
    checks = {c.name: c for c in result.checks}
    return [checks[n] for n in names]


# 1 ---------------------------------------------------------------------------------

def test_c1_dsp_exactness(criterion):
    cfg = StftConfig()
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    worst_rt, worst_adj = 0.0, 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 8001))
        x = rng.standard_normal(n)
        spec = stft(AudioClip(x), cfg)
        worst_rt = max(worst_rt, float(np.max(np.abs(istft(spec).samples - x))))
        z = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
        g = rng.standard_normal(n)
        lhs, rhs = real_inner(spec.bins, z), float(np.dot(x, stft_adjoint(z, cfg, n)))
        worst_adj = max(worst_adj, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
        lhs = float(np.dot(istft(Spectrogram(z, cfg, n)).samples, g))
        rhs = real_inner(z, istft_adjoint(g, cfg, n))
        worst_adj = max(worst_adj, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    elapsed = time.perf_counter() - t0
    ok = worst_rt <= ROUNDTRIP_TOL and worst_adj <= ADJOINT_TOL and elapsed < DSP_BUDGET_S
    criterion(1, ok, f"round-trip max {worst_rt:.2e}, adjoint rel {worst_adj:.2e}, {elapsed:.1f} s")
    assert ok


# 2 ---------------------------------------------------------------------------------

def test_c2_gradient_fidelity(criterion):
    rng = np.random.default_rng(7)
    s = synth_speech(1, 0.5).segment(0, 3840)  # T = 30 frames
    y, _ = mix_at_snr(s, synth_noise(NoiseFamilySpec("White", 1, 1.0)), 0.0, rng)
    t0 = time.perf_counter()
    worst = {}
    for domain in ("Time", "Spec"):
        loss = LossSpec(domain)
        params = init_params(ModelArch(output_kind=loss.mask_kind), 3)
        params.values += rng.standard_normal(params.values.size) * 0.02
        _, grad = loss_and_grad(params, y, s, loss)
        errs = []
        for i in rng.choice(params.values.size, 20, replace=False):
            h, v = 1e-4, params.values[i]
            params.values[i] = v + h
            up, _ = loss_and_grad(params, y, s, loss)
            params.values[i] = v - h
            down, _ = loss_and_grad(params, y, s, loss)
            params.values[i] = v
            fd = (up - down) / (2 * h)
            errs.append(abs(fd - grad[i]) / max(abs(fd), abs(grad[i]), 1e-30))
        worst[domain] = max(errs)
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= GRAD_TOL and elapsed < GRAD_BUDGET_S
    criterion(2, ok, f"max rel err Time {worst['Time']:.1e}, Spec {worst['Spec']:.1e}, {elapsed:.1f} s")
    assert ok


# 3 ---------------------------------------------------------------------------------

def test_c3_mixing_exactness(criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(16, 4000))
        clean = AudioClip(rng.standard_normal(n) * 10 ** rng.uniform(-3, 0))
        noise = AudioClip(rng.standard_normal(n + int(rng.integers(0, 4000))) * 10 ** rng.uniform(-3, 0))
        target = float(rng.uniform(-20, 30))
        mix, rec = mix_at_snr(clean, noise, target, rng)
        residual = mix.samples - clean.samples
        worst = max(worst, abs(snr_db(clean.samples, residual) - target))
    ok = worst <= MIX_TOL_DB
    criterion(3, ok, f"max |SNR error| {worst:.2e} dB over 1000 triples")
    assert ok


# 4 ---------------------------------------------------------------------------------

def _direct_si_sdr(e, s):
    alpha = math.fsum(a * b for a, b in zip(e, s)) / math.fsum(b * b for b in s)
    num = math.fsum((alpha * b) ** 2 for b in s)
    den = math.fsum((a - alpha * b) ** 2 for a, b in zip(e, s))
    return max(-100.0, min(100.0, 10 * math.log10(num / den)))


def test_c4_si_sdr_oracle(criterion):
    rng = np.random.default_rng(4)
    worst, worst_scale, caps = 0.0, 0.0, True
    for _ in range(1000):
        n = int(rng.integers(2, 2000))
        s = rng.standard_normal(n)
        e = s + 10 ** rng.uniform(-2, 1) * rng.standard_normal(n)
        value = si_sdr(e, s)
        worst = max(worst, abs(value - _direct_si_sdr(e.tolist(), s.tolist())))
        c = 10 ** rng.uniform(-3, 3)
        worst_scale = max(worst_scale, abs(si_sdr(c * e, s) - value))
        caps &= si_sdr(c * s, s) == 100.0
    ok = worst <= SI_SDR_TOL_DB and worst_scale <= SI_SDR_TOL_DB and caps
    criterion(4, ok, f"max |diff| vs direct {worst:.2e} dB, scale invariance {worst_scale:.2e} dB, cap ok={caps}")
    assert ok


# 5-9 ---------------------------------------------------------------------------------

def test_c5_nytt_works(criterion, experiment, desk_dir):
    result = experiment("interpretation")
    checks = _check_lines(result, ["nytt_time_improves", "nytt_spec_improves"])
    timings = [t["train_seconds"] for t in Lab(config_mod.make_config(), desk_dir).cache.timings()
               if t["stage"].get("kind") == "IterNyTT" and len(t["stage"]["schedule"]) == 1]
    slowest = max(timings)
    ok = all(c.passed for c in checks) and slowest < TRAIN_BUDGET_S
    criterion(5, ok, "; ".join(c.detail for c in checks) + f"; slowest NyTT run {slowest:.0f} s")
    assert ok


def test_c6_interpretation(criterion, experiment):
    result = experiment("interpretation")
    checks = _check_lines(result, ["probe_ordering", "output_closer_to_noisy_target"])
    ok = all(c.passed for c in checks)
    criterion(6, ok, "; ".join(c.detail for c in checks))
    assert ok


def test_c7_iteration(criterion, experiment):
    result = experiment("iter-curve")
    ok = result.passed
    criterion(7, ok, "; ".join(c.detail for c in result.checks))
    assert ok


def test_c8_mismatch(criterion, experiment):
    result = experiment("mismatch-grid")
    parts = [f"({c.name[0]}) {'ok' if c.passed else 'FAIL'}: {c.detail}" for c in result.checks]
    ok = result.passed
    criterion(8, ok, " | ".join(parts))
    assert ok


def test_c9_joint(criterion, experiment):
    result = experiment("joint-scaleup")
    ok = result.passed
    criterion(9, ok, "; ".join(c.detail for c in result.checks))
    assert ok


# 10 ---------------------------------------------------------------------------------

def _tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and "cache" not in p.relative_to(root).parts}


def test_c10_determinism(criterion, tmp_path, desk_dir, desk_cfg):
    # every experiment on a reduced config, twice in fresh directories
    cfg = config_mod.make_config(TINY_OVERRIDE)
    trees = []
    for run in ("a", "b"):
        for name in ("interpretation", "iter-curve", "mismatch-grid", "joint-scaleup"):
            run_experiment(name, cfg, tmp_path / run, figures=True)
        trees.append(_tree_bytes(tmp_path / run))
    small_ok = trees[0] == trees[1] and len(trees[0]) > 0
    # one full-scale stage retrained from scratch must match its cached checkpoint
    lab = Lab(desk_cfg, desk_dir)
    cached = lab.nytt("A", "A", desk_cfg["experiments"]["seeds"][0])
    fresh_lab = Lab(desk_cfg, tmp_path / "fresh")
    fresh = fresh_lab.nytt("A", "A", desk_cfg["experiments"]["seeds"][0])
    stage_ok = checkpoint_bytes(cached.params, cached.adam) == checkpoint_bytes(fresh.params, fresh.adam)
    ok = small_ok and stage_ok
    criterion(10, ok, f"{len(trees[0])} report files identical={small_ok}; full-scale NyTT stage identical={stage_ok}")
    assert ok
