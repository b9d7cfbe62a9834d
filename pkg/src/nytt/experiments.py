"""Canned experiment grids: interpretation, iter-curve, mismatch-grid and joint-scaleup.

Each experiment trains what it needs through a content-addressed stage cache
(so reruns and overlapping experiments reuse finished models), aggregates
per-seed scores by their median, writes CSV/Markdown tables, a JSON report,
figures, and a verdict on its ordering assertions.
"""

import concurrent.futures
import csv
import hashlib
import io
import json
import logging
import os
import shutil
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import mix_at_snr
from .desk import DeskCorpus
from .dsp import StftConfig
from .metrics import evaluate, interpretation_probe, si_sdr
from .model import ModelArch, checkpoint_bytes, parse_checkpoint
from .training import LossSpec, TrainConfig, TrainedModel, enhance, train_ctt, train_iter_nytt, train_joint

log = logging.getLogger(__name__)

EXPERIMENTS = ("interpretation", "iter-curve", "mismatch-grid", "joint-scaleup")

# ordering tolerances (dB)
MIN_NYTT_GAIN = 1.0
ITER_STEP_TOL = -0.1
ITER_GAIN_SPLIT = 0.5
SWITCH_CTT_GAP = 1.0
JOINT_STEP_TOL = -0.1
JOINT_MIN_SPAN = 0.3


def _canon(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class StageCache:
    """Trained models stored under ``root/<sha256 of stage spec>``; writes are atomic."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def key(self, spec):
        return hashlib.sha256(_canon(spec).encode()).hexdigest()[:20]

    def path(self, spec):
        return self.root / self.key(spec)

    def load(self, spec):
        d = self.path(spec)
        if not (d / "model.ckpt").exists():
            return None
        params, state = parse_checkpoint((d / "model.ckpt").read_bytes())
        meta = json.loads((d / "log.json").read_text())
        return TrainedModel(params, meta["strategy"], meta["log"], meta["seed"], state)

    def get_or_run(self, spec, fn):
        model = self.load(spec)
        if model is not None:
            self.hits += 1
            return model
        self.misses += 1
        t0 = time.perf_counter()
        model = fn()
        elapsed = time.perf_counter() - t0
        tmp = Path(tempfile.mkdtemp(dir=self.root, prefix=".tmp-"))
        (tmp / "model.ckpt").write_bytes(checkpoint_bytes(model.params, model.adam))
        history = [{k: v for k, v in row.items() if k != "wall_time"} for row in model.log]
        (tmp / "log.json").write_text(json.dumps(
            {"strategy": model.strategy, "seed": model.seed, "log": history}, indent=1, sort_keys=True))
        (tmp / "stage.json").write_text(json.dumps(spec, indent=1, sort_keys=True))
        # wall time is kept apart from every deterministic artifact
        (tmp / "timing.json").write_text(json.dumps(
            {"train_seconds": elapsed, "epoch_seconds": [row.get("wall_time") for row in model.log]}))
        target = self.path(spec)
        try:
            tmp.rename(target)
        except OSError:
            shutil.rmtree(tmp, ignore_errors=True)  # a concurrent worker finished first
        return self.load(spec)

    def timings(self):
        out = []
        for d in sorted(self.root.glob("*/timing.json")):
            stage = json.loads((d.parent / "stage.json").read_text())
            out.append({"stage": stage, **json.loads(d.read_text())})
        return out


class Lab:
    """Binds a config to its corpus and stage cache and exposes cached training calls."""

    def __init__(self, cfg, out_dir):
        self.cfg = cfg
        self.corpus = DeskCorpus(cfg)
        self.out_dir = Path(out_dir)
        self.cache = StageCache(self.out_dir / "cache")

    def train_config(self, seed, loss="Time"):
        t, m, s = self.cfg["train"], self.cfg["model"], self.cfg["stft"]
        arch = ModelArch(context=m["context"], feature_bins=s["dft_size"] // 2 + 1,
                         hidden_sizes=tuple(m["hidden_sizes"]), input_shift=m["input_shift"],
                         input_scale=m["input_scale"], head_init_scale=m["head_init_scale"],
                         level_norm=m.get("level_norm", True))
        return TrainConfig(epochs=t["epochs"], batch_size=t["batch_size"], lr=t["lr"], seed=int(seed),
                           segment_s=t["segment_s"], arch=arch, stft=StftConfig(**s), loss=LossSpec(loss))

    def _base(self, seed, loss):
        return {"version": __version__, "corpus": self.cfg["corpus"], "corpus_seed": self.cfg["seed"],
                "model": self.cfg["model"], "stft": self.cfg["stft"], "train": self.cfg["train"],
                "seed": int(seed), "loss": loss}

    def _ctt_spec(self, add, seed, loss, clean_count):
        return {**self._base(seed, loss), "kind": "CTT", "add": add, "clean_count": clean_count}

    def ctt(self, add, seed, loss="Time", clean_count=None):
        cleans = self.corpus.cleans if clean_count is None else self.corpus.cleans[:clean_count]
        cfg = self.train_config(seed, loss)
        return self.cache.get_or_run(self._ctt_spec(add, seed, loss, clean_count),
                                     lambda: train_ctt(cleans, self.corpus.noise(add, "add"), cfg))

    def iter_nytt(self, obs, schedule, seed, loss="Time"):
        schedule = list(schedule)
        cfg = self.train_config(seed, loss)
        base = self._base(seed, loss)

        def runner(stage, fn):
            k = stage[0]
            spec = {**base, "kind": "IterNyTT", "obs": obs, "schedule": schedule[:k + 1]}
            return self.cache.get_or_run(spec, fn)

        noise = [self.corpus.noise(label, "add") for label in schedule]
        return train_iter_nytt(self.corpus.noisy_targets(obs), noise, cfg, runner=runner)

    def nytt(self, obs, add, seed, loss="Time"):
        return self.iter_nytt(obs, [add], seed, loss).models[0]

    def joint(self, clean_count, obs, enhanced, add, seed, loss="Time"):
        cleans = self.corpus.cleans[:clean_count]
        noisy = self.corpus.noisy_targets(obs)[clean_count:]
        cfg = self.train_config(seed, loss)
        enhance_label = obs

        def runner(stage, fn):
            if stage[0] == "enhancer":
                spec = self._ctt_spec(enhance_label, seed, loss, clean_count)
            else:
                spec = {**self._base(seed, loss), "kind": "Joint", "obs": obs, "add": add,
                        "enhanced": bool(enhanced), "clean_count": clean_count}
            return self.cache.get_or_run(spec, fn)

        return train_joint(cleans, noisy, enhanced, self.corpus.noise(add, "add"), cfg,
                           enhance_noise=self.corpus.noise(enhance_label, "add"), runner=runner)

    def evaluate(self, model, model_id=""):
        return evaluate(model, self.corpus.test_set, model_id=model_id, dataset_id="desk-test",
                        seed=model.seed, stft_cfg=StftConfig(**self.cfg["stft"]))


# --- table helpers -------------------------------------------------------------

def _fmt(v):
    if v is None:
        return "--"
    return f"{v:.2f}" if isinstance(v, float) else str(v)


def table_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def table_markdown(header, rows):
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(_fmt(v) for v in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def _median(values):
    return float(np.median(np.asarray(values, dtype=np.float64)))


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


@dataclass
class ExperimentResult:
    name: str
    tables: dict  # table name -> (header, rows)
    report: dict
    checks: list
    signals: dict = None  # waveforms for figures; never serialised

    @property
    def passed(self):
        return all(c.passed for c in self.checks)


# --- the four experiments ---------------------------------------------------------

def run_interpretation(lab):
    ex = lab.cfg["experiments"]["interpretation"]
    seeds = lab.cfg["experiments"]["seeds"]
    obs, add = ex["n_obs"], ex["n_add"]
    contrast = ex.get("contrast_n_obs")
    contrast = None if contrast in (None, obs) else contrast
    test_label = lab.cfg["corpus"]["test_family"]
    stft_cfg = StftConfig(**lab.cfg["stft"])
    per_seed = []
    for seed in seeds:
        time_model = lab.nytt(obs, add, seed, "Time")
        spec_model = lab.nytt(obs, add, seed, "Spec")
        ev_time = lab.evaluate(time_model, "NyTT-Time")
        ev_spec = lab.evaluate(spec_model, "NyTT-Spec")
        train_probe = interpretation_probe(time_model, lab.corpus.noisy_targets(obs), lab.corpus.noise(add, "add"),
                                           seed, n_items=ex["probe_items"], stft_cfg=stft_cfg)
        test_probe = interpretation_probe(time_model, lab.corpus.test_set, lab.corpus.noise(test_label, "test"),
                                          seed, n_items=ex["probe_items"], stft_cfg=stft_cfg)
        row = {"seed": seed, "input": ev_time.input_mean, "time": ev_time.mean, "spec": ev_spec.mean,
               "probe_train": train_probe.column_means(), "probe_test": test_probe.column_means()}
        if contrast:
            # same probe on a model whose n_obs shares the n_add family (reported, not asserted)
            c_model = lab.nytt(contrast, add, seed, "Time")
            row["probe_contrast"] = interpretation_probe(c_model, lab.corpus.noisy_targets(contrast),
                                                         lab.corpus.noise(add, "add"), seed,
                                                         n_items=ex["probe_items"], stft_cfg=stft_cfg).column_means()
        per_seed.append(row)

    def med(path):
        vals = []
        for row in per_seed:
            v = row
            for p in path:
                v = v[p]
            vals.append(v)
        return _median(vals)

    cols = ["si_sdr_noisy_target", "si_sdr_more_noisy", "si_sdr_output"]
    splits = [("Train set", "train"), ("Test set", "test")]
    if contrast:
        splits.append((f"Train set, n_obs={contrast}", "contrast"))
    t1 = [[split, "SI-SDR", *(med([f"probe_{key}", c]) for c in cols)] for split, key in splits]
    mse_rows = [[split, med([f"probe_{key}", "mse_output_x"]), med([f"probe_{key}", "mse_output_s"])]
                for split, key in splits]
    inp, tim, spe = med(["input"]), med(["time"]), med(["spec"])
    tables = {
        "table1_more_noisy": (["Data", "Metric", "Noisy target", "More noisy", "Output"], t1),
        "table1_mse": (["Data", "MSE(output, x)", "MSE(output, s)"],
                       [[r[0], f"{r[1]:.3e}", f"{r[2]:.3e}"] for r in mse_rows]),
        "table2_loss_domain": (["Metric", "Input", "Time", "Spec"], [["SI-SDR", inp, tim, spe]]),
    }
    nt, mn, out = (med(["probe_train", c]) for c in cols)
    mse_x, mse_s = mse_rows[0][1], mse_rows[0][2]
    checks = [
        Check("nytt_time_improves", tim - inp >= MIN_NYTT_GAIN, f"Time {tim:.2f} vs input {inp:.2f} dB"),
        Check("nytt_spec_improves", spe - inp >= MIN_NYTT_GAIN, f"Spec {spe:.2f} vs input {inp:.2f} dB"),
        Check("probe_ordering", nt > out > mn,
              f"noisy target {nt:.2f} > output {out:.2f} > more noisy {mn:.2f} dB"),
        Check("output_closer_to_noisy_target", mse_x < mse_s, f"MSE(out,x)={mse_x:.3e} < MSE(out,s)={mse_s:.3e}"),
    ]
    return ExperimentResult("interpretation", tables, {"per_seed": per_seed}, checks,
                            _spectrogram_example(lab, obs, add, seeds[0], stft_cfg))


def _spectrogram_example(lab, obs, add, seed, stft_cfg):
    model = lab.nytt(obs, add, seed)
    item = lab.corpus.test_set[0]
    rng = np.random.default_rng([0x9B0BE, seed, 0])
    y, _ = mix_at_snr(item.x, lab.corpus.noise(lab.cfg["corpus"]["test_family"], "test"), 0.0, rng)
    out = enhance(model, y, stft_cfg)
    return {"Clean target": item.clean, "Noisy target": item.x, "More noisy": y, "Output": out}


def pseudo_target_scores(result, noisy_set):
    """Mean SI-SDR (vs clean, read through provenance) of each iteration's training targets."""
    return [float(np.mean([si_sdr(t, item.clean) for t, item in zip(targets, noisy_set)]))
            for targets in result.targets]


def run_iter_curve(lab):
    ex = lab.cfg["experiments"]["iter_curve"]
    seeds = lab.cfg["experiments"]["seeds"]
    obs, add, k = ex["n_obs"], ex["n_add"], ex["iterations"]
    per_seed = []
    for seed in seeds:
        res = lab.iter_nytt(obs, [add] * k, seed)
        per_seed.append({
            "seed": seed,
            "pseudo_target": pseudo_target_scores(res, lab.corpus.noisy_targets(obs)),
            "test": [lab.evaluate(m).mean for m in res.models],
            "ctt": lab.evaluate(lab.ctt(add, seed)).mean,
        })
    pseudo = [_median([r["pseudo_target"][i] for r in per_seed]) for i in range(k)]
    test = [_median([r["test"][i] for r in per_seed]) for i in range(k)]
    ctt = _median([r["ctt"] for r in per_seed])
    rows = [[i + 1, pseudo[i], test[i], ctt] for i in range(k)]
    steps = [pseudo[i + 1] - pseudo[i] for i in range(min(k, 3) - 1)]
    last = min(k, 3) - 1
    checks = [
        Check("pseudo_target_non_decreasing", all(d >= ITER_STEP_TOL for d in steps),
              "steps " + ", ".join(f"{d:+.2f}" for d in steps) + " dB"),
        Check("iternytt_beats_nytt", test[last] >= test[0],
              f"IterNyTT({last + 1}) {test[last]:.2f} vs NyTT {test[0]:.2f} dB"),
    ]
    tables = {"iter_curve": (["Iteration", "Noisy-target SI-SDR", "IterNyTT test SI-SDR", "CTT test SI-SDR"], rows)}
    return ExperimentResult("iter-curve", tables, {"per_seed": per_seed, "n_obs": obs, "n_add": add}, checks)


def run_mismatch_grid(lab):
    ex = lab.cfg["experiments"]["mismatch_grid"]
    seeds = lab.cfg["experiments"]["seeds"]
    names = lab.cfg["corpus"]["families"]
    test_label = lab.cfg["corpus"]["test_family"]
    k = ex["iterations"]
    cells = {}
    for obs in ex["n_obs"]:
        for add in ex["n_add"]:
            vals = {"CTT": [], "NyTT": [], "IterNyTT": []}
            for seed in seeds:
                res = lab.iter_nytt(obs, [add] * k, seed)
                vals["NyTT"].append(lab.evaluate(res.models[0]).mean)
                vals["IterNyTT"].append(lab.evaluate(res.models[-1]).mean)
                vals["CTT"].append(lab.evaluate(lab.ctt(add, seed)).mean)
            cells[(obs, add)] = vals
    switch_vals = []
    for seed in seeds:
        res = lab.iter_nytt(ex["switch_obs"], ex["switch_schedule"], seed)
        switch_vals.append(lab.evaluate(res.models[-1]).mean)
    med = {key: {s: _median(v) for s, v in vals.items()} for key, vals in cells.items()}
    switch = _median(switch_vals)

    def label(x):
        return f"{x}:{names[x]}"

    rows = [[label(o), label(a), med[(o, a)]["CTT"], med[(o, a)]["NyTT"], med[(o, a)]["IterNyTT"]]
            for o in ex["n_obs"] for a in ex["n_add"]]
    rows.append([label(ex["switch_obs"]), " -> ".join(ex["switch_schedule"]), None, None, switch])

    checks = []
    matched_add = [a for a in ex["n_add"] if a == test_label]
    other_add = [a for a in ex["n_add"] if a != test_label]
    # (a) n_add matched to the test noise beats a mismatched n_add, per n_obs and strategy
    detail, ok = [], True
    for o in ex["n_obs"]:
        for a_m in matched_add:
            for a_o in other_add:
                for s in ("NyTT", "IterNyTT"):
                    good = med[(o, a_m)][s] > med[(o, a_o)][s]
                    ok &= good
                    detail.append(f"{o}/{s}: {med[(o, a_m)][s]:.2f} {'>' if good else '<='} {med[(o, a_o)][s]:.2f}")
    checks.append(Check("a_add_matched_to_test_wins", ok, "; ".join(detail)))
    # (b) iteration gain depends on n_add matching n_obs
    detail, ok = [], True
    for o in ex["n_obs"]:
        for a in ex["n_add"]:
            gain = med[(o, a)]["IterNyTT"] - med[(o, a)]["NyTT"]
            good = gain >= ITER_GAIN_SPLIT if o == a else gain <= ITER_GAIN_SPLIT
            ok &= good
            detail.append(f"{o}/{a}: {gain:+.2f}{'' if good else ' (!)'}")
    checks.append(Check("b_iteration_gain_needs_add_matching_obs", ok, "; ".join(detail)))
    # (c) n_obs matched to test noise gives the lowest NyTT score per n_add
    detail, ok = [], True
    for a in ex["n_add"]:
        scores = {o: med[(o, a)]["NyTT"] for o in ex["n_obs"]}
        others = [v for o, v in scores.items() if o != test_label]
        good = test_label in scores and all(scores[test_label] < v for v in others)
        ok &= good
        detail.append(f"n_add {a}: " + ", ".join(f"{o}={v:.2f}" for o, v in scores.items()))
    checks.append(Check("c_obs_matched_to_test_is_worst", ok, "; ".join(detail)))
    # (d) the switching schedule ends within SWITCH_CTT_GAP of CTT with the final n_add
    ctt_ref = _median([lab.evaluate(lab.ctt(ex["switch_schedule"][-1], s)).mean for s in seeds])
    checks.append(Check("d_switching_close_to_ctt", switch >= ctt_ref - SWITCH_CTT_GAP,
                        f"switching {switch:.2f} vs CTT {ctt_ref:.2f} dB"))
    report = {"cells": [{"n_obs": o, "n_add": a, **cells[(o, a)]} for (o, a) in cells],
              "switch": {"n_obs": ex["switch_obs"], "schedule": ex["switch_schedule"], "per_seed": switch_vals},
              "seeds": seeds}
    tables = {"mismatch_grid": (["n_obs", "n_add", "CTT", "NyTT", "IterNyTT"], rows)}
    return ExperimentResult("mismatch-grid", tables, report, checks)


def run_joint_scaleup(lab):
    ex = lab.cfg["experiments"]["joint_scaleup"]
    seeds = lab.cfg["experiments"]["seeds"]
    names = lab.cfg["corpus"]["families"]
    test_label = lab.cfg["corpus"]["test_family"]
    n_clean, add = ex["clean_count"], ex["n_add"]
    clean_only = [lab.evaluate(lab.ctt(add, s, clean_count=n_clean)).mean for s in seeds]
    base = _median(clean_only)
    per_obs, rows = {}, []
    for obs in ex["n_obs"]:
        raw = [lab.evaluate(lab.joint(n_clean, obs, False, add, s)).mean for s in seeds]
        enh = [lab.evaluate(lab.joint(n_clean, obs, True, add, s)).mean for s in seeds]
        per_obs[obs] = {"raw": raw, "enhanced": enh}
        rows.append([f"{obs}:{names[obs]}", base, _median(raw), _median(enh)])
    checks = []
    for obs in ex["n_obs"]:
        r, e = _median(per_obs[obs]["raw"]), _median(per_obs[obs]["enhanced"])
        ok = (r - base >= JOINT_STEP_TOL and e - r >= JOINT_STEP_TOL and e - base >= JOINT_MIN_SPAN)
        checks.append(Check(f"ordering_{obs}", ok,
                            f"clean-only {base:.2f} <= +raw {r:.2f} <= +enhanced {e:.2f} dB"))
    if test_label in per_obs:
        matched = _median(per_obs[test_label]["raw"]) - base
        for obs in ex["n_obs"]:
            if obs != test_label:
                gain = _median(per_obs[obs]["raw"]) - base
                checks.append(Check(f"mismatched_obs_gains_more_{obs}", gain > matched,
                                    f"gain with n_obs={obs} {gain:+.2f} vs n_obs={test_label} {matched:+.2f} dB"))
    report = {"clean_only": clean_only, "per_obs": per_obs, "clean_count": n_clean, "seeds": seeds}
    tables = {"joint_scaleup": (["n_obs", "Clean only", "+ noisy", "+ enhanced noisy"], rows)}
    return ExperimentResult("joint-scaleup", tables, report, checks)


RUNNERS = {
    "interpretation": run_interpretation,
    "iter-curve": run_iter_curve,
    "mismatch-grid": run_mismatch_grid,
    "joint-scaleup": run_joint_scaleup,
}


# --- parallel prefetch -----------------------------------------------------------------

def planned_jobs(cfg, name):
    """Independent top-level training jobs an experiment needs, for process-level fan-out."""
    ex = cfg["experiments"]
    seeds = ex["seeds"]
    jobs = []
    if name == "interpretation":
        e = ex["interpretation"]
        jobs += [("iter", e["n_obs"], (e["n_add"],), s, loss) for s in seeds for loss in ("Time", "Spec")]
        if e.get("contrast_n_obs") not in (None, e["n_obs"]):
            jobs += [("iter", e["contrast_n_obs"], (e["n_add"],), s, "Time") for s in seeds]
    elif name == "iter-curve":
        e = ex["iter_curve"]
        jobs += [("iter", e["n_obs"], (e["n_add"],) * e["iterations"], s, "Time") for s in seeds]
        jobs += [("ctt", e["n_add"], s, None) for s in seeds]
    elif name == "mismatch-grid":
        e = ex["mismatch_grid"]
        jobs += [("ctt", a, s, None) for s in seeds for a in e["n_add"]]
        jobs += [("iter", o, (a,) * e["iterations"], s, "Time") for s in seeds for o in e["n_obs"] for a in e["n_add"]]
    elif name == "joint-scaleup":
        e = ex["joint_scaleup"]
        jobs += [("ctt", o, s, e["clean_count"]) for s in seeds for o in {e["n_add"], *e["n_obs"]}]
        jobs += [("joint", e["clean_count"], o, False, e["n_add"], s) for s in seeds for o in e["n_obs"]]
    return jobs


def _run_job(cfg, out_dir, job):
    lab = Lab(cfg, out_dir)
    kind = job[0]
    if kind == "ctt":
        lab.ctt(job[1], job[2], clean_count=job[3])
    elif kind == "iter":
        lab.iter_nytt(job[1], job[2], job[3], job[4])
    elif kind == "joint":
        lab.joint(*job[1:])
    return job


def prefetch(cfg, out_dir, name, threads):
    jobs = planned_jobs(cfg, name)
    if threads <= 1 or not jobs:
        return
    with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
        for job in pool.map(_run_job, [cfg] * len(jobs), [out_dir] * len(jobs), jobs):
            log.info("prefetched %s", job)


def thread_cap():
    try:
        return max(1, int(os.environ.get("NYTT_THREADS", "1")))
    except ValueError:
        return 1


# --- artifacts ----------------------------------------------------------------------------

def write_result(result, out_dir, figures=True):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for tname, (header, rows) in result.tables.items():
        (out / f"{tname}.csv").write_text(table_csv(header, rows))
        (out / f"{tname}.md").write_text(table_markdown(header, rows))
    (out / "report.json").write_text(json.dumps(result.report, indent=1, sort_keys=True))
    verdict = {"experiment": result.name, "passed": result.passed, "checks": [c.to_dict() for c in result.checks]}
    (out / "verdict.json").write_text(json.dumps(verdict, indent=1, sort_keys=True))
    if figures:
        from . import plotting
        plotting.render(result, out)
    return verdict


def run_experiment(name, cfg, out_dir, figures=True, threads=None):
    if name not in RUNNERS:
        raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    out_dir = Path(out_dir)
    prefetch(cfg, out_dir, name, thread_cap() if threads is None else threads)
    lab = Lab(cfg, out_dir)
    result = RUNNERS[name](lab)
    write_result(result, out_dir / name, figures=figures)
    return result
