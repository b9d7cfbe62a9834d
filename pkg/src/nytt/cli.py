"""``nytt`` command line: synth | train | enhance | eval | experiment."""

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

from . import config as config_mod
from .corpus import AudioClip, read_manifest
from .experiments import EXPERIMENTS, Lab, run_experiment
from .metrics import evaluate
from .model import checkpoint_bytes, load_checkpoint
from .training import TrainedModel, enhance, train_ctt, train_iter_nytt, train_joint, train_nytt
from .wavio import read_wav, write_wav

log = logging.getLogger("nytt")


class _ManifestItem:
    """Test mixture loaded from disk; exposes the same surface as ``NoisyTarget``."""

    def __init__(self, x, clean):
        self.x = x
        self.clean = clean


def _load_config(args):
    cfg = config_mod.load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _prepare_out(path, force, must_be_empty=True):
    out = Path(path)
    if must_be_empty and out.exists() and any(out.iterdir()):
        if not force:
            raise SystemExit(f"error: {out} is not empty; pass --force to overwrite")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args):
    cfg = _load_config(args)
    out = _prepare_out(args.out, args.force)
    lab = Lab(cfg, out)
    lines = lab.corpus.write(out)
    (out / "config.json").write_text(config_mod.dumps(cfg))
    log.info("wrote %d clips and %s", len(lines), out / "manifest.jsonl")
    return 0


def cmd_train(args):
    cfg = _load_config(args)
    out = _prepare_out(args.out, args.force)
    lab = Lab(cfg, out)
    strat, bind = cfg["strategy"], cfg["bindings"]
    seed = cfg["seed"] if args.train_seed is None else args.train_seed
    tcfg = lab.train_config(seed, strat.get("loss", "Time"))
    corpus = lab.corpus
    add = corpus.noise(bind["n_add"], "add")
    kind = strat["kind"]
    if kind == "CTT":
        model = train_ctt(corpus.cleans, add, tcfg)
    elif kind == "NyTT":
        model = train_nytt(corpus.noisy_targets(bind["n_obs"]), add, tcfg)
    elif kind == "IterNyTT":
        sched = bind.get("add_noise_schedule") or [bind["n_add"]] * strat["iterations"]
        res = train_iter_nytt(corpus.noisy_targets(bind["n_obs"]), [corpus.noise(s, "add") for s in sched], tcfg)
        model = res.models[-1]
    elif kind == "Joint":
        n = cfg["experiments"]["joint_scaleup"]["clean_count"]
        model = train_joint(corpus.cleans[:n], corpus.noisy_targets(bind["n_obs"])[n:], strat["joint_enhanced"],
                            add, tcfg, enhance_noise=corpus.noise(bind["n_obs"], "add"))
    else:
        raise SystemExit(f"error: unknown strategy kind {kind!r}")
    (out / "model.ckpt").write_bytes(checkpoint_bytes(model.params, model.adam))
    history = [{"epoch": r["epoch"], "mean_loss": r["mean_loss"], "seed": r["seed"], "strategy": model.strategy}
               for r in model.log]
    (out / "train_log.json").write_text(json.dumps(history, indent=1, sort_keys=True))
    (out / "config.json").write_text(config_mod.dumps(cfg))
    log.info("saved %s", out / "model.ckpt")
    return 0


def cmd_enhance(args):
    params, _ = load_checkpoint(args.model)
    clip = read_wav(args.input)
    out = enhance(params, clip)
    write_wav(AudioClip(out.samples, clip.sample_rate, out.id), args.output)
    return 0


def cmd_eval(args):
    params, _ = load_checkpoint(args.model)
    root = Path(args.manifest).parent
    rows = read_manifest(args.manifest)
    by_id = {r["id"]: r for r in rows}
    items = []
    for r in rows:
        if r["kind"] != "mixture" or not r["id"].startswith(args.prefix):
            continue
        items.append(_ManifestItem(read_wav(root / r["path"]), read_wav(root / by_id[r["clean_id"]]["path"])))
    if not items:
        raise SystemExit(f"error: no mixtures with prefix {args.prefix!r} in {args.manifest}")
    report = evaluate(TrainedModel(params, {}), items, model_id=str(args.model), dataset_id=str(args.manifest))
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    agg = report.aggregates()
    log.info("input %.2f dB -> enhanced %.2f dB over %d clips", agg["input_mean"], agg["mean"], agg["n"])
    return 0


def cmd_experiment(args):
    cfg = _load_config(args)
    out = Path(args.out)
    if (out / args.name).exists() and not args.force and not args.resume:
        raise SystemExit(f"error: {out / args.name} exists; pass --resume to reuse cached stages or --force")
    if args.force and (out / args.name).exists():
        shutil.rmtree(out / args.name)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config_mod.dumps(cfg))
    result = run_experiment(args.name, cfg, out, figures=not args.no_figures)
    for check in result.checks:
        print(f"[{'PASS' if check.passed else 'FAIL'}] {result.name}.{check.name}: {check.detail}")
    for tname, _ in result.tables.items():
        print((out / args.name / f"{tname}.md").read_text())
    return 0 if result.passed else 1


def build_parser():
    p = argparse.ArgumentParser(prog="nytt", description="Noisy-target training for speech enhancement")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="JSON experiment config (defaults to the desk benchmark)")
        sp.add_argument("--seed", type=int, help="override the config's base seed")
        if out:
            sp.add_argument("--out", required=True, help="output directory")
            sp.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")

    sp = sub.add_parser("synth", help="write the synthetic corpus as WAV files plus a manifest")
    common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="train the strategy named in the config")
    common(sp)
    sp.add_argument("--train-seed", type=int, help="training seed (defaults to --seed / config seed)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("enhance", help="enhance one WAV file")
    sp.add_argument("model")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.set_defaults(func=cmd_enhance)

    sp = sub.add_parser("eval", help="score a model on the test mixtures of a manifest")
    sp.add_argument("model")
    sp.add_argument("manifest")
    sp.add_argument("--prefix", default="test-", help="mixture id prefix selecting the test set")
    sp.add_argument("--out", help="write the EvalReport JSON here instead of stdout")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("experiment", help="run one of the canned experiment grids")
    sp.add_argument("name", choices=EXPERIMENTS)
    common(sp)
    sp.add_argument("--resume", action="store_true", help="reuse finished stages in an existing output dir")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
