"""Training strategies: clean-target, noisy-target, iterative noisy-target and joint.

Every strategy shares one loop: each epoch visits the target pool in a seeded
random order, synthesises the network input by mixing a fresh crop of the
additive noise into the target, and takes Adam steps on mini-batches. Only
the SNR rule and the target pool differ between strategies. Noisy targets are
read through ``NoisyTarget.x`` only; the clean reference stays behind the
access guard in :mod:`nytt.corpus`.
"""

import enum
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import AudioClip, forbid_clean_access, mix_at_snr
from .dsp import MaskKind, Spectrogram, StftConfig, apply_mask, istft, istft_adjoint, log_amp_features, stft
from .errors import ParameterError, ShapeError, TrainingDivergedError
from .model import AdamState, ModelArch, ModelParams, adam_step, backward, forward_many, init_params

log = logging.getLogger(__name__)

NYTT_SNR_RANGE = (-5.0, 5.0)
REMIX_SNR_CHOICES = (0.0, 5.0, 10.0, 15.0)
_TAG_EPOCH = 0xE90C
_TAG_ITEM = 0x17E3


class LossDomain(str, enum.Enum):
    TIME = "Time"
    SPEC = "Spec"


class StrategyKind(str, enum.Enum):
    CTT = "CTT"
    NYTT = "NyTT"
    ITER_NYTT = "IterNyTT"
    JOINT = "Joint"


@dataclass(frozen=True)
class LossSpec:
    domain: LossDomain = LossDomain.TIME

    def __post_init__(self):
        object.__setattr__(self, "domain", LossDomain(self.domain))

    @property
    def mask_kind(self):
        return MaskKind.COMPLEX if self.domain is LossDomain.TIME else MaskKind.REAL


@dataclass(frozen=True)
class StrategySpec:
    kind: StrategyKind
    loss: LossSpec = LossSpec()
    add_noise_source: str = ""
    nytt_snr_range: tuple = NYTT_SNR_RANGE
    remix_snr_choices: tuple = REMIX_SNR_CHOICES
    iterations: int = 3
    add_noise_schedule: tuple = None
    joint_enhanced: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")
        if self.add_noise_schedule is not None:
            object.__setattr__(self, "add_noise_schedule", tuple(self.add_noise_schedule))
            if len(self.add_noise_schedule) != self.iterations:
                raise ParameterError("add_noise_schedule length must equal iterations")

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "loss": self.loss.domain.value,
            "add_noise_source": self.add_noise_source,
            "nytt_snr_range": list(self.nytt_snr_range),
            "remix_snr_choices": list(self.remix_snr_choices),
            "iterations": self.iterations,
            "add_noise_schedule": None if self.add_noise_schedule is None else list(self.add_noise_schedule),
            "joint_enhanced": self.joint_enhanced,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["loss"] = LossSpec(d.get("loss", "Time"))
        for key in ("nytt_snr_range", "remix_snr_choices"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 8
    lr: float = 1e-4
    seed: int = 0
    segment_s: float = None  # random training crop; None trains on whole clips
    arch: ModelArch = ModelArch()
    stft: StftConfig = StftConfig()
    loss: LossSpec = LossSpec()

    def arch_for_loss(self):
        return replace(self.arch, output_kind=self.loss.mask_kind)

    def to_dict(self):
        return {
            "epochs": self.epochs, "batch_size": self.batch_size, "lr": self.lr, "seed": self.seed,
            "segment_s": self.segment_s, "arch": self.arch_for_loss().to_dict(),
            "stft": dict(self.stft.__dict__), "loss": self.loss.domain.value,
        }


@dataclass
class TrainedModel:
    params: ModelParams
    strategy: dict
    log: list = field(default_factory=list)
    seed: int = 0
    adam: AdamState = None


# --- losses -------------------------------------------------------------------

def _check_pair(inp, tgt):
    if len(inp) != len(tgt) or inp.sample_rate != tgt.sample_rate:
        raise ShapeError(f"input/target mismatch: {len(inp)}@{inp.sample_rate} vs {len(tgt)}@{tgt.sample_rate}")


def batch_loss_and_grad(params, inputs, targets, loss, cfg=StftConfig()):
    """Mean loss over a batch of (input, target) clips and its parameter gradient."""
    for a, b in zip(inputs, targets):
        _check_pair(a, b)
    if params.arch.output_kind is not loss.mask_kind:
        raise ShapeError(f"{loss.domain.value} loss needs a {loss.mask_kind.value}-mask model")
    specs = [stft(x, cfg) for x in inputs]
    masks, tape = forward_many(params, [log_amp_features(s) for s in specs])
    n = len(inputs)
    values, grad_masks = [], []
    for spec, mask, tgt in zip(specs, masks, targets):
        if loss.domain is LossDomain.TIME:
            est = istft(apply_mask(spec, mask)).samples
            resid = est - tgt.samples
            values.append(float(np.mean(resid ** 2)))
            g = istft_adjoint(resid * (2.0 / (resid.size * n)), cfg, spec.source_len)
            # d/dRe(M) + i d/dIm(M) for M*X is G * conj(X)
            grad_masks.append(g * np.conj(spec.bins))
        else:
            mag = np.abs(spec.bins)
            resid = mask.values * mag - np.abs(stft(tgt, cfg).bins)
            values.append(float(np.mean(resid ** 2)))
            grad_masks.append(resid * mag * (2.0 / (resid.size * n)))
    value = float(np.mean(values))
    if not np.isfinite(value):
        raise TrainingDivergedError("non-finite loss", {"ids": [x.id for x in inputs], "losses": values})
    return value, backward(tape, grad_masks)


def loss_and_grad(params, input_clip, target_clip, loss, cfg=StftConfig()):
    return batch_loss_and_grad(params, [input_clip], [target_clip], loss, cfg)


# --- inference ----------------------------------------------------------------

def _params_of(model):
    return model.params if isinstance(model, TrainedModel) else model


def enhance_many(model, clips, cfg=StftConfig(), chunk=16):
    params = _params_of(model)
    out = []
    for start in range(0, len(clips), chunk):
        group = clips[start:start + chunk]
        specs = [stft(c, cfg) for c in group]
        masks, _ = forward_many(params, [log_amp_features(s) for s in specs])
        for clip, spec, mask in zip(group, specs, masks):
            y = istft(apply_mask(spec, mask))
            out.append(AudioClip(y.samples, clip.sample_rate, f"{clip.id}~enh"))
    return out


def enhance(model, clip, cfg=StftConfig()):
    return enhance_many(model, [clip], cfg)[0]


# --- training loop --------------------------------------------------------------

@dataclass
class _Example:
    target: AudioClip
    noise: AudioClip
    snr_rule: str  # "uniform": continuous range; "choice": discrete set


def _draw_snr(rng, rule, strategy):
    if rule == "uniform":
        lo, hi = strategy.nytt_snr_range
        return float(rng.uniform(lo, hi))
    choices = strategy.remix_snr_choices
    return float(choices[int(rng.integers(len(choices)))])


def _crop(clip, seconds, rng):
    if seconds is None:
        return clip
    n = int(round(seconds * clip.sample_rate))
    if n >= len(clip):
        return clip
    start = int(rng.integers(0, len(clip) - n + 1))
    return clip.segment(start, n)


def _train_loop(examples, cfg, strategy):
    if not examples:
        raise ParameterError("training needs a non-empty target pool")
    params = init_params(cfg.arch_for_loss(), cfg.seed)
    state = AdamState.zeros(params.values.size, lr=cfg.lr)
    history = []
    n = len(examples)
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = np.random.default_rng([_TAG_EPOCH, cfg.seed, epoch]).permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            inputs, targets = [], []
            for i in order[start:start + cfg.batch_size]:
                ex = examples[i]
                rng = np.random.default_rng([_TAG_ITEM, cfg.seed, epoch, int(i)])
                target = _crop(ex.target, cfg.segment_s, rng)
                y, _ = mix_at_snr(target, ex.noise, _draw_snr(rng, ex.snr_rule, strategy), rng)
                inputs.append(y)
                targets.append(target)
            value, grad = batch_loss_and_grad(params, inputs, targets, cfg.loss, cfg.stft)
            adam_step(params, grad, state)
            total += value * len(inputs)
        history.append({"epoch": epoch + 1, "mean_loss": total / n, "seed": cfg.seed,
                        "wall_time": time.perf_counter() - t0})
        log.info("%s epoch %d/%d loss %.6g", strategy.kind.value, epoch + 1, cfg.epochs, total / n)
    return TrainedModel(params, strategy.to_dict(), history, cfg.seed, state)


def _with_loss(strategy, kind, cfg):
    strategy = strategy or StrategySpec(kind, cfg.loss)
    return replace(strategy, loss=cfg.loss)


def train_ctt(clean_set, add_noise, cfg, strategy=None):
    """Clean targets, inputs remixed with ``add_noise`` at the discrete SNR set."""
    strategy = _with_loss(strategy, StrategyKind.CTT, cfg)
    examples = [_Example(s, add_noise, "choice") for s in clean_set]
    return _train_loop(examples, cfg, strategy)


def train_nytt(noisy_target_set, add_noise, cfg, strategy=None):
    """Noisy targets x; inputs x + n_add at SNR ~ U[-5, 5] dB measured against x."""
    strategy = _with_loss(strategy, StrategyKind.NYTT, cfg)
    with forbid_clean_access("train_nytt"):
        examples = [_Example(item.x, add_noise, "uniform") for item in noisy_target_set]
        return _train_loop(examples, cfg, strategy)


def train_on_targets(targets, add_noise, cfg, strategy):
    """CTT loop against arbitrary (e.g. pseudo-clean) targets."""
    examples = [_Example(t, add_noise, "choice") for t in targets]
    return _train_loop(examples, cfg, strategy)


def _direct(stage, fn):
    return fn()


@dataclass
class IterNyTTResult:
    models: list
    targets: list  # targets[k] = training targets used by iteration k+1


def train_iter_nytt(noisy_target_set, add_noise_schedule, cfg, iterations=None, strategy=None, runner=_direct):
    """Iterative NyTT.

    Iteration 1 is plain NyTT. Iteration k >= 2 enhances every noisy target with
    model k-1 and trains a freshly initialised model on those pseudo-clean targets
    with the CTT input recipe. ``add_noise_schedule`` is one noise clip or a list
    with one clip per iteration. ``runner(stage, fn)`` lets callers cache stages.
    """
    if isinstance(add_noise_schedule, AudioClip):
        iterations = iterations or (strategy.iterations if strategy else 3)
        schedule = [add_noise_schedule] * iterations
    else:
        schedule = list(add_noise_schedule)
        iterations = iterations or len(schedule)
    if iterations < 1 or len(schedule) != iterations:
        raise ParameterError("iterations must be >= 1 and match the noise schedule")
    strategy = _with_loss(strategy or StrategySpec(StrategyKind.ITER_NYTT, iterations=iterations),
                          StrategyKind.ITER_NYTT, cfg)
    models, targets = [], []
    with forbid_clean_access("train_iter_nytt"):
        current = [item.x for item in noisy_target_set]
        for k in range(iterations):
            targets.append(current)
            if k == 0:
                model = runner((k, schedule[k].id),
                               lambda: train_nytt(noisy_target_set, schedule[0], cfg,
                                                  replace(strategy, kind=StrategyKind.NYTT)))
            else:
                tgt = current
                model = runner((k, schedule[k].id),
                               lambda: train_on_targets(tgt, schedule[k], cfg, strategy))
            models.append(model)
            if k + 1 < iterations:
                current = enhance_many(model, [item.x for item in noisy_target_set], cfg.stft)
    return IterNyTTResult(models, targets)


def train_joint(clean_set, noisy_target_set, enhanced, add_noise, cfg, enhance_noise=None, strategy=None,
                runner=_direct):
    """Pool clean targets with noisy (or CTT-enhanced noisy) targets.

    Clean and enhanced targets get CTT-style inputs; raw noisy targets get the
    NyTT recipe. With ``enhanced`` the noisy set is first cleaned by a CTT model
    trained on ``clean_set`` and ``enhance_noise`` (defaults to ``add_noise``).
    """
    strategy = _with_loss(strategy or StrategySpec(StrategyKind.JOINT, joint_enhanced=enhanced),
                          StrategyKind.JOINT, cfg)
    clean_set = list(clean_set)
    if not clean_set:
        raise ParameterError("train_joint needs a non-empty clean set")
    examples = [_Example(s, add_noise, "choice") for s in clean_set]
    with forbid_clean_access("train_joint"):
        noisy_x = [item.x for item in noisy_target_set]
        if noisy_x and enhanced:
            helper_noise = enhance_noise or add_noise
            helper = runner(("enhancer", helper_noise.id),
                            lambda: train_ctt(clean_set, helper_noise, cfg))
            examples += [_Example(t, add_noise, "choice") for t in enhance_many(helper, noisy_x, cfg.stft)]
        else:
            examples += [_Example(x, add_noise, "uniform") for x in noisy_x]
        return runner(("joint",), lambda: _train_loop(examples, cfg, strategy))
