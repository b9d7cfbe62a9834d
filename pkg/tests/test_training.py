import numpy as np
import pytest

from nytt.corpus import (AudioClip, NoiseFamilySpec, build_noisy_target_set, clean_access_violations, mix_at_snr,
                         synth_noise, synth_speech)
from nytt.dsp import StftConfig
from nytt.errors import ParameterError, ShapeError
from nytt.model import ModelArch, init_params
from nytt.training import (LossSpec, StrategySpec, TrainConfig, batch_loss_and_grad, enhance, loss_and_grad,
                           train_ctt, train_iter_nytt, train_joint, train_nytt)

TINY = ModelArch(context=1, hidden_sizes=(16,))


def _cfg(**kw):
    base = dict(epochs=2, batch_size=4, lr=1e-3, seed=0, segment_s=0.5, arch=TINY)
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def data():
    cleans = [synth_speech(100 + i, 1.0) for i in range(6)]
    obs = synth_noise(NoiseFamilySpec("Pink", 1, 5.0))
    add = synth_noise(NoiseFamilySpec("White", 2, 5.0))
    return cleans, build_noisy_target_set(cleans, obs, [0, 5, 10, 15], seed=1), add


def test_loss_at_init_on_matched_pair():
    clip = synth_speech(3, 1.0)
    value, _ = loss_and_grad(init_params(ModelArch(), 0), clip, clip, LossSpec("Time"))
    assert value <= 1e-6


def test_time_loss_against_zero_target_is_output_power():
    clip = synth_speech(4, 1.0)
    params = init_params(ModelArch(), 0)
    value, _ = loss_and_grad(params, clip, AudioClip(np.zeros(len(clip))), LossSpec("Time"))
    out = enhance(params, clip)
    assert value == pytest.approx(np.mean(out.samples ** 2), rel=1e-12)


def test_loss_rejects_length_mismatch():
    with pytest.raises(ShapeError):
        loss_and_grad(init_params(ModelArch(), 0), AudioClip(np.ones(800)), AudioClip(np.ones(700)),
                      LossSpec("Time"))


@pytest.mark.parametrize("domain", ["Time", "Spec"])
def test_batch_gradient_matches_finite_differences(domain):
    loss = LossSpec(domain)
    arch = ModelArch(context=1, hidden_sizes=(8,), output_kind=loss.mask_kind)
    params = init_params(arch, 1)
    rng = np.random.default_rng(2)
    params.values += rng.normal(0, 0.05, params.values.size)
    inputs = [AudioClip(rng.standard_normal(n) * 0.1) for n in (900, 1300)]
    targets = [AudioClip(rng.standard_normal(n) * 0.1) for n in (900, 1300)]
    _, grad = batch_loss_and_grad(params, inputs, targets, loss)
    h = 1e-5
    for i in rng.choice(params.values.size, 10, replace=False):
        plus, minus = params.copy(), params.copy()
        plus.values[i] += h
        minus.values[i] -= h
        fd = (batch_loss_and_grad(plus, inputs, targets, loss)[0]
              - batch_loss_and_grad(minus, inputs, targets, loss)[0]) / (2 * h)
        assert abs(fd - grad[i]) <= 1e-4 * max(abs(fd), 1e-8) + 1e-12


def test_zero_epochs_leaves_init(data):
    cleans, _, add = data
    model = train_ctt(cleans, add, _cfg(epochs=0))
    assert np.array_equal(model.params.values, init_params(TINY, 0).values)
    assert model.log == []


def test_training_is_deterministic_and_logged(data):
    cleans, _, add = data
    a = train_ctt(cleans, add, _cfg())
    b = train_ctt(cleans, add, _cfg())
    assert np.array_equal(a.params.values, b.params.values)
    assert [r["epoch"] for r in a.log] == [1, 2]
    assert all(np.isfinite(r["mean_loss"]) and r["seed"] == 0 for r in a.log)
    c = train_ctt(cleans, add, _cfg(seed=1))
    assert not np.array_equal(a.params.values, c.params.values)


def test_nytt_never_reads_clean(data):
    _, noisy, add = data
    before = clean_access_violations()
    model = train_nytt(noisy, add, _cfg())
    assert clean_access_violations() == before
    assert model.strategy["kind"] == "NyTT"


def test_iter_nytt_iteration_one_is_nytt(data):
    _, noisy, add = data
    res = train_iter_nytt(noisy, add, _cfg(), iterations=2)
    assert len(res.models) == 2 and len(res.targets) == 2
    ny = train_nytt(noisy, add, _cfg())
    assert np.array_equal(res.models[0].params.values, ny.params.values)
    # second iteration targets are the first model's outputs on x
    assert np.array_equal(res.targets[1][0].samples, enhance(ny, noisy[0].x).samples)
    assert len(res.targets[1][0]) == len(noisy[0].x)


def test_iter_nytt_schedule_and_stage_runner(data):
    _, noisy, add = data
    other = synth_noise(NoiseFamilySpec("Pink", 9, 5.0))
    stages = []

    def runner(stage, fn):
        stages.append(stage)
        return fn()

    train_iter_nytt(noisy, [add, other], _cfg(epochs=1), runner=runner)
    assert stages == [(0, add.id), (1, other.id)]
    with pytest.raises(ParameterError):
        train_iter_nytt(noisy, [add, other], _cfg(), iterations=3)


def test_joint_with_empty_noisy_set_equals_ctt(data):
    cleans, _, add = data
    a = train_joint(cleans, [], False, add, _cfg())
    b = train_ctt(cleans, add, _cfg())
    assert np.array_equal(a.params.values, b.params.values)


def test_joint_enhanced_trains_helper(data):
    cleans, noisy, add = data
    stages = []

    def runner(stage, fn):
        stages.append(stage)
        return fn()

    model = train_joint(cleans[:3], noisy[3:], True, add, _cfg(epochs=1), runner=runner)
    assert stages == [("enhancer", add.id), ("joint",)]
    assert model.strategy["joint_enhanced"] is True


def test_strategy_spec_roundtrip_and_validation():
    spec = StrategySpec("IterNyTT", LossSpec("Spec"), iterations=2, add_noise_schedule=["B", "A"])
    assert StrategySpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ParameterError):
        StrategySpec("IterNyTT", iterations=3, add_noise_schedule=["A"])


def test_training_reduces_loss(data):
    cleans, _, add = data
    cfg = _cfg(epochs=8, lr=3e-3, arch=ModelArch(context=1, hidden_sizes=(32,)))
    model = train_ctt(cleans, add, cfg)
    rng = np.random.default_rng(0)
    inputs = [mix_at_snr(c, add, 5.0, rng)[0] for c in cleans]
    before = batch_loss_and_grad(init_params(cfg.arch, 0), inputs, cleans, cfg.loss)[0]
    after = batch_loss_and_grad(model.params, inputs, cleans, cfg.loss)[0]
    assert after < 0.8 * before


def test_short_clip_enhance_keeps_length():
    out = enhance(init_params(ModelArch(), 0), AudioClip(np.ones(37) * 0.01))
    assert len(out) == 37
    assert isinstance(StftConfig().n_frames(37), int)
