"""Matplotlib figures written next to each experiment's tables."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .dsp import StftConfig, stft  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
}

# fixed metadata keeps PNG bytes identical across reruns
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path


def _table(result, name):
    header, rows = result.tables[name]
    return header, rows


def plot_iter_curve(result, path):
    _, rows = _table(result, "iter_curve")
    it = [r[0] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 2.6))
        ax.plot(it, [r[1] for r in rows], "o--", label="noisy target")
        ax.plot(it, [r[2] for r in rows], "s-", label="IterNyTT")
        ax.axhline(rows[0][3], color="k", lw=0.8, ls=":", label="CTT")
        ax.set_xticks(it)
        ax.set_xlabel("iteration")
        ax.set_ylabel("SI-SDR [dB]")
        ax.legend(frameon=False)
        return _save(fig, path)


def _grouped_bars(ax, labels, series):
    width = 0.8 / len(series)
    x = np.arange(len(labels))
    for i, (name, values) in enumerate(series.items()):
        vals = [np.nan if v is None else v for v in values]
        ax.bar(x + (i - (len(series) - 1) / 2) * width, vals, width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("SI-SDR [dB]")
    ax.legend(frameon=False, ncol=len(series))


def plot_mismatch_grid(result, path):
    _, rows = _table(result, "mismatch_grid")
    labels = [f"{r[0].split(':')[0]}/{r[1]}" for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 2.8))
        _grouped_bars(ax, labels, {"CTT": [r[2] for r in rows], "NyTT": [r[3] for r in rows],
                                   "IterNyTT": [r[4] for r in rows]})
        ax.set_xlabel("n_obs / n_add")
        finite = [v for r in rows for v in r[2:] if v is not None]
        ax.set_ylim(min(finite) - 2.0, max(finite) + 1.0)
        return _save(fig, path)


def plot_joint_scaleup(result, path):
    header, rows = _table(result, "joint_scaleup")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 2.6))
        _grouped_bars(ax, [r[0] for r in rows], {h: [r[i + 1] for r in rows] for i, h in enumerate(header[1:])})
        finite = [v for r in rows for v in r[1:]]
        ax.set_ylim(min(finite) - 1.0, max(finite) + 1.0)
        return _save(fig, path)


def plot_interpretation(result, path):
    header, rows = _table(result, "table2_loss_domain")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.0, 2.4))
        ax.bar(header[1:], rows[0][1:], color=["0.6", "C0", "C1"])
        ax.set_ylabel("SI-SDR [dB]")
        return _save(fig, path)


def plot_spectrograms(signals, path, cfg=StftConfig()):
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(signals), figsize=(2.0 * len(signals), 2.2), sharey=True)
        for ax, (name, clip) in zip(axes, signals.items()):
            mag = 20 * np.log10(np.maximum(np.abs(stft(clip, cfg).bins), 1e-6))
            dur = len(clip) / clip.sample_rate
            ax.imshow(mag, origin="lower", aspect="auto", vmin=-60, vmax=20, cmap="magma",
                      extent=[0, dur, 0, clip.sample_rate / 2000])
            ax.set_title(name)
            ax.set_xlabel("time [s]")
        axes[0].set_ylabel("frequency [kHz]")
        return _save(fig, path)


def render(result, out_dir):
    out = Path(out_dir)
    paths = []
    if result.name == "iter-curve":
        paths.append(plot_iter_curve(result, out / "iter_curve.png"))
    elif result.name == "mismatch-grid":
        paths.append(plot_mismatch_grid(result, out / "mismatch_grid.png"))
    elif result.name == "joint-scaleup":
        paths.append(plot_joint_scaleup(result, out / "joint_scaleup.png"))
    elif result.name == "interpretation":
        paths.append(plot_interpretation(result, out / "loss_domain.png"))
        if result.signals:
            paths.append(plot_spectrograms(result.signals, out / "spectrograms.png"))
    return paths
