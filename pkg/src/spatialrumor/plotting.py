"""Figure rendering for the CLI report path (Agg backend, PNG files)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# strip the version stamp so identical data gives identical bytes
_PNG_METADATA = {"Software": None}

STATE_COLORS = {"ignorant": "0.6", "spreader": "tab:red", "stifler": "tab:blue"}


def _save(fig, path, dpi=120):
    fig.savefig(path, dpi=dpi, metadata=_PNG_METADATA)
    plt.close(fig)


def plot_trajectory(traj, path, title=None, contact=None):
    """Spreader and Stifler counts against time, step-wise.

    ``contact`` optionally overlays a contact-process trajectory.
    """
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.step(traj.times, traj.counts[:, 1], where="post", color=STATE_COLORS["spreader"], label="spreaders")
    ax.step(traj.times, traj.counts[:, 2], where="post", color=STATE_COLORS["stifler"], label="stiflers")
    if contact is not None:
        ax.step(contact.times, contact.counts[:, 1], where="post", color="k", lw=0.8, ls="--",
                label="contact process")
    ax.set_xlabel("t")
    ax.set_ylabel("sites")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_meanfield(series, path, title=None):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for col, name in ((0, "ignorant"), (1, "spreader"), (2, "stifler")):
        ax.plot(series.t, series.u[:, col], color=STATE_COLORS[name], label=f"u{col}")
    ax.set_xlabel("t")
    ax.set_ylabel("fraction")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_phase_diagram(diagram, path, title=None):
    """Heat map of survival estimates; a line plot when one axis is trivial."""
    p = diagram.p_hat()
    fig, ax = plt.subplots(figsize=(5.5, 4))
    if min(p.shape) == 1:
        if p.shape[1] == 1:
            x, y, label = diagram.lambdas, p[:, 0], "lambda"
        else:
            x, y, label = diagram.alphas, p[0, :], "alpha"
        lo = np.array([c.interval[0] for c in diagram.cells])
        hi = np.array([c.interval[1] for c in diagram.cells])
        ax.errorbar(x, y, yerr=[y - lo, hi - y], marker="o", capsize=3)
        ax.set_xlabel(label)
        ax.set_ylabel("survival probability")
        ax.set_ylim(-0.02, 1.02)
    else:
        im = ax.imshow(p, origin="lower", aspect="auto", vmin=0, vmax=1, cmap="viridis")
        ax.set_xticks(range(len(diagram.alphas)), [f"{a:g}" for a in diagram.alphas])
        ax.set_yticks(range(len(diagram.lambdas)), [f"{v:g}" for v in diagram.lambdas])
        ax.set_xlabel("alpha")
        ax.set_ylabel("lambda")
        fig.colorbar(im, ax=ax, label="survival probability")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
