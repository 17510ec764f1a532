"""Figure rendering for training and evaluation outputs.

Figures are written next to the delimited files they visualise; all
rendering uses the Agg backend so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from deepdial.dqn import EpisodeRecord
from deepdial.evaluate import EpisodeOutcome


def moving_average(values: list[float], window: int) -> np.ndarray:
    if window < 1:
        raise ValueError("window must be >= 1")
    arr = np.asarray(values, dtype=np.float64)
    if len(arr) == 0:
        return arr
    window = min(window, len(arr))
    kernel = np.ones(window) / window
    return np.convolve(arr, kernel, mode="valid")


def render_learning_curve(curve: list[EpisodeRecord], path: str,
                          window: int = 50) -> None:
    """Per-episode reward with a moving average and the epsilon schedule."""
    episodes = [r.episode_index for r in curve]
    rewards = [r.total_reward for r in curve]
    epsilons = [r.epsilon for r in curve]

    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(episodes, rewards, ".", markersize=2, alpha=0.35,
            color="tab:blue", label="episode reward")
    if len(rewards) >= 2:
        smoothed = moving_average(rewards, window)
        offset = len(rewards) - len(smoothed)
        ax.plot(episodes[offset:], smoothed, color="tab:red", linewidth=1.8,
                label=f"moving mean (w={min(window, len(rewards))})")
    ax.set_xlabel("episode")
    ax.set_ylabel("total reward")
    ax.grid(alpha=0.3)
    twin = ax.twinx()
    twin.plot(episodes, epsilons, color="tab:green", linewidth=1.0,
              alpha=0.7, label="epsilon")
    twin.set_ylabel("epsilon")
    twin.set_ylim(0, 1.05)
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = twin.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_eval_report(outcomes: list[EpisodeOutcome], path: str) -> None:
    """Histograms of episode reward and dialogue length."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.8))
    rewards = [o.total_reward for o in outcomes]
    turns = [o.turns for o in outcomes]
    if rewards:
        ax1.hist(rewards, bins=30, color="tab:blue", alpha=0.8)
    ax1.set_xlabel("total reward")
    ax1.set_ylabel("episodes")
    ax1.grid(alpha=0.3)
    if turns:
        ax2.hist(turns, bins=range(0, max(turns) + 2), color="tab:orange",
                 alpha=0.8, align="left")
    ax2.set_xlabel("system turns")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
