"""Per-turn reward: confirmation progress blended with data-likeness,
minus a flat dialogue-length charge.

    reward = CR * w + DR * (1 - w) - DL

CR is the fraction of positively confirmed slots after the action; DR
is the probability the demonstration classifier assigns to the executed
action in the pre-action state.
"""

from __future__ import annotations

from dataclasses import dataclass

from deepdial.context import DialogueContext


@dataclass(frozen=True)
class RewardConfig:
    w: float = 0.5
    dialogue_length_penalty: float = 0.1
    slots_to_confirm: int = 3

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError("w must be in [0, 1]")
        if self.dialogue_length_penalty < 0:
            raise ValueError("dialogue length penalty must be >= 0")
        if self.slots_to_confirm < 1:
            raise ValueError("slots_to_confirm must be >= 1")

    @property
    def min_reward(self) -> float:
        return -self.dialogue_length_penalty

    @property
    def max_reward(self) -> float:
        return 1.0 - self.dialogue_length_penalty


def confirmation_ratio(context: DialogueContext, cfg: RewardConfig) -> float:
    """Positively confirmed slots over slots-to-confirm, on the post-action context."""
    return len(context.confirmed) / cfg.slots_to_confirm


def compute_reward(context_after: DialogueContext, dr: float,
                   cfg: RewardConfig) -> float:
    """Blend confirmation ratio and data-likeness; charge the length penalty."""
    if not 0.0 < dr <= 1.0:
        raise ValueError(f"data-likeness must be in (0, 1], got {dr}")
    cr = confirmation_ratio(context_after, cfg)
    return cr * cfg.w + dr * (1.0 - cfg.w) - cfg.dialogue_length_penalty
