"""Action-selection policies used by evaluation, serving and chat."""

from __future__ import annotations

import numpy as np

from deepdial.context import DialogueContext
from deepdial.expert import ExpertPolicy
from deepdial.net import QNetwork, forward


class GreedyQPolicy:
    """Greedy over the valid set; ties go to the lowest action index."""

    def __init__(self, net: QNetwork):
        self.net = net

    def select(self, state: np.ndarray, valid: tuple[int, ...],
               context: DialogueContext | None = None) -> int:
        if not valid:
            raise ValueError("valid action set is empty")
        q = forward(self.net, state)
        best = min(valid)
        for a in sorted(valid):
            if q[a] > q[best]:
                best = a
        return best


class ExpertDriver:
    """Adapter exposing the hand-written expert through the policy interface."""

    def __init__(self, rng: np.random.Generator, vary: bool = False):
        self.expert = ExpertPolicy(vary=vary)
        self.rng = rng

    def select(self, state: np.ndarray, valid: tuple[int, ...],
               context: DialogueContext | None = None) -> int:
        if context is None:
            raise ValueError("the expert policy needs the dialogue context")
        return self.expert.select(context, self.rng)
