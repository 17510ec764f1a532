"""Hand-written demonstration policy and the corpus generator.

The expert follows the canonical task flow: greet, request unfilled
slots, confirm filled ones, retrieve, provide, offer more, close. With
``vary`` enabled it randomises request granularity and the confirmation
style so the demonstration corpus covers a broader slice of the act
catalog, including apologies for low-confidence fills.
"""

from __future__ import annotations

import numpy as np

from deepdial.acts import (ASK_MORE, CLOSING, GREETING, PROVIDE_KNOWN,
                           PROVIDE_UNKNOWN, RETRIEVE, SLOTS, DialogueAct,
                           act_index)
from deepdial.constraints import APOLOGY_CONFIDENCE, DemonstrationCorpus
from deepdial.context import DialogueContext
from deepdial.datapack import DataPack
from deepdial.environment import DialogueEnvironment, EnvConfig
from deepdial.simulator import NoiseConfig


class ExpertPolicy:
    """Context-driven policy; every act it picks is legitimate by construction."""

    def __init__(self, vary: bool = False):
        self.vary = vary

    def select(self, context: DialogueContext,
               rng: np.random.Generator) -> int:
        if context.turns == 0:
            return GREETING
        if context.declined_more:
            return CLOSING
        if context.info_provided:
            return ASK_MORE
        if context.lookup_done:
            return PROVIDE_KNOWN if context.retrieved is not None else PROVIDE_UNKNOWN
        if context.all_confirmed():
            return RETRIEVE

        unfilled = sorted(context.unfilled(), key=SLOTS.index)
        if unfilled:
            slots = tuple(unfilled)
            if self.vary and len(slots) > 1 and rng.random() < 0.4:
                slots = (slots[int(rng.integers(len(slots)))],)
            return act_index(DialogueAct("Request", slots))

        shaky = sorted((s for s in SLOTS
                        if s not in context.confirmed
                        and context.filled[s].confidence < APOLOGY_CONFIDENCE),
                       key=SLOTS.index)
        if self.vary and shaky and rng.random() < 0.5:
            return act_index(DialogueAct("Apology", tuple(shaky)))

        unconfirmed = tuple(sorted((s for s in SLOTS if s not in context.confirmed),
                                   key=SLOTS.index))
        kind = "ImpConfirm"
        if self.vary and rng.random() < 0.3:
            kind = "ExpConfirm"
        return act_index(DialogueAct(kind, unconfirmed))


def generate_demonstrations(pack: DataPack, num_dialogues: int = 20,
                            seed: int = 7,
                            noise: NoiseConfig | None = None) -> DemonstrationCorpus:
    """Roll the varied expert against the simulated user and record
    (pre-action state, action) pairs.

    Demonstrations are scripted exemplars of good dialogue, so the
    channel is noise-free by default; under a noisy channel the corpus
    fills with re-requests and the classifier learns that repeating
    itself is what humans do.
    """
    rng = np.random.default_rng(seed)
    config = EnvConfig(noise=noise or NoiseConfig(enabled=False))
    env = DialogueEnvironment(pack, nb_model=None, config=config, rng=rng)
    expert = ExpertPolicy(vary=True)
    dialogues = []
    for _ in range(num_dialogues):
        obs = env.reset()
        pairs = []
        while not obs.terminal:
            action = expert.select(env.context, rng)
            pairs.append((obs.state, action))
            obs = env.step(action)
        dialogues.append(pairs)
    return DemonstrationCorpus(dialogues)
