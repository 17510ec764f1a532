"""Rule-based user simulator with a noisy channel.

The simulated user holds a per-episode goal (food, price, area) and
answers each system act deterministically from the response rules. The
noise channel then assigns every word a uniform-random confidence score
and substitutes words whose score falls under the distortion threshold
with a random in-vocabulary word, keeping the low score as the signal
that the word is unreliable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deepdial.acts import SLOTS, DialogueAct
from deepdial.datapack import DataPack, RestaurantDB
from deepdial.nlg import _PLACEHOLDER
from deepdial.text import ScoredUtterance, Vocabulary, tokenize


@dataclass(frozen=True)
class UserGoal:
    food: str
    price: str
    area: str

    def value(self, slot: str) -> str:
        return getattr(self, slot)

    def as_dict(self) -> dict[str, str]:
        return {slot: self.value(slot) for slot in SLOTS}


def sample_goal(db: RestaurantDB, rng: np.random.Generator,
                row_bias: float = 0.75) -> UserGoal:
    """Draw a goal from the database.

    Mostly the slot triple of a random restaurant (so a match exists);
    otherwise independent draws per column, which may name a combination
    no restaurant satisfies.
    """
    if rng.random() < row_bias:
        row = db.rows[rng.integers(len(db.rows))]
        return UserGoal(row.food, row.price, row.area)
    picks = {}
    for slot in SLOTS:
        values = db.values(slot)
        picks[slot] = values[rng.integers(len(values))]
    return UserGoal(**picks)


@dataclass
class NoiseConfig:
    distortion_threshold: float = 0.5
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 <= self.distortion_threshold <= 1.0:
            raise ValueError("distortion threshold must be in [0, 1]")


class UserSimulator:
    """Deterministic response rules over a fixed goal."""

    def __init__(self, pack: DataPack, goal: UserGoal, p_end: float = 1.0):
        self.pack = pack
        self.goal = goal
        self.p_end = p_end

    def _render(self, key: str) -> list[str]:
        template = self.pack.user_responses[key]
        surface = _PLACEHOLDER.sub(lambda m: self.goal.value(m.group(1)), template)
        return tokenize(surface)

    def respond(self, system_act: DialogueAct, rng: np.random.Generator,
                system_values: dict[str, str] | None = None) -> list[str]:
        """User tokens replying to ``system_act``; empty for acts with no user turn.

        ``system_values`` carries the slot values the system voiced, used
        to judge explicit confirmations against the goal.
        """
        kind = system_act.act_type
        if kind in ("Request", "Apology"):
            return self._render(str(system_act))
        if kind == "ExpConfirm":
            system_values = system_values or {}
            mismatched = [s for s in system_act.slots
                          if system_values.get(s) != self.goal.value(s)]
            if not mismatched:
                return self._render("affirm")
            correction = self._render(f"Request({','.join(mismatched)})")
            return self._render("negate") + [","] + correction
        if kind == "AskFor":
            if rng.random() < self.p_end:
                return self._render("decline-more")
            return self._render("Request(hmihy)")
        # Salutation, ImpConfirm, Retrieve, Provide: no user turn.
        return []


def distort(words: list[str], noise: NoiseConfig, vocab: Vocabulary,
            rng: np.random.Generator) -> ScoredUtterance:
    """Assign per-word confidences and corrupt low-confidence words.

    Confidence ~ Uniform[0,1) per word; when noise is enabled and the
    score falls strictly under the threshold, the word is replaced by a
    uniformly random *different* vocabulary word. Scores are kept on the
    replacements. Output length always equals input length.
    """
    scores = [float(rng.random()) for _ in words]
    out = list(words)
    if noise.enabled and len(vocab) > 0:
        for i, word in enumerate(words):
            if scores[i] < noise.distortion_threshold:
                original = vocab.index.get(word)
                if original is None:
                    out[i] = vocab.words[rng.integers(len(vocab))]
                elif len(vocab) > 1:
                    k = int(rng.integers(len(vocab) - 1))
                    if k >= original:
                        k += 1
                    out[i] = vocab.words[k]
    return ScoredUtterance(out, scores)
