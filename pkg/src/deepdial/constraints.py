"""Constrained action sets: Naive Bayes action priors plus legitimacy rules.

A Bernoulli Naive Bayes classifier trained on demonstration dialogues
gives Pr(action | state). The per-state constrained set is the union of
the actions whose posterior clears a probability threshold and the
actions a hand-written legitimacy heuristic allows in the current
dialogue context. The posterior of the executed action doubles as the
data-likeness term of the reward.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from deepdial.acts import (CATALOG, NUM_ACTIONS, SLOTS, DialogueAct, act_index)
from deepdial.context import DialogueContext

logger = logging.getLogger(__name__)

#: Posterior mass an action needs to count as probable.
PROBABILITY_THRESHOLD = 0.01

#: Slots filled below this mean confidence are apology-eligible.
APOLOGY_CONFIDENCE = 0.5

#: Word features below this value are off for the classifier. Matching the
#: channel's distortion threshold means the classifier sees exactly the
#: reliable words, so demonstration states and noisy runtime states come
#: from the same feature distribution.
BINARISE_AT = 0.5


@dataclass
class DemonstrationCorpus:
    """Dialogues of (state vector, action index) pairs."""

    dialogues: list[list[tuple[np.ndarray, int]]]

    def __post_init__(self):
        for dialogue in self.dialogues:
            for state, action in dialogue:
                if not 0 <= action < NUM_ACTIONS:
                    raise ValueError(f"action index {action} outside catalog")

    def num_pairs(self) -> int:
        return sum(len(d) for d in self.dialogues)

    def to_json(self) -> str:
        doc = {"dialogues": [
            [{"state": [float(v) for v in state], "action": str(CATALOG[a])}
             for state, a in dialogue]
            for dialogue in self.dialogues
        ]}
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "DemonstrationCorpus":
        doc = json.loads(text)
        dialogues = []
        for dialogue in doc["dialogues"]:
            pairs = [(np.asarray(turn["state"], dtype=np.float64),
                      act_index(turn["action"]))
                     for turn in dialogue]
            dialogues.append(pairs)
        return cls(dialogues)


class NaiveBayesModel:
    """Bernoulli NB with Laplace smoothing over binarised word features.

    Counts are kept so a trained model can be checkpointed and rebuilt
    exactly.
    """

    def __init__(self, action_counts: np.ndarray, on_counts: np.ndarray,
                 total: int, binarise_at: float = BINARISE_AT):
        self.action_counts = action_counts.astype(np.int64)
        self.on_counts = on_counts.astype(np.int64)
        self.total = int(total)
        self.binarise_at = binarise_at
        self.num_features = on_counts.shape[1]
        prior = (self.action_counts + 1.0) / (self.total + NUM_ACTIONS)
        theta = (self.on_counts + 1.0) / (self.action_counts[:, None] + 2.0)
        self.log_prior = np.log(prior)
        self.log_on = np.log(theta)
        self.log_off = np.log1p(-theta)

    def to_json(self) -> str:
        return json.dumps({
            "action_counts": self.action_counts.tolist(),
            "on_counts": self.on_counts.tolist(),
            "total": self.total,
            "binarise_at": self.binarise_at,
        })

    @classmethod
    def from_json(cls, text: str) -> "NaiveBayesModel":
        doc = json.loads(text)
        return cls(np.asarray(doc["action_counts"]), np.asarray(doc["on_counts"]),
                   doc["total"], doc["binarise_at"])


def train_nb(corpus: DemonstrationCorpus, num_features: int | None = None,
             binarise_at: float = BINARISE_AT) -> NaiveBayesModel:
    """Count-based fit; features are binarised at ``binarise_at`` before counting."""
    if not corpus.dialogues or corpus.num_pairs() == 0:
        raise ValueError("demonstration corpus is empty")
    if num_features is None:
        num_features = len(corpus.dialogues[0][0][0])
    action_counts = np.zeros(NUM_ACTIONS, dtype=np.int64)
    on_counts = np.zeros((NUM_ACTIONS, num_features), dtype=np.int64)
    total = 0
    for dialogue in corpus.dialogues:
        for state, action in dialogue:
            if len(state) != num_features:
                raise ValueError(
                    f"state length {len(state)} != feature count {num_features}")
            action_counts[action] += 1
            on_counts[action] += state > binarise_at
            total += 1
    return NaiveBayesModel(action_counts, on_counts, total, binarise_at)


def action_posterior(model: NaiveBayesModel, s: np.ndarray) -> np.ndarray:
    """Normalised Pr(a|s) over the full catalog, computed in log space."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (model.num_features,):
        raise ValueError(f"state has shape {s.shape}, model expects "
                         f"({model.num_features},)")
    x = (s > model.binarise_at).astype(np.float64)
    scores = model.log_prior + model.log_on @ x + model.log_off @ (1.0 - x)
    scores -= scores.max()
    probs = np.exp(scores)
    return probs / probs.sum()


def legitimate_actions(context: DialogueContext) -> set[int]:
    """Application-independent heuristics for which acts make sense now."""
    legit: set[int] = set()
    for index, act in enumerate(CATALOG):
        if _is_legitimate(act, context):
            legit.add(index)
    return legit


def _is_legitimate(act: DialogueAct, ctx: DialogueContext) -> bool:
    kind = act.act_type
    if kind == "Salutation":
        return ctx.turns == 0 if act.args == ("greeting",) else ctx.declined_more
    if kind == "Request":
        wanted = SLOTS if act.args == ("hmihy",) else act.slots
        return all(s not in ctx.filled for s in wanted)
    if kind == "Apology":
        return all(
            s in ctx.filled
            and ctx.filled[s].confidence < APOLOGY_CONFIDENCE
            and s not in ctx.confirmed
            for s in act.slots)
    if kind in ("ExpConfirm", "ImpConfirm"):
        return all(s in ctx.filled and s not in ctx.confirmed for s in act.slots)
    if kind == "Retrieve":
        return ctx.all_confirmed() and not ctx.lookup_done
    if kind == "Provide":
        if not ctx.lookup_done or ctx.info_provided:
            return False
        return (ctx.retrieved is not None) == (act.args == ("known",))
    if kind == "AskFor":
        return ctx.info_provided and not ctx.declined_more
    return False


def constrained_set(model: NaiveBayesModel, s: np.ndarray,
                    context: DialogueContext,
                    threshold: float = PROBABILITY_THRESHOLD) -> set[int]:
    """Probable actions (posterior > threshold) united with legitimate ones.

    Never empty: an empty union falls back to the legitimate set, and an
    empty legitimate set falls back to the full catalog (anomalous).
    """
    posterior = action_posterior(model, s)
    probable = set(np.flatnonzero(posterior > threshold).tolist())
    valid = probable | legitimate_actions(context)
    if not valid:
        logger.warning("constrained set empty; falling back to full catalog")
        valid = set(range(NUM_ACTIONS))
    return valid
