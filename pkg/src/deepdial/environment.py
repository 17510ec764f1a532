"""The learning environment: verbalise the chosen act, obtain the (noisy)
user reply, update the dialogue context, featurize, and score.

One environment step spans one system turn: the user's reply (when the
act invites one) is folded into the same transition. The environment
advertises the constrained action set for every non-terminal state; a
step outside the advertised set is an error and leaves the episode
unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from deepdial import constraints, nlg
from deepdial.acts import (CATALOG, CLOSING, NUM_ACTIONS, PROVIDE_KNOWN,
                           PROVIDE_UNKNOWN, SLOTS, DialogueAct,
                           expects_user_input)
from deepdial.constraints import NaiveBayesModel
from deepdial.context import DialogueContext
from deepdial.datapack import DataPack
from deepdial.reward import RewardConfig, compute_reward
from deepdial.simulator import (NoiseConfig, UserGoal, UserSimulator, distort,
                                sample_goal)
from deepdial.text import ScoredUtterance, featurize, tokenize

DEFAULT_MAX_TURNS = 30

#: Act families the classifier may propose at any state; the rest are
#: gated by context legitimacy.
_OPEN_FAMILIES = ("Request", "Apology", "ExpConfirm", "ImpConfirm")


class EnvironmentError_(RuntimeError):
    """Base class for episode-loop faults."""


class InvalidAction(EnvironmentError_):
    """Action outside the advertised valid set."""


class EpisodeFinished(EnvironmentError_):
    """Step requested after the episode reached a terminal state."""


@dataclass
class Observation:
    state: np.ndarray
    reward: float
    terminal: bool
    valid: tuple[int, ...]
    system_text: str = ""
    user_text: str = ""
    act: int | None = None


@dataclass
class EnvConfig:
    max_turns: int = DEFAULT_MAX_TURNS
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    p_end: float = 1.0
    probability_threshold: float = constraints.PROBABILITY_THRESHOLD
    human_confidence: float = 1.0
    # Consecutive no-progress turns the user tolerates before hanging up;
    # 0 disables. Interactive sessions ignore this (humans leave on their own).
    patience: int = 6


@dataclass
class _PendingTurn:
    """System half of a turn awaiting the user half."""

    act_index: int
    act: DialogueAct
    data_likeness: float
    system_text: str
    system_tokens: list[str]
    voiced: dict[str, str]
    expects_input: bool
    hangup: bool = False
    progress_before: tuple = ()


class DialogueEnvironment:
    """Simulated-user episode loop; also exposes the split-phase turn API
    used by interactive (human) sessions."""

    num_actions = NUM_ACTIONS

    def __init__(self, pack: DataPack, nb_model: NaiveBayesModel | None,
                 config: EnvConfig, rng: np.random.Generator):
        self.pack = pack
        self.nb_model = nb_model
        self.config = config
        self.rng = rng
        self.context = DialogueContext()
        self.goal: UserGoal | None = None
        self.simulator: UserSimulator | None = None
        self._state = np.zeros(len(pack.vocab))
        self._valid: tuple[int, ...] = ()
        self._pending: _PendingTurn | None = None

    @property
    def state_dim(self) -> int:
        return len(self.pack.vocab)

    def reset(self, goal: UserGoal | None = None) -> Observation:
        """Start a fresh episode; initial state is the zero vector."""
        self.context = DialogueContext()
        self.goal = goal or sample_goal(self.pack.db, self.rng)
        self.simulator = UserSimulator(self.pack, self.goal, p_end=self.config.p_end)
        self._state = np.zeros(self.state_dim)
        self._valid = self._constrained(self._state)
        self._pending = None
        return Observation(self._state.copy(), 0.0, False, self._valid)

    def step(self, action_index: int) -> Observation:
        """One full system turn against the simulated user."""
        pending = self.begin_turn(action_index)
        assert self.simulator is not None
        user_tokens = self.simulator.respond(pending.act, self.rng,
                                             system_values=pending.voiced)
        heard = distort(user_tokens, self.config.noise, self.pack.vocab, self.rng)
        return self.finish_turn(heard, user_text=" ".join(user_tokens))

    # -- split-phase turn API ------------------------------------------------

    def begin_turn(self, action_index: int) -> _PendingTurn:
        """Verbalise and apply the system half of the transition."""
        if self.context.terminal:
            raise EpisodeFinished("episode is over; reset before stepping")
        if self._pending is not None:
            raise EnvironmentError_("previous turn still awaiting user input")
        if action_index not in self._valid:
            raise InvalidAction(
                f"action {action_index} not in the advertised valid set")
        act = CATALOG[action_index]
        dr = self._data_likeness(self._state, action_index)
        # A user who already declined more hangs up on anything but goodbye.
        hangup = self.context.declined_more and action_index != CLOSING
        progress_before = self.context.progress_marker()
        self.context.turns += 1

        if act.act_type == "Retrieve":
            filled = {s: f.value for s, f in self.context.filled.items()}
            self.context.retrieved = self.pack.db.lookup(filled)
            self.context.lookup_done = True

        system_text, system_tokens, voiced = self._verbalize(act)

        if act.act_type == "ImpConfirm":
            # Silence implies acceptance: confirm the voiced, filled slots.
            for slot in act.slots:
                self.context.confirm(slot)
        if act.act_type == "Provide" and self.context.lookup_done:
            self.context.info_provided = True
        if action_index == CLOSING:
            self.context.terminal = True

        self.context.last_system_tokens = system_tokens
        pending = _PendingTurn(action_index, act, dr, system_text, system_tokens,
                               voiced, expects_user_input(act), hangup=hangup,
                               progress_before=progress_before)
        self._pending = pending
        return pending

    def finish_turn(self, heard: ScoredUtterance,
                    user_text: str = "") -> Observation:
        """Fold the (possibly empty) user half into the transition."""
        if self._pending is None:
            raise EnvironmentError_("no turn in progress")
        pending, self._pending = self._pending, None
        act = pending.act

        self._absorb_user(act, heard)
        self.context.last_user = heard

        if self.context.progress_marker() != pending.progress_before:
            self.context.stall_turns = 0
        else:
            self.context.stall_turns += 1
        impatient = (self.config.patience > 0
                     and self.context.stall_turns >= self.config.patience)
        if pending.hangup or impatient or self.context.turns >= self.config.max_turns:
            self.context.terminal = True

        self._state = featurize(pending.system_tokens, heard, self.pack.vocab)
        reward = compute_reward(self.context, pending.data_likeness,
                                self.config.reward)
        terminal = self.context.terminal
        self._valid = () if terminal else self._constrained(self._state)
        return Observation(self._state.copy(), reward, terminal, self._valid,
                           system_text=pending.system_text,
                           user_text=user_text or " ".join(heard.words),
                           act=pending.act_index)

    def finish_turn_human(self, text: str) -> Observation:
        """Human text stands in for the simulator: fixed confidence, no distortion."""
        tokens = tokenize(text)
        heard = ScoredUtterance(tokens,
                                [self.config.human_confidence] * len(tokens))
        return self.finish_turn(heard, user_text=text)

    # -- internals -----------------------------------------------------------

    def _verbalize(self, act: DialogueAct) -> tuple[str, list[str], dict[str, str]]:
        values = self.context.slot_values()
        if act == CATALOG[PROVIDE_KNOWN] and self.context.retrieved is None:
            # Provide(known) without a match falls back to the no-match surface.
            act_surface = CATALOG[PROVIDE_UNKNOWN]
        else:
            act_surface = act
        text, tokens = nlg.verbalize(act_surface, values, self.pack.templates)
        voiced = {slot: values.get(slot, nlg.FALLBACK_WORD) for slot in SLOTS}
        return text, tokens, voiced

    def _absorb_user(self, act: DialogueAct, heard: ScoredUtterance) -> None:
        fills = extract_slot_fills(heard, self.pack)
        for slot, (value, confidence) in fills.items():
            self.context.fill(slot, value, confidence)
        affirmed = "yes" in heard.words
        declined = "no" in heard.words
        if act.act_type == "ExpConfirm" and affirmed:
            for slot in act.slots:
                self.context.confirm(slot)
        if act.act_type == "AskFor" and declined:
            self.context.declined_more = True

    def _data_likeness(self, state: np.ndarray, action_index: int) -> float:
        if self.nb_model is None:
            return 1.0 / NUM_ACTIONS
        return float(constraints.action_posterior(self.nb_model, state)[action_index])

    def _constrained(self, state: np.ndarray) -> tuple[int, ...]:
        """Advertised action set for a state.

        Probable actions join the set freely only for the request,
        apology and confirmation families; acts that depend on dialogue
        phase (retrieve, provide, ask-more, salutations) are admitted by
        legitimacy alone, so a data-like but contextually absurd
        retrieval can never be selected.
        """
        legit = constraints.legitimate_actions(self.context)
        if self.nb_model is not None:
            posterior = constraints.action_posterior(self.nb_model, state)
            probable = set(np.flatnonzero(
                posterior > self.config.probability_threshold).tolist())
            valid = legit | {a for a in probable
                             if CATALOG[a].act_type in _OPEN_FAMILIES}
        else:
            valid = legit
        if not valid:
            valid = set(range(NUM_ACTIONS))
        return tuple(sorted(valid))


def extract_slot_fills(heard: ScoredUtterance,
                       pack: DataPack) -> dict[str, tuple[str, float]]:
    """Match heard tokens against per-slot value lexicons.

    Greedy longest-first contiguous match; the fill confidence is the
    mean score of the matched span. A single surviving token that occurs
    in exactly one of the slot's values still identifies that value, so
    a partly-garbled multi-word value can fill its slot.
    """
    tokens = heard.words
    fills: dict[str, tuple[str, float]] = {}
    for slot, lexicon in pack.slot_lexicons.items():
        for value_tokens in lexicon:
            span = _find_span(tokens, value_tokens)
            if span is not None:
                scores = heard.scores[span:span + len(value_tokens)]
                fills[slot] = (pack.value_from_tokens(value_tokens),
                               float(np.mean(scores)))
                break
        else:
            for i, token in enumerate(tokens):
                owners = [v for v in lexicon if len(v) > 1 and token in v]
                if len(owners) == 1:
                    fills[slot] = (pack.value_from_tokens(owners[0]),
                                   heard.scores[i])
                    break
    return fills


def _find_span(tokens: list[str], target: tuple[str, ...]) -> int | None:
    n, k = len(tokens), len(target)
    for start in range(n - k + 1):
        if tuple(tokens[start:start + k]) == target:
            return start
    return None
