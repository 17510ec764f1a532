"""Deep Q-learning with experience replay, a periodically synchronised
target network, and epsilon-greedy exploration restricted to per-state
constrained action sets. Bootstrap targets also range over the valid
actions of the successor state only.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from deepdial.net import Gradient, QNetwork, apply_sgd, backward, forward


@dataclass(frozen=True)
class HyperParams:
    gamma: float = 0.7
    epsilon_start: float = 1.0
    epsilon_min: float = 0.01
    epsilon_anneal_steps: int = 10000
    batch_size: int = 32
    total_learning_steps: int = 20000
    target_sync_period: int = 1000
    learning_rate: float = 0.005
    replay_warmup: int = 500
    replay_capacity: int = 10000
    max_episodes: int = 3000
    hidden_dims: tuple[int, int] = (40, 40)

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 <= self.epsilon_min <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_min <= epsilon_start <= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.target_sync_period < 1:
            raise ValueError("target_sync_period must be >= 1")


@dataclass
class Experience:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    terminal: bool
    valid_next: tuple[int, ...]

    def __post_init__(self):
        if not self.terminal and not self.valid_next:
            raise ValueError("non-terminal experience needs valid next actions")


class ReplayBuffer:
    """Bounded FIFO experience memory with uniform sampling."""

    def __init__(self, capacity: int = 10000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.items: list[Experience] = []
        self.cursor = 0

    def __len__(self) -> int:
        return len(self.items)

    def add(self, e: Experience) -> None:
        if len(self.items) < self.capacity:
            self.items.append(e)
        else:
            self.items[self.cursor] = e
        self.cursor = (self.cursor + 1) % self.capacity

    def sample(self, k: int, rng: np.random.Generator) -> list[Experience]:
        """Uniform with replacement; never more kinds than stored."""
        if not self.items:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(len(self.items), size=k)
        return [self.items[i] for i in idx]


class TargetPair:
    """Online parameters plus their frozen bootstrap copy."""

    def __init__(self, online: QNetwork):
        self.online = online
        self.target = online.copy()
        self.steps_since_sync = 0

    @classmethod
    def create(cls, layer_dims: list[int], rng: np.random.Generator) -> "TargetPair":
        return cls(QNetwork(layer_dims, rng))

    def sync(self) -> None:
        self.target = self.online.copy()
        self.steps_since_sync = 0


def epsilon_at(step: int, hp: HyperParams) -> float:
    """Linear anneal from epsilon_start to epsilon_min over the anneal window."""
    if hp.epsilon_anneal_steps <= 0 or step >= hp.epsilon_anneal_steps:
        return hp.epsilon_min
    frac = step / hp.epsilon_anneal_steps
    return hp.epsilon_start - (hp.epsilon_start - hp.epsilon_min) * frac


def select_action(pair: TargetPair, s: np.ndarray, valid: tuple[int, ...],
                  epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy restricted to ``valid``; greedy ties go to the lowest index."""
    if not valid:
        raise ValueError("valid action set is empty (environment bug)")
    ordered = sorted(valid)
    if rng.random() < epsilon:
        return ordered[int(rng.integers(len(ordered)))]
    q = forward(pair.online, s)
    best = ordered[0]
    for a in ordered[1:]:
        if q[a] > q[best]:
            best = a
    return best


def td_target(pair: TargetPair, e: Experience, gamma: float) -> float:
    """r, or r + gamma * max over valid next actions of the target net's Q."""
    if e.terminal:
        return e.r
    if gamma == 0.0:
        return e.r
    q_next = forward(pair.target, e.s_next)
    return e.r + gamma * max(q_next[a] for a in e.valid_next)


def train_step(pair: TargetPair, buffer: ReplayBuffer, hp: HyperParams,
               rng: np.random.Generator) -> float | None:
    """One minibatch update on the online net; returns the batch's mean
    squared TD error before the update, or None while warming up."""
    if len(buffer) < hp.replay_warmup:
        return None
    batch = buffer.sample(hp.batch_size, rng)
    grad = Gradient.zeros_like(pair.online)
    total_loss = 0.0
    for e in batch:
        target = td_target(pair, e, hp.gamma)
        g, loss = backward(pair.online, e.s, e.a, target)
        grad.add_(g)
        total_loss += loss
    grad.scale_(1.0 / len(batch))
    apply_sgd(pair.online, grad, hp.learning_rate)
    pair.steps_since_sync += 1
    if pair.steps_since_sync >= hp.target_sync_period:
        pair.sync()
    return total_loss / len(batch)


@dataclass
class EpisodeRecord:
    episode_index: int
    total_reward: float
    turns: int
    epsilon: float


@dataclass
class TrainingResult:
    net: QNetwork
    curve: list[EpisodeRecord]
    steps_done: int
    episodes_done: int


class EnvironmentDisconnect(RuntimeError):
    """The environment became unreachable mid-run."""


class TrainingInterrupted(RuntimeError):
    """Carries the partial result so the caller can checkpoint and resume."""

    def __init__(self, partial: TrainingResult, cause: Exception):
        super().__init__(f"training interrupted after {partial.steps_done} steps: {cause}")
        self.partial = partial
        self.cause = cause


def run_training(env, hp: HyperParams, rng: np.random.Generator,
                 pair: TargetPair | None = None) -> TrainingResult:
    """Alternate environment interaction with one gradient update per turn.

    ``env`` exposes reset() and step(a) returning observations with
    state/reward/terminal/valid, plus num_actions and state_dim. Stops at
    total_learning_steps or max_episodes, whichever comes first.
    """
    if pair is None:
        dims = [env.state_dim, *hp.hidden_dims, env.num_actions]
        pair = TargetPair.create(dims, rng)
    buffer = ReplayBuffer(hp.replay_capacity)
    curve: list[EpisodeRecord] = []
    result = TrainingResult(pair.online, curve, 0, 0)
    if hp.total_learning_steps <= 0:
        return result

    try:
        obs = env.reset()
        episode_reward, episode_turns = 0.0, 0
        for step in range(hp.total_learning_steps):
            eps = epsilon_at(step, hp)
            action = select_action(pair, obs.state, obs.valid, eps, rng)
            nxt = env.step(action)
            buffer.add(Experience(obs.state, action, nxt.reward, nxt.state,
                                  nxt.terminal, tuple(nxt.valid)))
            episode_reward += nxt.reward
            episode_turns += 1
            train_step(pair, buffer, hp, rng)
            result.steps_done = step + 1
            if nxt.terminal:
                curve.append(EpisodeRecord(result.episodes_done, episode_reward,
                                           episode_turns, eps))
                result.episodes_done += 1
                if result.episodes_done >= hp.max_episodes:
                    break
                obs = env.reset()
                episode_reward, episode_turns = 0.0, 0
            else:
                obs = nxt
    except EnvironmentDisconnect as exc:
        raise TrainingInterrupted(result, exc) from exc
    return result


CURVE_HEADER = "episode_index,total_reward,turns,epsilon"


def write_curve(curve: list[EpisodeRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CURVE_HEADER + "\n")
        writer = csv.writer(fh)
        for rec in curve:
            writer.writerow([rec.episode_index, repr(rec.total_reward),
                             rec.turns, repr(rec.epsilon)])


def read_curve(path: str) -> list[EpisodeRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        content = fh.read()
    reader = csv.reader(io.StringIO(content))
    header = next(reader, None)
    if header is None or ",".join(header) != CURVE_HEADER:
        raise ValueError(f"curve file must start with header {CURVE_HEADER!r}")
    return [EpisodeRecord(int(row[0]), float(row[1]), int(row[2]), float(row[3]))
            for row in reader if row]
