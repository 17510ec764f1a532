"""Greedy rollout evaluation: reward, dialogue length, task success."""

from __future__ import annotations

from dataclasses import dataclass

from deepdial.acts import CLOSING
from deepdial.environment import DialogueEnvironment


@dataclass
class EpisodeOutcome:
    total_reward: float
    turns: int
    all_confirmed: bool
    info_provided: bool
    closed: bool  # ended with the closing salutation, not the turn cap


def run_episode(env: DialogueEnvironment, policy) -> EpisodeOutcome:
    obs = env.reset()
    total = 0.0
    while not obs.terminal:
        action = policy.select(obs.state, obs.valid, env.context)
        obs = env.step(action)
        total += obs.reward
    closed = obs.act == CLOSING
    return EpisodeOutcome(total, env.context.turns,
                          env.context.all_confirmed(),
                          env.context.info_provided, closed)


def task_success(outcome: EpisodeOutcome, turn_limit: int | None = None) -> bool:
    """All slots confirmed, information provided, closed; optional length bound."""
    ok = outcome.all_confirmed and outcome.info_provided and outcome.closed
    if turn_limit is not None:
        ok = ok and outcome.turns <= turn_limit
    return ok


@dataclass
class EvalSummary:
    episodes: int
    mean_reward: float
    success_rate: float
    mean_turns: float


def summarize(outcomes: list[EpisodeOutcome],
              turn_limit: int | None = None) -> EvalSummary:
    if not outcomes:
        return EvalSummary(0, 0.0, 0.0, 0.0)
    n = len(outcomes)
    return EvalSummary(
        episodes=n,
        mean_reward=sum(o.total_reward for o in outcomes) / n,
        success_rate=sum(task_success(o, turn_limit) for o in outcomes) / n,
        mean_turns=sum(o.turns for o in outcomes) / n,
    )


def evaluate(env: DialogueEnvironment, policy, episodes: int) -> list[EpisodeOutcome]:
    return [run_episode(env, policy) for _ in range(episodes)]
