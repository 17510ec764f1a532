import numpy as np
import pytest
from scipy import stats

from toyenv import ToyMDP, value_iteration
from deepdial.dqn import (EnvironmentDisconnect, Experience, HyperParams,
                          ReplayBuffer, TargetPair, TrainingInterrupted,
                          epsilon_at, read_curve, run_training, select_action,
                          td_target, train_step, write_curve)
from deepdial.net import QNetwork, forward


def rigged_pair(q_values, n_inputs=4):
    """TargetPair whose nets output fixed q_values regardless of input."""
    net = QNetwork([n_inputs, 3, 3, len(q_values)])
    for w in net.weights:
        w[:] = 0.0
    for b in net.biases:
        b[:] = 0.0
    net.biases[-1][:] = q_values
    return TargetPair(net)


class TestSelectAction:
    def test_full_exploration_is_uniform_over_valid(self):
        pair = rigged_pair([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        rng = np.random.default_rng(0)
        counts = {3: 0, 7: 0}
        n = 10000
        for _ in range(n):
            counts[select_action(pair, np.zeros(4), (3, 7), 1.0, rng)] += 1
        sigma = np.sqrt(n * 0.25)
        assert abs(counts[3] - n / 2) < 3 * sigma
        assert counts[3] + counts[7] == n

    def test_greedy_breaks_ties_towards_lowest_index(self):
        pair = rigged_pair([0.1, 0.9, 0.9, -1.0])
        action = select_action(pair, np.zeros(4), (1, 2), 0.0,
                               np.random.default_rng(0))
        assert action == 1

    def test_singleton_valid_set(self):
        pair = rigged_pair([5.0, 4.0, 3.0, 2.0, 1.0, 9.0])
        assert select_action(pair, np.zeros(4), (5,), 0.0,
                             np.random.default_rng(0)) == 5

    def test_never_leaves_valid_set(self):
        rng = np.random.default_rng(3)
        pair = TargetPair(QNetwork([4, 3, 3, 6], rng))
        for _ in range(300):
            valid = tuple(sorted(rng.choice(6, size=rng.integers(1, 6),
                                            replace=False).tolist()))
            eps = float(rng.random())
            assert select_action(pair, rng.random(4), valid, eps, rng) in valid

    def test_empty_valid_set_is_an_error(self):
        pair = rigged_pair([0.0, 1.0])
        with pytest.raises(ValueError):
            select_action(pair, np.zeros(4), (), 0.5, np.random.default_rng(0))

    def test_constant_shift_does_not_change_greedy_choice(self):
        rng = np.random.default_rng(4)
        pair = TargetPair(QNetwork([4, 3, 3, 6], rng))
        s = rng.random(4)
        valid = (0, 2, 4, 5)
        before = select_action(pair, s, valid, 0.0, np.random.default_rng(1))
        pair.online.biases[-1] += 123.456
        after = select_action(pair, s, valid, 0.0, np.random.default_rng(1))
        assert before == after


class TestTdTarget:
    def test_terminal_drops_bootstrap(self):
        pair = rigged_pair([100.0, 100.0])
        e = Experience(np.zeros(4), 0, 0.9, np.zeros(4), True, ())
        assert td_target(pair, e, 0.7) == 0.9

    def test_zero_discount(self):
        pair = rigged_pair([100.0, 100.0])
        e = Experience(np.zeros(4), 0, 0.43, np.zeros(4), False, (0, 1))
        assert td_target(pair, e, 0.0) == 0.43

    def test_stated_arithmetic(self):
        pair = rigged_pair([1.0, 5.0, -2.0])
        e = Experience(np.zeros(4), 0, -0.1, np.zeros(4), False, (0, 2))
        # max over valid_next only: action 1 (q=5) is masked out
        assert td_target(pair, e, 0.7) == pytest.approx(-0.1 + 0.7 * 1.0)

    def test_uses_target_net_not_online(self):
        pair = rigged_pair([1.0, 1.0])
        pair.online.biases[-1][:] = 50.0  # diverge online from target
        e = Experience(np.zeros(4), 0, 0.0, np.zeros(4), False, (0, 1))
        assert td_target(pair, e, 0.5) == pytest.approx(0.5)


class TestReplayBuffer:
    def test_fifo_eviction_at_capacity(self):
        buf = ReplayBuffer(capacity=5)
        for i in range(6):
            buf.add(Experience(np.array([float(i)]), 0, 0.0, np.zeros(1),
                               True, ()))
        assert len(buf) == 5
        values = sorted(e.s[0] for e in buf.items)
        assert values == [1.0, 2.0, 3.0, 4.0, 5.0]  # the first insert is gone

    def test_size_never_exceeds_capacity(self):
        buf = ReplayBuffer(capacity=3)
        for i in range(50):
            buf.add(Experience(np.zeros(1), 0, 0.0, np.zeros(1), True, ()))
            assert len(buf) <= 3

    def test_sampling_uniformity_chi_square(self):
        buf = ReplayBuffer(capacity=200)
        for i in range(100):
            buf.add(Experience(np.array([float(i)]), 0, 0.0, np.zeros(1),
                               True, ()))
        rng = np.random.default_rng(42)
        counts = np.zeros(100)
        for _ in range(10000):
            item = buf.sample(1, rng)[0]
            counts[int(item.s[0])] += 1
        _, p = stats.chisquare(counts)
        assert p > 0.01

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            ReplayBuffer(4).sample(1, np.random.default_rng(0))

    def test_nonterminal_needs_valid_next(self):
        with pytest.raises(ValueError):
            Experience(np.zeros(1), 0, 0.0, np.zeros(1), False, ())


class TestEpsilonSchedule:
    HP = HyperParams()

    def test_boundary_values(self):
        assert epsilon_at(0, self.HP) == 1.0
        assert epsilon_at(self.HP.epsilon_anneal_steps, self.HP) == 0.01
        assert epsilon_at(10 * self.HP.epsilon_anneal_steps, self.HP) == 0.01

    def test_non_increasing(self):
        values = [epsilon_at(s, self.HP) for s in range(0, 25000, 97)]
        assert all(b <= a for a, b in zip(values, values[1:]))


class TestTrainStep:
    def test_warmup_not_met_is_noop(self):
        pair = rigged_pair([0.0, 0.0])
        buf = ReplayBuffer(100)
        buf.add(Experience(np.zeros(4), 0, 0.5, np.zeros(4), True, ()))
        hp = HyperParams(replay_warmup=10)
        before = pair.online.copy()
        assert train_step(pair, buf, hp, np.random.default_rng(0)) is None
        assert pair.online.equals(before)

    def test_single_experience_convergence(self):
        rng = np.random.default_rng(1)
        pair = TargetPair(QNetwork([4, 8, 8, 2], rng))
        buf = ReplayBuffer(10)
        buf.add(Experience(np.array([0.1, 0.9, 0.3, 0.5]), 1, 0.7,
                           np.zeros(4), True, ()))
        hp = HyperParams(replay_warmup=1, batch_size=4, learning_rate=0.01,
                         target_sync_period=100)
        losses = [train_step(pair, buf, hp, rng) for _ in range(2000)]
        assert losses[-1] < 1e-6
        assert losses[-1] < losses[0]

    def test_target_sync_at_period(self):
        rng = np.random.default_rng(2)
        pair = TargetPair(QNetwork([4, 3, 3, 2], rng))
        buf = ReplayBuffer(10)
        buf.add(Experience(np.ones(4), 0, 0.5, np.ones(4), True, ()))
        hp = HyperParams(replay_warmup=1, batch_size=2, target_sync_period=3)
        for i in range(2):
            train_step(pair, buf, hp, rng)
            assert not pair.target.equals(pair.online)
        assert pair.steps_since_sync == 2
        train_step(pair, buf, hp, rng)
        assert pair.steps_since_sync == 0
        assert pair.target.equals(pair.online)

    def test_updates_flow_only_through_taken_actions(self):
        # hidden path dead: the output layer behaves like a single linear layer
        net = QNetwork([4, 3, 3, 5])
        for w in net.weights:
            w[:] = 0.0
        for b in net.biases:
            b[:] = 0.0
        pair = TargetPair(net)
        buf = ReplayBuffer(10)
        buf.add(Experience(np.array([1.0, 0.0, 0.0, 0.0]), 2, 0.8,
                           np.zeros(4), True, ()))
        hp = HyperParams(replay_warmup=1, batch_size=4, learning_rate=0.05,
                         target_sync_period=1000)
        q_before = forward(pair.online, np.array([0.0, 1.0, 0.0, 0.0]))
        train_step(pair, buf, hp, np.random.default_rng(0))
        q_after = forward(pair.online, np.array([0.0, 1.0, 0.0, 0.0]))
        for a in (0, 1, 3, 4):
            assert q_after[a] == q_before[a]
        assert q_after[2] != q_before[2]


class TestRunTraining:
    def test_zero_steps_returns_fresh_policy_and_empty_curve(self):
        hp = HyperParams(total_learning_steps=0)
        result = run_training(ToyMDP(), hp, np.random.default_rng(0))
        assert result.curve == []
        assert result.steps_done == 0
        assert result.net.layer_dims == [2, 40, 40, 2]

    def test_determinism_bit_exact(self):
        curves = []
        for _ in range(2):
            hp = HyperParams(total_learning_steps=400, replay_warmup=20,
                             batch_size=4, hidden_dims=(8, 8),
                             epsilon_anneal_steps=200)
            result = run_training(ToyMDP(), hp, np.random.default_rng(123))
            curves.append([(r.episode_index, r.total_reward, r.turns, r.epsilon)
                           for r in result.curve])
        assert curves[0] == curves[1]

    def test_episode_cap_stops_training(self):
        hp = HyperParams(total_learning_steps=10000, max_episodes=3,
                         replay_warmup=5, batch_size=2, hidden_dims=(6, 6))
        result = run_training(ToyMDP(horizon=5), hp, np.random.default_rng(0))
        assert result.episodes_done == 3
        assert len(result.curve) == 3
        assert result.steps_done == 15

    def test_disconnect_raises_interrupted_with_partial_state(self):
        class FlakyEnv(ToyMDP):
            def step(self, action):
                if self.t == 7:
                    raise EnvironmentDisconnect("gone")
                return super().step(action)

        hp = HyperParams(total_learning_steps=100, replay_warmup=5,
                         batch_size=2, hidden_dims=(6, 6))
        with pytest.raises(TrainingInterrupted) as err:
            run_training(FlakyEnv(), hp, np.random.default_rng(0))
        assert err.value.partial.steps_done == 7

    def test_toy_mdp_reaches_value_iteration_policy(self):
        q_star = value_iteration()
        optimal = {s: max(q_star[s], key=q_star[s].get) for s in (0, 1)}
        assert optimal == {0: 1, 1: 0}
        hp = HyperParams(total_learning_steps=2000, replay_warmup=50,
                         batch_size=8, hidden_dims=(10, 10),
                         epsilon_anneal_steps=1000, learning_rate=0.05,
                         target_sync_period=100)
        result = run_training(ToyMDP(), hp, np.random.default_rng(11))
        for state in (0, 1):
            q = forward(result.net, ToyMDP.encode(state))
            assert int(q.argmax()) == optimal[state]


class TestCurveFile:
    def test_round_trip(self, tmp_path):
        from deepdial.dqn import EpisodeRecord
        curve = [EpisodeRecord(0, 1.2345678901234567, 7, 1.0),
                 EpisodeRecord(1, -0.1, 30, 0.505)]
        path = tmp_path / "curve.csv"
        write_curve(curve, str(path))
        content = path.read_text()
        assert content.startswith("episode_index,total_reward,turns,epsilon\n")
        loaded = read_curve(str(path))
        assert loaded == curve

    def test_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("nope\n1,2,3,4\n")
        with pytest.raises(ValueError):
            read_curve(str(path))
