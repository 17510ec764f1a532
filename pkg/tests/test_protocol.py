import json
import socket

import numpy as np
import pytest

from deepdial.client import RemoteEnvironment
from deepdial.dqn import (EnvironmentDisconnect, HyperParams,
                          TrainingInterrupted, run_training)
from deepdial.environment import DialogueEnvironment, EnvConfig
from deepdial.policy import ExpertDriver
from deepdial.server import (DialogueServer, Session, SessionFactory,
                             TranscriptEntry, format_transcript)
from deepdial.simulator import NoiseConfig

TABLE_SEQUENCE = [
    "Salutation(greeting)",
    "Request(food,price,area)",
    "ImpConfirm(food,price,area)",
    "Retrieve(info)",
    "Provide(known)",
    "AskFor(more)",
    "Salutation(closing)",
]


def make_session(pack, nb_model, noise=False, policy=None, seed=0, sink=None):
    env = DialogueEnvironment(pack, nb_model,
                              EnvConfig(noise=NoiseConfig(enabled=noise)),
                              np.random.default_rng(seed))
    return Session(env, policy=policy, transcript_sink=sink)


class Exchanger:
    def __init__(self, session):
        self.session = session
        self.next_id = 0

    def send(self, payload, msg_id=None):
        msg = dict(payload)
        msg["id"] = self.next_id if msg_id is None else msg_id
        self.next_id = msg["id"] + 1
        return json.loads(self.session.handle_line(json.dumps(msg)))

    def raw(self, line):
        return json.loads(self.session.handle_line(line))


class TestSessionBasics:
    def test_hello_carries_catalog_and_vocabulary(self, pack, nb_model):
        ex = Exchanger(make_session(pack, nb_model))
        reply = ex.send({"type": "hello", "mode": "simulated"})
        assert reply["type"] == "hello"
        assert len(reply["catalog"]) == 35
        assert reply["catalog"][0] == "Salutation(greeting)"
        assert reply["catalog"][34] == "Salutation(closing)"
        assert reply["vocabulary"] == list(pack.vocab.words)

    def test_reset_requires_hello(self, pack, nb_model):
        ex = Exchanger(make_session(pack, nb_model))
        reply = ex.send({"type": "reset"})
        assert reply["type"] == "error" and reply["reason"] == "bad_request"

    def test_malformed_line_keeps_session_alive(self, pack, nb_model):
        ex = Exchanger(make_session(pack, nb_model))
        err = ex.raw("{{{")
        assert err["type"] == "error" and err["reason"] == "parse"
        assert ex.send({"type": "hello", "mode": "simulated"})["type"] == "hello"

    def test_non_object_and_missing_id(self, pack, nb_model):
        ex = Exchanger(make_session(pack, nb_model))
        assert ex.raw("[1,2,3]")["reason"] == "parse"
        assert ex.raw('{"type": "hello"}')["reason"] == "parse"

    def test_ids_must_strictly_increase(self, pack, nb_model):
        ex = Exchanger(make_session(pack, nb_model))
        ex.send({"type": "hello", "mode": "simulated"}, msg_id=5)
        reply = ex.send({"type": "reset"}, msg_id=5)
        assert reply["type"] == "error" and reply["reason"] == "bad_request"
        assert reply["id"] == 5

    def test_unknown_type_is_error(self, pack, nb_model):
        ex = Exchanger(make_session(pack, nb_model))
        assert ex.send({"type": "dance"})["reason"] == "bad_request"

    def test_id_echo_for_randomised_requests(self, pack, nb_model):
        ex = Exchanger(make_session(pack, nb_model))
        rng = np.random.default_rng(0)
        payloads = [
            {"type": "hello", "mode": "simulated"},
            {"type": "reset"},
            {"type": "action", "action": "Salutation(greeting)"},
            {"type": "action", "action": "Dance(tango)"},
            {"type": "user_text", "text": "hi"},
            {"type": "nonsense"},
        ]
        msg_id = 0
        for _ in range(1000):
            msg_id += int(rng.integers(1, 5))
            payload = payloads[rng.integers(len(payloads))]
            reply = ex.send(payload, msg_id=msg_id)
            assert reply["id"] == msg_id


class TestSimulatedEpisode:
    def test_goal_override_and_table_sequence(self, pack, nb_model):
        ex = Exchanger(make_session(pack, nb_model))
        ex.send({"type": "hello", "mode": "simulated"})
        obs = ex.send({"type": "reset",
                       "goal": {"food": "mexican", "price": "reasonably priced",
                                "area": "east"}})
        assert obs["type"] == "observation"
        assert not any(obs["state"])
        assert not obs["terminal"]
        assert "Salutation(greeting)" in obs["valid_actions"]
        texts = []
        for act in TABLE_SEQUENCE:
            obs = ex.send({"type": "action", "action": act})
            texts.append(obs["system_text"])
        assert obs["terminal"]
        assert obs["valid_actions"] == []
        assert texts[0] == "Hello!"
        assert texts[2] == "Okay, reasonably priced mexican food in the east."

    def test_invalid_and_post_terminal_actions(self, pack, nb_model):
        ex = Exchanger(make_session(pack, nb_model))
        ex.send({"type": "hello", "mode": "simulated"})
        ex.send({"type": "reset", "goal": {"food": "mexican",
                                           "price": "reasonably priced",
                                           "area": "east"}})
        out_of_set = ex.send({"type": "action", "action": "Retrieve(info)"})
        assert out_of_set["reason"] == "invalid_action"
        unknown = ex.send({"type": "action", "action": "Retrieve(everything)"})
        assert unknown["reason"] == "invalid_action"
        for act in TABLE_SEQUENCE:
            ex.send({"type": "action", "action": act})
        after = ex.send({"type": "action", "action": "Salutation(greeting)"})
        assert after["type"] == "error" and after["reason"] == "terminal"
        again = ex.send({"type": "reset"})
        assert again["type"] == "observation"

    def test_transcript_records_episode(self, pack, nb_model):
        episodes = []
        ex = Exchanger(make_session(pack, nb_model, sink=episodes.append))
        ex.send({"type": "hello", "mode": "simulated"})
        ex.send({"type": "reset", "goal": {"food": "mexican",
                                           "price": "reasonably priced",
                                           "area": "east"}})
        for act in TABLE_SEQUENCE:
            ex.send({"type": "action", "action": act})
        assert len(episodes) == 1
        entries = episodes[0]
        assert [e.act for e in entries] == TABLE_SEQUENCE
        assert entries[1].user_text == (
            "reasonably priced mexican food in the east of town")
        rendered = format_transcript(entries)
        assert "Salutation(greeting) | Hello!" in rendered
        assert "[no]" in rendered


class TestInteractiveSession:
    def test_full_human_dialogue_with_expert(self, pack, nb_model):
        policy = ExpertDriver(np.random.default_rng(0))
        ex = Exchanger(make_session(pack, nb_model, policy=policy))
        hello = ex.send({"type": "hello", "mode": "interactive"})
        assert hello["mode"] == "interactive"
        obs = ex.send({"type": "reset"})
        assert obs["awaiting_input"]
        assert "Hello!" in obs["system_text"]
        obs = ex.send({"type": "user_text",
                       "text": "cheap italian food in the north"})
        assert obs["awaiting_input"]
        assert "italian" in obs["system_text"]
        obs = ex.send({"type": "user_text", "text": "no"})
        assert obs["terminal"]
        assert "Bye!" in obs["system_text"]

    def test_interactive_needs_policy(self, pack, nb_model):
        ex = Exchanger(make_session(pack, nb_model, policy=None))
        reply = ex.send({"type": "hello", "mode": "interactive"})
        assert reply["type"] == "error"

    def test_user_text_requires_awaited_input(self, pack, nb_model):
        policy = ExpertDriver(np.random.default_rng(0))
        ex = Exchanger(make_session(pack, nb_model, policy=policy))
        ex.send({"type": "hello", "mode": "interactive"})
        reply = ex.send({"type": "user_text", "text": "hello"})
        assert reply["type"] == "error" and reply["reason"] == "bad_request"

    def test_gibberish_input_keeps_dialogue_alive(self, pack, nb_model):
        policy = ExpertDriver(np.random.default_rng(0))
        ex = Exchanger(make_session(pack, nb_model, policy=policy))
        ex.send({"type": "hello", "mode": "interactive"})
        ex.send({"type": "reset"})
        obs = ex.send({"type": "user_text", "text": "wibble wobble"})
        assert obs["type"] == "observation"
        assert obs["awaiting_input"]  # the system re-requests

    def test_action_rejected_in_interactive_mode(self, pack, nb_model):
        policy = ExpertDriver(np.random.default_rng(0))
        ex = Exchanger(make_session(pack, nb_model, policy=policy))
        ex.send({"type": "hello", "mode": "interactive"})
        ex.send({"type": "reset"})
        reply = ex.send({"type": "action", "action": "Salutation(greeting)"})
        assert reply["type"] == "error"


@pytest.fixture
def server(pack, nb_model):
    factory = SessionFactory(pack, nb_model,
                             EnvConfig(noise=NoiseConfig(enabled=False)),
                             seed=0,
                             policy=ExpertDriver(np.random.default_rng(0)))
    srv = DialogueServer(factory, port=0, ws_port=0)
    srv.start()
    yield srv
    srv.stop()


class TcpClient:
    def __init__(self, port):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=10)
        self.reader = self.sock.makefile("r", encoding="utf-8")
        self.next_id = 0

    def send(self, payload):
        msg = dict(payload)
        msg["id"] = self.next_id
        self.next_id += 1
        self.sock.sendall((json.dumps(msg) + "\n").encode())
        return json.loads(self.reader.readline())

    def send_raw(self, data: bytes):
        self.sock.sendall(data)
        return json.loads(self.reader.readline())

    def close(self):
        self.sock.close()


class TestTcpTransport:
    def test_episode_over_the_wire(self, server):
        client = TcpClient(server.port)
        assert client.send({"type": "hello", "mode": "simulated"})["type"] == "hello"
        obs = client.send({"type": "reset",
                           "goal": {"food": "mexican",
                                    "price": "reasonably priced",
                                    "area": "east"}})
        for act in TABLE_SEQUENCE:
            obs = client.send({"type": "action", "action": act})
            assert obs["type"] == "observation"
        assert obs["terminal"]
        assert client.send({"type": "bye"})["type"] == "bye"
        client.close()

    def test_malformed_bytes_leave_session_alive(self, server):
        client = TcpClient(server.port)
        err = client.send_raw(b"{{{\n")
        assert err["type"] == "error" and err["reason"] == "parse"
        assert client.send({"type": "hello", "mode": "simulated"})["type"] == "hello"
        client.close()

    def test_sequential_sessions(self, server):
        for _ in range(2):
            client = TcpClient(server.port)
            assert client.send({"type": "hello",
                                "mode": "simulated"})["type"] == "hello"
            client.close()

    def test_idle_timeout_aborts_with_error(self, pack, nb_model):
        factory = SessionFactory(pack, nb_model, EnvConfig(), seed=0)
        srv = DialogueServer(factory, port=0, ws_port=None, idle_timeout=0.3)
        srv.start()
        try:
            client = TcpClient(srv.port)
            assert client.send({"type": "hello",
                                "mode": "simulated"})["type"] == "hello"
            reply = json.loads(client.reader.readline())  # silence, wait it out
            assert reply["type"] == "error" and reply["reason"] == "timeout"
            assert client.reader.readline() == ""  # session torn down
            fresh = TcpClient(srv.port)  # the listener survives
            assert fresh.send({"type": "hello",
                               "mode": "simulated"})["type"] == "hello"
            fresh.close()
        finally:
            srv.stop()


class TestWebSocketTransport:
    def test_interactive_dialogue_over_websocket(self, server):
        from websockets.sync.client import connect
        with connect(f"ws://127.0.0.1:{server.ws_port}") as ws:
            msg_id = 0

            def send(payload):
                nonlocal msg_id
                payload["id"] = msg_id
                msg_id += 1
                ws.send(json.dumps(payload))
                return json.loads(ws.recv())

            assert send({"type": "hello", "mode": "interactive"})["type"] == "hello"
            obs = send({"type": "reset"})
            assert obs["awaiting_input"]
            obs = send({"type": "user_text",
                        "text": "expensive french food in the east"})
            while not obs.get("terminal") and obs.get("awaiting_input"):
                obs = send({"type": "user_text", "text": "no"})
            assert obs["terminal"]


class TestRemoteEnvironment:
    def test_reset_step_and_training_over_the_wire(self, server):
        remote = RemoteEnvironment("127.0.0.1", server.port)
        assert remote.num_actions == 35
        assert remote.state_dim == len(remote.vocabulary)
        obs = remote.reset()
        assert not obs.terminal and obs.valid
        nxt = remote.step(obs.valid[0])
        assert isinstance(nxt.reward, float)
        hp = HyperParams(total_learning_steps=40, replay_warmup=10,
                         batch_size=4, hidden_dims=(8, 8))
        result = run_training(remote, hp, np.random.default_rng(0))
        assert result.steps_done == 40
        remote.close()

    def test_disconnect_becomes_training_interrupted(self, pack, nb_model):
        factory = SessionFactory(pack, nb_model, EnvConfig(), seed=0)
        srv = DialogueServer(factory, port=0, ws_port=None)
        srv.start()
        remote = RemoteEnvironment("127.0.0.1", srv.port)
        remote.reset()
        srv.stop()  # yank the server mid-run
        hp = HyperParams(total_learning_steps=50, replay_warmup=5,
                         batch_size=2, hidden_dims=(8, 8))
        with pytest.raises((TrainingInterrupted, EnvironmentDisconnect)):
            remote.reset()
            run_training(remote, hp, np.random.default_rng(0))


def test_format_transcript_mirrors_table_columns():
    entries = [TranscriptEntry(np.array([0.0, 1.0]), "Salutation(greeting)",
                               "Hello!", ""),
               TranscriptEntry(np.array([0.5, 0.0]), "AskFor(more)",
                               "Anything else?", "no")]
    text = format_transcript(entries)
    lines = text.strip().split("\n")
    assert lines[0] == "0,1 | Salutation(greeting) | Hello!"
    assert lines[1] == "0.5,0 | AskFor(more) | Anything else? | [no]"
