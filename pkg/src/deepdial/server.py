"""Client-server environment protocol.

The environment is the server. Messages are newline-delimited JSON over
a TCP stream, and the identical schema travels over a WebSocket on a
second port for browser clients. The client tells the server which
action to execute; the server answers with the observed state, reward,
terminal flag and the valid action set.

Interactive sessions flip the roles: the server drives a loaded policy,
the connected client supplies the user's utterances.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
from dataclasses import dataclass, field

import numpy as np

from deepdial.acts import CATALOG, DialogueAct, act_index
from deepdial.constraints import NaiveBayesModel
from deepdial.datapack import DataPack
from deepdial.environment import (DialogueEnvironment, EnvConfig,
                                  EpisodeFinished, InvalidAction, Observation)
from deepdial.simulator import UserGoal
from deepdial.text import ScoredUtterance

logger = logging.getLogger(__name__)

PROTOCOL_TYPES = ("hello", "reset", "action", "user_text", "bye")


@dataclass
class TranscriptEntry:
    state: np.ndarray
    act: str
    system_text: str
    user_text: str


def format_transcript(entries: list[TranscriptEntry]) -> str:
    """Table-style episode log: state vector, act, verbalisation, [user]."""
    lines = []
    for e in entries:
        state = ",".join(f"{v:g}" for v in e.state)
        lines.append(f"{state} | {e.act} | {e.system_text}"
                     + (f" | [{e.user_text}]" if e.user_text else ""))
    return "\n".join(lines) + "\n"


class Session:
    """One protocol conversation; transport-agnostic.

    ``handle_line`` maps each request line to exactly one reply line and
    never raises: malformed input becomes an ``error`` reply and the
    session stays usable.
    """

    def __init__(self, env: DialogueEnvironment, policy=None,
                 transcript_sink=None):
        self.env = env
        self.policy = policy
        self.transcript_sink = transcript_sink
        self.mode: str | None = None
        self.last_id: int | None = None
        self.episode_active = False
        self.awaiting_input = False
        self.closed = False
        self._last_state: np.ndarray | None = None
        self._episode_log: list[TranscriptEntry] = []

    # -- plumbing ------------------------------------------------------------

    def handle_line(self, line: str) -> str:
        reply = self._dispatch(line)
        return json.dumps(reply)

    def _dispatch(self, line: str) -> dict:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            return self._error(-1, "parse", f"invalid json: {exc.msg}")
        if not isinstance(msg, dict):
            return self._error(-1, "parse", "message must be an object")
        msg_id = msg.get("id")
        if not isinstance(msg_id, int) or isinstance(msg_id, bool):
            return self._error(-1, "parse", "missing integer id")
        if self.last_id is not None and msg_id <= self.last_id:
            return self._error(msg_id, "bad_request",
                               f"id must exceed {self.last_id}")
        self.last_id = msg_id
        msg_type = msg.get("type")
        if msg_type not in PROTOCOL_TYPES:
            return self._error(msg_id, "bad_request",
                               f"unknown message type: {msg_type!r}")
        try:
            handler = getattr(self, f"_on_{msg_type}")
            return handler(msg_id, msg)
        except InvalidAction as exc:
            return self._error(msg_id, "invalid_action", str(exc))
        except EpisodeFinished as exc:
            return self._error(msg_id, "terminal", str(exc))
        except Exception as exc:  # session must survive anything
            logger.exception("session fault")
            return self._error(msg_id, "internal", str(exc))

    def _error(self, msg_id: int, reason: str, detail: str) -> dict:
        return {"id": msg_id, "type": "error", "reason": reason, "detail": detail}

    # -- handlers ------------------------------------------------------------

    def _on_hello(self, msg_id: int, msg: dict) -> dict:
        mode = msg.get("mode", "simulated")
        if mode not in ("simulated", "interactive"):
            return self._error(msg_id, "bad_request", f"unknown mode: {mode!r}")
        if mode == "interactive" and self.policy is None:
            return self._error(msg_id, "bad_request",
                               "server has no policy for interactive mode")
        self.mode = mode
        return {"id": msg_id, "type": "hello", "mode": mode,
                "catalog": [str(act) for act in CATALOG],
                "vocabulary": list(self.env.pack.vocab.words)}

    def _on_reset(self, msg_id: int, msg: dict) -> dict:
        if self.mode is None:
            return self._error(msg_id, "bad_request", "hello required first")
        self._flush_transcript()
        goal = None
        if isinstance(msg.get("goal"), dict):
            g = msg["goal"]
            goal = UserGoal(str(g.get("food", "")), str(g.get("price", "")),
                            str(g.get("area", "")))
        obs = self.env.reset(goal)
        self.episode_active = True
        self.awaiting_input = False
        self._last_state = obs.state
        if self.mode == "interactive":
            turns, obs = self._drive_policy(obs)
            return self._observation_reply(msg_id, obs, turns)
        return self._observation_reply(msg_id, obs)

    def _on_action(self, msg_id: int, msg: dict) -> dict:
        if self.mode != "simulated":
            return self._error(msg_id, "bad_request",
                               "action messages need a simulated session")
        if not self.episode_active:
            if self._last_state is not None:
                return self._error(msg_id, "terminal",
                                   "episode is over; reset before stepping")
            return self._error(msg_id, "bad_request", "reset required first")
        try:
            action = act_index(str(msg.get("action")))
        except ValueError as exc:
            return self._error(msg_id, "invalid_action", str(exc))
        state_before = self._last_state
        obs = self.env.step(action)
        self._log_turn(state_before, obs)
        self._last_state = obs.state
        if obs.terminal:
            self.episode_active = False
            self._flush_transcript()
        return self._observation_reply(msg_id, obs)

    def _on_user_text(self, msg_id: int, msg: dict) -> dict:
        if self.mode != "interactive":
            return self._error(msg_id, "bad_request",
                               "user_text messages need an interactive session")
        if not self.awaiting_input:
            return self._error(msg_id, "bad_request", "no system turn awaits input")
        text = str(msg.get("text", ""))
        state_before = self._last_state
        obs = self.env.finish_turn_human(text)
        self.awaiting_input = False
        self._log_turn(state_before, obs)
        self._last_state = obs.state
        # The first entry finalizes the turn whose text was already sent
        # while it awaited input; clients update its reward, not its text.
        finished = self._turn_info(obs)
        finished["completed"] = True
        turns: list[dict] = [finished]
        if obs.terminal:
            self.episode_active = False
            self._flush_transcript()
        else:
            more, obs = self._drive_policy(obs)
            turns += more
        reply = self._observation_reply(msg_id, obs, turns)
        reply["user_text"] = text
        return reply

    def _on_bye(self, msg_id: int, msg: dict) -> dict:
        self._flush_transcript()
        self.closed = True
        return {"id": msg_id, "type": "bye"}

    # -- interactive driving --------------------------------------------------

    def _drive_policy(self, obs: Observation) -> tuple[list[dict], Observation]:
        """Run the loaded policy until user input is needed or the episode ends.

        Returns rendered turn summaries plus the latest observation. When
        input is awaited the final turn carries the pending system text
        and no reward yet.
        """
        turns: list[dict] = []
        while not obs.terminal:
            action = self.policy.select(obs.state, obs.valid, self.env.context)
            pending = self.env.begin_turn(action)
            if pending.expects_input:
                self.awaiting_input = True
                turns.append({"act": str(pending.act),
                              "text": pending.system_text, "reward": None})
                break
            state_before = self._last_state
            obs = self.env.finish_turn(ScoredUtterance.empty())
            self._log_turn(state_before, obs)
            self._last_state = obs.state
            turns.append(self._turn_info(obs))
        if obs.terminal:
            self.episode_active = False
            self._flush_transcript()
        return turns, obs

    def _turn_info(self, obs: Observation) -> dict:
        return {"act": str(CATALOG[obs.act]) if obs.act is not None else None,
                "text": obs.system_text, "reward": obs.reward}

    # -- replies ---------------------------------------------------------------

    def _observation_reply(self, msg_id: int, obs: Observation,
                           turns: list[dict] | None = None) -> dict:
        reply = {
            "id": msg_id,
            "type": "observation",
            "state": [float(v) for v in obs.state],
            "reward": obs.reward,
            "terminal": obs.terminal,
            "valid_actions": [str(CATALOG[a]) for a in obs.valid],
            "system_text": obs.system_text,
            "user_text": obs.user_text,
        }
        if self.mode == "interactive":
            if turns is None:
                turns = []
            reply["system_turns"] = turns
            reply["awaiting_input"] = self.awaiting_input
            reply["reward"] = sum(t["reward"] or 0.0 for t in turns)
            reply["system_text"] = " ".join(
                t["text"] for t in turns
                if t["text"] and not t.get("completed"))
        return reply

    # -- transcripts -------------------------------------------------------------

    def _log_turn(self, state_before: np.ndarray | None, obs: Observation) -> None:
        if state_before is None or obs.act is None:
            return
        self._episode_log.append(TranscriptEntry(
            state_before, str(CATALOG[obs.act]), obs.system_text, obs.user_text))

    def _flush_transcript(self) -> None:
        if self._episode_log and self.transcript_sink is not None:
            self.transcript_sink(list(self._episode_log))
        self._episode_log = []


class SessionFactory:
    """Builds an isolated environment + session per connection."""

    def __init__(self, pack: DataPack, nb_model: NaiveBayesModel | None,
                 env_config: EnvConfig, seed: int = 0, policy=None,
                 transcript_sink=None):
        self.pack = pack
        self.nb_model = nb_model
        self.env_config = env_config
        self.policy = policy
        self.transcript_sink = transcript_sink
        self._seeds = np.random.SeedSequence(seed)
        self._lock = threading.Lock()

    def __call__(self) -> Session:
        with self._lock:
            child = self._seeds.spawn(1)[0]
        env = DialogueEnvironment(self.pack, self.nb_model, self.env_config,
                                  np.random.default_rng(child))
        return Session(env, policy=self.policy,
                       transcript_sink=self.transcript_sink)


_TIMEOUT_REPLY = ('{"id": -1, "type": "error", "reason": "timeout", '
                  '"detail": "no input before the idle timeout; episode aborted"}')


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self):
        session = self.server.session_factory()
        self.server.track(self.connection)
        if self.server.idle_timeout:
            self.connection.settimeout(self.server.idle_timeout)
        try:
            while True:
                try:
                    raw = self.rfile.readline()
                except TimeoutError:
                    self.wfile.write(_TIMEOUT_REPLY.encode("utf-8") + b"\n")
                    return
                if not raw:
                    return
                try:
                    line = raw.decode("utf-8").strip()
                except UnicodeDecodeError:
                    line = ""
                if not line:
                    continue
                reply = session.handle_line(line)
                self.wfile.write(reply.encode("utf-8") + b"\n")
                if session.closed:
                    return
        except (BrokenPipeError, ConnectionResetError, OSError):
            return
        finally:
            self.server.untrack(self.connection)


class _TCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._live = set()
        self._live_lock = threading.Lock()

    def track(self, conn):
        with self._live_lock:
            self._live.add(conn)

    def untrack(self, conn):
        with self._live_lock:
            self._live.discard(conn)

    def close_live_connections(self):
        with self._live_lock:
            for conn in list(self._live):
                try:
                    conn.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass


class DialogueServer:
    """TCP listener plus an optional WebSocket listener on a second port."""

    def __init__(self, factory: SessionFactory, host: str = "127.0.0.1",
                 port: int = 8201, ws_port: int | None = 8202,
                 idle_timeout: float | None = 120.0):
        self.factory = factory
        self.host = host
        self.idle_timeout = idle_timeout
        self._tcp = _TCPServer((host, port), _LineHandler)
        self._tcp.session_factory = factory
        self._tcp.idle_timeout = idle_timeout
        self.port = self._tcp.server_address[1]
        self._ws_server = None
        self.ws_port = None
        if ws_port is not None:
            from websockets.sync.server import serve as ws_serve
            self._ws_server = ws_serve(self._handle_ws, host, ws_port)
            self.ws_port = self._ws_server.socket.getsockname()[1]
        self._threads: list[threading.Thread] = []

    def _handle_ws(self, connection) -> None:
        from websockets.exceptions import ConnectionClosed
        session = self.factory()
        while True:
            try:
                message = connection.recv(timeout=self.idle_timeout)
            except TimeoutError:
                try:
                    connection.send(_TIMEOUT_REPLY)
                except ConnectionClosed:
                    pass
                return
            except ConnectionClosed:
                return
            if isinstance(message, bytes):
                message = message.decode("utf-8", errors="replace")
            connection.send(session.handle_line(message))
            if session.closed:
                return

    def start(self) -> None:
        t = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        t.start()
        self._threads.append(t)
        if self._ws_server is not None:
            t2 = threading.Thread(target=self._ws_server.serve_forever, daemon=True)
            t2.start()
            self._threads.append(t2)

    def stop(self) -> None:
        self._tcp.shutdown()
        self._tcp.close_live_connections()
        self._tcp.server_close()
        if self._ws_server is not None:
            self._ws_server.shutdown()
        for t in self._threads:
            t.join(timeout=5)

    def serve_forever(self) -> None:
        self.start()
        try:
            for t in self._threads:
                t.join()
        except KeyboardInterrupt:
            self.stop()
