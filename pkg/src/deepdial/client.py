"""Learning-agent side of the wire protocol: an environment handle that
forwards reset/step over a TCP connection to a running server."""

from __future__ import annotations

import json
import socket

import numpy as np

from deepdial.dqn import EnvironmentDisconnect
from deepdial.environment import Observation


class ProtocolError(RuntimeError):
    """The server answered with an error or an unexpected message."""


class RemoteEnvironment:
    """Speaks the newline-delimited JSON schema as the simulated-mode client."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise EnvironmentDisconnect(f"cannot reach {host}:{port}: {exc}") from exc
        self._reader = self._sock.makefile("r", encoding="utf-8")
        self._next_id = 0
        hello = self._exchange({"type": "hello", "mode": "simulated"})
        if hello.get("type") != "hello":
            raise ProtocolError(f"handshake rejected: {hello}")
        self.catalog: list[str] = list(hello["catalog"])
        self.vocabulary: list[str] = list(hello["vocabulary"])
        self._index = {act: i for i, act in enumerate(self.catalog)}
        self.num_actions = len(self.catalog)
        self.state_dim = len(self.vocabulary)

    def _exchange(self, payload: dict) -> dict:
        msg = dict(payload)
        msg["id"] = self._next_id
        self._next_id += 1
        try:
            self._sock.sendall((json.dumps(msg) + "\n").encode("utf-8"))
            line = self._reader.readline()
        except OSError as exc:
            raise EnvironmentDisconnect(f"connection lost: {exc}") from exc
        if not line:
            raise EnvironmentDisconnect("server closed the connection")
        reply = json.loads(line)
        if reply.get("id") != msg["id"]:
            raise ProtocolError(
                f"reply id {reply.get('id')} does not echo request {msg['id']}")
        return reply

    def _observation(self, reply: dict) -> Observation:
        if reply.get("type") == "error":
            raise ProtocolError(f"{reply.get('reason')}: {reply.get('detail')}")
        if reply.get("type") != "observation":
            raise ProtocolError(f"expected observation, got {reply.get('type')}")
        valid = tuple(sorted(self._index[a] for a in reply["valid_actions"]))
        return Observation(
            state=np.asarray(reply["state"], dtype=np.float64),
            reward=float(reply["reward"]),
            terminal=bool(reply["terminal"]),
            valid=valid,
            system_text=reply.get("system_text", ""),
            user_text=reply.get("user_text", ""),
        )

    def reset(self) -> Observation:
        return self._observation(self._exchange({"type": "reset"}))

    def step(self, action: int) -> Observation:
        return self._observation(
            self._exchange({"type": "action", "action": self.catalog[action]}))

    def close(self) -> None:
        try:
            self._exchange({"type": "bye"})
        except (EnvironmentDisconnect, ProtocolError):
            pass
        finally:
            try:
                self._sock.close()
            except OSError:
                pass
