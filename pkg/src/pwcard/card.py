"""Pieces shared by the three protocols: card bookkeeping, sessions, and a
driver that runs a card handshake against a server handshake in-process."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from typing import ClassVar

from .chain_rng import RngState, rng_init, rng_next, zeroized
from .errors import AuthError, CardDestroyed
from .wire import Frame, reject_frame


class Phase(Enum):
    AWAIT_MSG2 = "await-msg2"
    AWAIT_MSG3 = "await-msg3"
    AWAIT_MSG4 = "await-msg4"
    DONE = "done"
    FAILED = "failed"


def fresh_rng(seed: bytes | None = None, chain_key: bytes | None = None) -> RngState:
    return rng_init(seed if seed is not None else os.urandom(32),
                    chain_key if chain_key is not None else os.urandom(32))


@dataclass
class CardCredential:
    """Fields every card carries, whatever the protocol.

    ``counter_limit == 0`` means no limit (a Type I card).  The counter is
    cleared only when the card itself verifies the server's confirmation.
    """

    identity: bytes
    server_identity: bytes
    rng: RngState
    query_counter: int = 0
    counter_limit: int = 0
    destroyed: bool = False

    SECRET_FIELDS: ClassVar[tuple[str, ...]] = ()

    def begin_query(self) -> None:
        if self.destroyed:
            raise CardDestroyed("card destroyed")
        if self.counter_limit and self.query_counter >= self.counter_limit:
            self.destroy()
            raise CardDestroyed("card destroyed")
        self.query_counter += 1

    def draw(self) -> bytes:
        out, self.rng = rng_next(self.rng)
        return out

    def destroy(self) -> None:
        for name in self.SECRET_FIELDS:
            setattr(self, name, self._zero_value(name))
        self.rng = zeroized(self.rng)
        self.destroyed = True

    def _zero_value(self, name):
        return bytes(len(getattr(self, name)))

    def record_success(self) -> None:
        self.query_counter = 0


@dataclass
class Session:
    phase: Phase
    SECRET_FIELDS: ClassVar[tuple[str, ...]] = ()

    def erase(self) -> None:
        for name in self.SECRET_FIELDS:
            setattr(self, name, None)

    def fail(self) -> None:
        self.erase()
        self.phase = Phase.FAILED

    def secrets_present(self) -> list[str]:
        return [n for n in self.SECRET_FIELDS if getattr(self, n) is not None]


@dataclass
class HandshakeResult:
    frames: list[Frame] = field(default_factory=list)
    card_key: bytes | None = None
    server_key: bytes | None = None
    error: Exception | None = None

    @property
    def accepted(self) -> bool:
        return self.error is None and self.card_key is not None and self.server_key is not None

    def msg_types(self) -> list[int]:
        return [f.msg_type for f in self.frames]


def run_handshake(card, server) -> HandshakeResult:
    """Shuttle frames between a card driver and a server driver.

    Both drivers expose ``receive(frame) -> Frame | None`` and
    ``session_key``; the card also has ``start()``.  A server-side failure
    becomes a reject frame, as on the network.
    """
    res = HandshakeResult()
    frame = card.start()
    res.frames.append(frame)
    while True:
        try:
            reply = server.receive(frame)
        except AuthError as exc:
            res.frames.append(reject_frame(frame.protocol_id))
            res.error = exc
            break
        if reply is None:
            break
        res.frames.append(reply)
        try:
            frame = card.receive(reply)
        except AuthError as exc:
            res.error = exc
            break
        if frame is None:
            break
        res.frames.append(frame)
    res.card_key = card.session_key
    res.server_key = server.session_key
    return res
