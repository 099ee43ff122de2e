"""Symmetric-key smart-card authentication (three messages).

Card                                       Server
  C, nonce_c, E_K(C || R_c)        ->
                                   <-      nonce_s, E_K(C || R_s), C_s
  C_c                              ->

K = HMAC(beta, C) is shared by card and server; the card only holds it
encrypted under the user's password.  The inner encryption is an
unauthenticated AES-CTR stream, so the only validity check is that the
decrypted identity matches.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass
from typing import ClassVar

from .card import CardCredential, Phase, Session, fresh_rng
from .errors import ConfirmationFailed, IdentityMismatch, MalformedFrame, UnexpectedMessage
from .group import NONCE_LEN, encode_fields, hmac_tag, kdf, stream_xor, tags_equal, unwrap_key, wrap_key
from .wire import Frame, MsgType, ProtocolId, expect, pack_fields, unpack_fields

PID = ProtocolId.SSCA
NONCE_BYTES = 32
TAG_LEN = 32


def card_key(beta: bytes, identity: bytes) -> bytes:
    return hmac_tag(beta, identity)


def session_key(identity: bytes, server_identity: bytes, r_card: bytes, r_server: bytes) -> bytes:
    return kdf(b"ssca-sk", identity, server_identity, r_card, r_server)


def server_tag(sk, identity, server_identity, r_card, r_server):
    return hmac_tag(sk, encode_fields(server_identity, identity, r_server, r_card))


def card_tag(sk, identity, server_identity, r_card, r_server):
    return hmac_tag(sk, encode_fields(identity, server_identity, r_card, r_server))


def seal(key, nonce, identity, value):
    return stream_xor(key, nonce, identity + value)


def open_sealed(key, nonce, identity, ct):
    """Decrypt ``C || R`` and return R, or None if the identity is wrong."""
    pt = stream_xor(key, nonce, ct)
    if len(pt) != len(identity) + NONCE_BYTES or not tags_equal(pt[:len(identity)], identity):
        return None
    return pt[len(identity):]


@dataclass
class SscaCardCredential(CardCredential):
    wrapped_key: bytes = b""

    SECRET_FIELDS: ClassVar[tuple[str, ...]] = ("wrapped_key",)


@dataclass(frozen=True)
class SscaServer:
    master_secret: bytes
    identity: bytes

    def __repr__(self):
        return f"SscaServer(identity={self.identity!r})"


@dataclass
class SscaSession(Session):
    role: str = "card"
    identity: bytes = b""
    server_identity: bytes = b""
    key: bytes | None = None
    r_card: bytes | None = None
    r_server: bytes | None = None
    sk: bytes | None = None
    session_key: bytes | None = None
    credential: SscaCardCredential | None = None

    SECRET_FIELDS: ClassVar[tuple[str, ...]] = ("key", "r_card", "r_server", "sk")

    def __repr__(self):
        return f"SscaSession(role={self.role!r}, phase={self.phase.value})"


def ssca_personalize(beta: bytes, identity: bytes, alpha, *, server_identity: bytes,
                     rng_seed: bytes | None = None, chain_key: bytes | None = None,
                     counter_limit: int = 0) -> SscaCardCredential:
    if not identity:
        raise ValueError("card identity must be nonempty")
    return SscaCardCredential(
        identity=bytes(identity),
        server_identity=bytes(server_identity),
        rng=fresh_rng(rng_seed, chain_key),
        counter_limit=counter_limit,
        wrapped_key=wrap_key(alpha, card_key(beta, identity)),
    )


def ssca_card_start(cred: SscaCardCredential, alpha) -> tuple[SscaSession, Frame]:
    """Always produces a frame: a wrong password just yields the wrong key."""
    cred.begin_query()
    key = unwrap_key(alpha, cred.wrapped_key)
    r_card = cred.draw()
    nonce = cred.draw()[:NONCE_LEN]
    ct = seal(key, nonce, cred.identity, r_card)
    session = SscaSession(Phase.AWAIT_MSG2, "card", cred.identity, cred.server_identity,
                          key=key, r_card=r_card, credential=cred)
    return session, Frame(PID, MsgType.MSG1, pack_fields(cred.identity, nonce, ct))


def ssca_server_respond(server: SscaServer, frame: Frame, rng=None) -> tuple[SscaSession, Frame]:
    expect(frame, PID, MsgType.MSG1)
    identity, nonce, ct = unpack_fields(frame.payload, 3)
    if not identity or len(nonce) != NONCE_LEN:
        raise MalformedFrame("bad first message")
    key = card_key(server.master_secret, identity)
    r_card = open_sealed(key, nonce, identity, ct)
    if r_card is None:
        raise IdentityMismatch("identity check failed")
    rng = rng or random.SystemRandom()
    r_server = rng.randbytes(NONCE_BYTES)
    nonce_s = rng.randbytes(NONCE_LEN)
    sk = session_key(identity, server.identity, r_card, r_server)
    tag = server_tag(sk, identity, server.identity, r_card, r_server)
    session = SscaSession(Phase.AWAIT_MSG3, "server", identity, server.identity,
                          key=key, r_card=r_card, r_server=r_server, sk=sk)
    return session, Frame(PID, MsgType.MSG2, pack_fields(nonce_s, seal(key, nonce_s, identity, r_server), tag))


def ssca_card_finish(session: SscaSession, frame: Frame) -> Frame:
    if session.phase is not Phase.AWAIT_MSG2:
        raise UnexpectedMessage("card is not waiting for the second message")
    try:
        expect(frame, PID, MsgType.MSG2)
        nonce_s, ct, tag = unpack_fields(frame.payload, 3)
        r_server = open_sealed(session.key, nonce_s, session.identity, ct) if len(nonce_s) == NONCE_LEN else None
        if r_server is None:
            raise ConfirmationFailed("server message does not decrypt to this card")
        sk = session_key(session.identity, session.server_identity, session.r_card, r_server)
        if not tags_equal(tag, server_tag(sk, session.identity, session.server_identity, session.r_card, r_server)):
            raise ConfirmationFailed("server confirmation tag invalid")
    except Exception:
        session.fail()
        raise
    reply = card_tag(sk, session.identity, session.server_identity, session.r_card, r_server)
    session.erase()
    session.session_key = sk
    session.phase = Phase.DONE
    if session.credential is not None:
        session.credential.record_success()
    return Frame(PID, MsgType.MSG3, reply)


def ssca_server_finish(session: SscaSession, frame: Frame) -> bytes:
    """Verify the card's tag and return the session key, or raise."""
    if session.phase is not Phase.AWAIT_MSG3:
        raise UnexpectedMessage("server is not waiting for the third message")
    try:
        expect(frame, PID, MsgType.MSG3)
        expected = card_tag(session.sk, session.identity, session.server_identity,
                             session.r_card, session.r_server)
        if len(frame.payload) != TAG_LEN or not tags_equal(frame.payload, expected):
            raise ConfirmationFailed("card confirmation tag invalid")
    except Exception:
        session.fail()
        raise
    sk = session.sk
    session.erase()
    session.session_key = sk
    session.phase = Phase.DONE
    return sk


class CardHandshake:
    protocol_id = PID

    def __init__(self, cred: SscaCardCredential, alpha):
        self.cred = cred
        self.alpha = alpha
        self.session = None
        self.session_key = None

    def start(self) -> Frame:
        self.session, frame = ssca_card_start(self.cred, self.alpha)
        return frame

    def receive(self, frame: Frame) -> Frame | None:
        reply = ssca_card_finish(self.session, frame)
        self.session_key = self.session.session_key
        return reply


class ServerHandshake:
    protocol_id = PID

    def __init__(self, server: SscaServer, rng=None):
        self.server = server
        self.rng = rng
        self.session = None
        self.session_key = None

    def receive(self, frame: Frame) -> Frame | None:
        if self.session is None:
            self.session, reply = ssca_server_respond(self.server, frame, self.rng)
            return reply
        self.session_key = ssca_server_finish(self.session, frame)
        return None


def new_master_secret() -> bytes:
    return os.urandom(32)
