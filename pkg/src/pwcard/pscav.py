"""Password-verifier protocol: the server keeps per-user validation data.

Personalization derives a secret user generator ``g_C = H1(C, alpha, beta)``.
The card stores ``W = g_C^h2(alpha)``; the server stores ``g_C`` and
``V = g_C^a(alpha)``, where ``h2`` and ``a`` are independent password
scalars.

Card                                       Server
  C, R_A = g_C^x                   ->
                                   <-      R_B = g_C^y
  C_c = H(sk, C, S, R_A, R_B)      ->
                                   <-      C_s = H(sk, S, C, R_B, R_A)

``u = H(C, S, R_A, R_B)``; the card computes ``sk = R_B^(x + u*a)`` and the
server ``sk = (R_A * V^u)^y``.  A wrong password changes both ``g_C`` as
recovered from ``W`` and ``a``, so the card's key no longer matches.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

from .card import CardCredential, Phase, Session, fresh_rng
from .errors import ConfirmationFailed, MalformedFrame, SuiteMismatch, UnexpectedMessage, UnknownIdentity
from .group import DebugGroup, GroupElement, HashRole, encode_fields, hmac_tag, password_bytes, role_hash, tags_equal
from .variants import require_insecure_variants
from .wire import Frame, MsgType, ProtocolId, expect, pack_fields, unpack_fields

PID = ProtocolId.PSCAV
TAG_LEN = 32


def user_generator(group: DebugGroup, beta: bytes, identity: bytes, alpha) -> GroupElement:
    pw = password_bytes(alpha)
    return group.hash_to_group(HashRole.H1, identity, hmac_tag(beta, encode_fields(identity, pw)))


def blinding_scalar(group: DebugGroup, alpha) -> int:
    return group.hash_to_scalar(HashRole.H2S_B, password_bytes(alpha))


def verifier_scalar(group: DebugGroup, alpha) -> int:
    return group.hash_to_scalar(HashRole.H2S_A, password_bytes(alpha))


def transcript_scalar(group: DebugGroup, identity, server_identity, r_a, r_b) -> int:
    return group.hash_to_scalar(HashRole.PI, identity, server_identity,
                                group.encode_element(r_a), group.encode_element(r_b))


def confirmation(group: DebugGroup, sk: GroupElement, first_id, second_id, first_el, second_el) -> bytes:
    return role_hash(HashRole.SK, group.encode_element(sk), first_id, second_id,
                     group.encode_element(first_el), group.encode_element(second_el))


def _decode(group, data):
    try:
        return group.decode_element(data)
    except (ValueError, SuiteMismatch) as exc:
        raise MalformedFrame(str(exc)) from None


@dataclass(frozen=True)
class PscavServerRecord:
    identity: bytes
    g_c: GroupElement
    v: GroupElement


@dataclass
class PscavCardCredential(CardCredential):
    group: DebugGroup | None = None
    blinded_generator: GroupElement | None = None

    SECRET_FIELDS: ClassVar[tuple[str, ...]] = ("blinded_generator",)
    protocol_id: ClassVar[int] = PID

    def _zero_value(self, name):
        return self.group.identity


@dataclass
class PscavServer:
    group: DebugGroup
    identity: bytes
    records: dict[bytes, PscavServerRecord] = field(default_factory=dict)
    protocol_id: ClassVar[int] = PID

    def add(self, record: PscavServerRecord) -> None:
        self.records[record.identity] = record

    def __repr__(self):
        return f"PscavServer(identity={self.identity!r}, users={len(self.records)})"


@dataclass
class PscavSession(Session):
    role: str = "card"
    identity: bytes = b""
    server_identity: bytes = b""
    variant: bool = False
    ephemeral: int | None = None
    r_a: GroupElement | None = None
    r_b: GroupElement | None = None
    u: int | None = None
    sk: GroupElement | None = None
    record: PscavServerRecord | None = None

    SECRET_FIELDS: ClassVar[tuple[str, ...]] = ("ephemeral", "u", "sk", "record")

    def __repr__(self):
        return f"PscavSession(role={self.role!r}, phase={self.phase.value}, variant={self.variant})"


def pscav_personalize(group: DebugGroup, beta: bytes, identity: bytes, alpha, *, server_identity: bytes,
                      rng_seed=None, chain_key=None,
                      counter_limit: int = 0) -> tuple[PscavCardCredential, PscavServerRecord]:
    if not identity:
        raise ValueError("card identity must be nonempty")
    g_c = user_generator(group, beta, identity, alpha)
    cred = PscavCardCredential(
        identity=bytes(identity),
        server_identity=bytes(server_identity),
        rng=fresh_rng(rng_seed, chain_key),
        counter_limit=counter_limit,
        group=group,
        blinded_generator=group.exp(g_c, blinding_scalar(group, alpha)),
    )
    record = PscavServerRecord(bytes(identity), g_c, group.exp(g_c, verifier_scalar(group, alpha)))
    return cred, record


def pscav_card_start(cred: PscavCardCredential, alpha) -> tuple[PscavSession, Frame]:
    """Unblind ``g_C`` with the entered password; a wrong one fails later, at the server."""
    cred.begin_query()
    group = cred.group
    x = group.scalar_from_bytes(cred.draw())
    g_c = group.exp(cred.blinded_generator, group.scalar_inverse(blinding_scalar(group, alpha)))
    r_a = group.exp(g_c, x)
    session = PscavSession(Phase.AWAIT_MSG2, "card", cred.identity, cred.server_identity, ephemeral=x, r_a=r_a)
    return session, Frame(PID, MsgType.MSG1, pack_fields(cred.identity, group.encode_element(r_a)))


def _server_open(server, frame, rng, variant):
    group = server.group
    expect(frame, PID, MsgType.MSG1)
    identity, raw = unpack_fields(frame.payload, 2)
    record = server.records.get(bytes(identity))
    if record is None:
        raise UnknownIdentity("no record for this card")
    r_a = group.check_element(_decode(group, raw))
    y = group.random_scalar(rng)
    r_b = group.exp(record.g_c, y)
    s = PscavSession(Phase.AWAIT_MSG3, "server", record.identity, server.identity, variant,
                     ephemeral=y, r_a=r_a, r_b=r_b, record=record)
    s.u = transcript_scalar(group, s.identity, s.server_identity, r_a, r_b)
    return s


def _server_key(group, s):
    s.sk = group.exp(group.mul(s.r_a, group.exp(s.record.v, s.u)), s.ephemeral)


def pscav_server_respond(server: PscavServer, frame: Frame, rng=None) -> tuple[PscavSession, Frame]:
    s = _server_open(server, frame, rng, False)
    return s, Frame(PID, MsgType.MSG2, pack_fields(server.group.encode_element(s.r_b)))


def _card_key(cred, alpha, s):
    group = cred.group
    s.u = transcript_scalar(group, s.identity, s.server_identity, s.r_a, s.r_b)
    s.sk = group.exp(s.r_b, (s.ephemeral + s.u * verifier_scalar(group, alpha)) % group.q)
    s.ephemeral = None


def _card_tag(group, s):
    return confirmation(group, s.sk, s.identity, s.server_identity, s.r_a, s.r_b)


def _server_tag(group, s):
    return confirmation(group, s.sk, s.server_identity, s.identity, s.r_b, s.r_a)


def pscav_card_confirm(session: PscavSession, cred: PscavCardCredential, alpha, frame: Frame) -> Frame:
    if session.phase is not Phase.AWAIT_MSG2:
        raise UnexpectedMessage("card is not waiting for the second message")
    try:
        expect(frame, PID, MsgType.MSG2)
        (raw,) = unpack_fields(frame.payload, 1)
        session.r_b = cred.group.check_element(_decode(cred.group, raw))
        _card_key(cred, alpha, session)
    except Exception:
        session.fail()
        raise
    session.phase = Phase.AWAIT_MSG4
    return Frame(PID, MsgType.MSG3, _card_tag(cred.group, session))


def pscav_server_finish(server: PscavServer, session: PscavSession, frame: Frame) -> tuple[Frame, bytes]:
    if session.phase is not Phase.AWAIT_MSG3 or session.variant:
        raise UnexpectedMessage("server is not waiting for the third message")
    group = server.group
    try:
        expect(frame, PID, MsgType.MSG3)
        _server_key(group, session)
        if len(frame.payload) != TAG_LEN or not tags_equal(frame.payload, _card_tag(group, session)):
            raise ConfirmationFailed("card confirmation invalid")
    except Exception:
        session.fail()
        raise
    reply = Frame(PID, MsgType.MSG4, _server_tag(group, session))
    key = group.encode_element(session.sk)
    session.erase()
    session.phase = Phase.DONE
    return reply, key


def pscav_card_finish(session: PscavSession, cred: PscavCardCredential, frame: Frame) -> bytes:
    if session.phase is not Phase.AWAIT_MSG4:
        raise UnexpectedMessage("card is not waiting for the fourth message")
    try:
        expect(frame, PID, MsgType.MSG4)
        if len(frame.payload) != TAG_LEN or not tags_equal(frame.payload, _server_tag(cred.group, session)):
            raise ConfirmationFailed("server confirmation invalid")
    except Exception:
        session.fail()
        raise
    key = cred.group.encode_element(session.sk)
    session.erase()
    session.phase = Phase.DONE
    cred.record_success()
    return key


# server-first ordering, attack harness only

def pscav_insecure_variant_respond(server: PscavServer, frame: Frame, rng=None) -> tuple[PscavSession, Frame]:
    require_insecure_variants()
    group = server.group
    s = _server_open(server, frame, rng, True)
    _server_key(group, s)
    return s, Frame(PID, MsgType.VARIANT2, pack_fields(group.encode_element(s.r_b), _server_tag(group, s)))


def pscav_card_confirm_variant(session: PscavSession, cred: PscavCardCredential, alpha,
                               frame: Frame) -> tuple[Frame, bytes]:
    if session.phase is not Phase.AWAIT_MSG2:
        raise UnexpectedMessage("card is not waiting for the second message")
    group = cred.group
    try:
        expect(frame, PID, MsgType.VARIANT2)
        raw, tag = unpack_fields(frame.payload, 2)
        session.r_b = group.check_element(_decode(group, raw))
        _card_key(cred, alpha, session)
        if not tags_equal(tag, _server_tag(group, session)):
            raise ConfirmationFailed("server confirmation invalid")
    except Exception:
        session.fail()
        raise
    reply = Frame(PID, MsgType.MSG3, _card_tag(group, session))
    key = group.encode_element(session.sk)
    session.erase()
    session.phase = Phase.DONE
    cred.record_success()
    return reply, key


def pscav_server_finish_variant(server: PscavServer, session: PscavSession, frame: Frame) -> bytes:
    if session.phase is not Phase.AWAIT_MSG3 or not session.variant:
        raise UnexpectedMessage("server is not waiting for the third message")
    group = server.group
    try:
        expect(frame, PID, MsgType.MSG3)
        if len(frame.payload) != TAG_LEN or not tags_equal(frame.payload, _card_tag(group, session)):
            raise ConfirmationFailed("card confirmation invalid")
    except Exception:
        session.fail()
        raise
    key = group.encode_element(session.sk)
    session.erase()
    session.phase = Phase.DONE
    return key


class CardHandshake:
    protocol_id = PID

    def __init__(self, cred: PscavCardCredential, alpha, variant: bool = False):
        self.cred = cred
        self.alpha = alpha
        self.variant = variant
        self.session = None
        self.session_key = None

    def start(self) -> Frame:
        self.session, frame = pscav_card_start(self.cred, self.alpha)
        return frame

    def receive(self, frame: Frame) -> Frame | None:
        if self.variant:
            reply, self.session_key = pscav_card_confirm_variant(self.session, self.cred, self.alpha, frame)
            return reply
        if self.session.phase is Phase.AWAIT_MSG2:
            return pscav_card_confirm(self.session, self.cred, self.alpha, frame)
        self.session_key = pscav_card_finish(self.session, self.cred, frame)
        return None


class ServerHandshake:
    protocol_id = PID

    def __init__(self, server: PscavServer, rng=None, variant: bool = False):
        self.server = server
        self.rng = rng
        self.variant = variant
        self.session = None
        self.session_key = None

    def receive(self, frame: Frame) -> Frame | None:
        if self.session is None:
            respond = pscav_insecure_variant_respond if self.variant else pscav_server_respond
            self.session, reply = respond(self.server, frame, self.rng)
            return reply
        if self.variant:
            self.session_key = pscav_server_finish_variant(self.server, self.session, frame)
            return None
        reply, self.session_key = pscav_server_finish(self.server, self.session, frame)
        return reply
