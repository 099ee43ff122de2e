"""Identity-based password-protected authentication over a pairing group.

Setup picks a master scalar beta.  A card for identity C holds
``D = H(C)^(beta * h(alpha))``: its identity-based private key, blinded by
the password.  The exchange (four messages, card confirms first):

Card                                       Server
  C, R_A = g_C^x                   ->
                                   <-      R_B = g_S^y
  C_C = HMAC_K1(C, S, R_A, R_B)    ->
                                   <-      C_S = HMAC_K1(S, C, R_B, R_A)

with ``sk = e(g_C, g_S)^((x+s_A)(y+s_B)beta)`` and ``K1 = KDF(sk, 1)``.
The card evaluates it as ``e(D^((x+s_A)/h(alpha)), g_S^s_B * R_B)``, the
server as ``e(g_C^s_A * R_A, g_S^((y+s_B)beta))``.

With ``verifier=True`` (protocol id 0x03) the user generator is
``H(C, alpha)`` and the server keeps it per user.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

from .card import CardCredential, Phase, Session, fresh_rng
from .errors import ConfirmationFailed, MalformedFrame, SuiteMismatch, UnexpectedMessage, UnknownIdentity
from .group import DebugGroup, GroupElement, HashRole, TargetElement, encode_fields, hmac_tag, kdf, password_bytes, tags_equal
from .variants import require_insecure_variants
from .wire import Frame, MsgType, ProtocolId, expect, pack_fields, unpack_fields

TAG_LEN = 32


@dataclass(frozen=True)
class PscabParams:
    group: DebugGroup
    server_identity: bytes
    g_s: GroupElement

    @classmethod
    def create(cls, group: DebugGroup, server_identity: bytes) -> "PscabParams":
        return cls(group, bytes(server_identity), group.hash_to_group(HashRole.H2G, server_identity))

    @property
    def generator(self) -> GroupElement:
        return self.group.subgroup_generator


def user_generator(group: DebugGroup, identity: bytes, alpha=None) -> GroupElement:
    if alpha is None:
        return group.hash_to_group(HashRole.H2G, identity)
    return group.hash_to_group(HashRole.H2G, identity, password_bytes(alpha))


def password_scalar(group: DebugGroup, alpha) -> int:
    return group.hash_to_scalar(HashRole.H2S, password_bytes(alpha))


def pi(group: DebugGroup, first: GroupElement, second: GroupElement) -> int:
    return group.hash_to_scalar(HashRole.PI, group.encode_element(first), group.encode_element(second))


def confirmation_key(group: DebugGroup, sk: TargetElement) -> bytes:
    return kdf(group.encode_target(sk), b"\x01")


def _tag(group, k1, first_id, second_id, first_el, second_el):
    return hmac_tag(k1, encode_fields(first_id, second_id, group.encode_element(first_el), group.encode_element(second_el)))


def _decode(group, data):
    try:
        return group.decode_element(data)
    except (ValueError, SuiteMismatch) as exc:
        raise MalformedFrame(str(exc)) from None


@dataclass
class PscabCardCredential(CardCredential):
    group: DebugGroup | None = None
    g_s: GroupElement | None = None
    blinded_key: GroupElement | None = None
    verifier: bool = False

    SECRET_FIELDS: ClassVar[tuple[str, ...]] = ("blinded_key",)

    @property
    def protocol_id(self) -> int:
        return ProtocolId.PSCABV if self.verifier else ProtocolId.PSCAB

    def _zero_value(self, name):
        return self.group.identity


@dataclass
class PscabServer:
    params: PscabParams
    master: int
    records: dict[bytes, GroupElement] | None = None

    @property
    def verifier(self) -> bool:
        return self.records is not None

    @property
    def protocol_id(self) -> int:
        return ProtocolId.PSCABV if self.verifier else ProtocolId.PSCAB

    def __repr__(self):
        return f"PscabServer(server_identity={self.params.server_identity!r}, verifier={self.verifier})"


@dataclass
class PscabSession(Session):
    role: str = "card"
    protocol_id: int = ProtocolId.PSCAB
    identity: bytes = b""
    variant: bool = False
    ephemeral: int | None = None
    r_a: GroupElement | None = None
    r_b: GroupElement | None = None
    g_c: GroupElement | None = None
    sk: TargetElement | None = None
    k1: bytes | None = None
    session_key: bytes | None = field(default=None, repr=False)

    SECRET_FIELDS: ClassVar[tuple[str, ...]] = ("ephemeral", "sk", "k1", "session_key")

    def __repr__(self):
        return f"PscabSession(role={self.role!r}, phase={self.phase.value}, variant={self.variant})"


def pscab_setup(group: DebugGroup, server_identity: bytes, rng=None) -> tuple[PscabParams, int]:
    return PscabParams.create(group, server_identity), group.random_scalar(rng)


def _personalize(params, beta, identity, alpha, verifier, rng_seed, chain_key, counter_limit):
    if not identity:
        raise ValueError("card identity must be nonempty")
    group = params.group
    g_c = user_generator(group, identity, alpha if verifier else None)
    d = group.exp(g_c, beta * password_scalar(group, alpha) % group.q)
    cred = PscabCardCredential(
        identity=bytes(identity),
        server_identity=params.server_identity,
        rng=fresh_rng(rng_seed, chain_key),
        counter_limit=counter_limit,
        group=group,
        g_s=params.g_s,
        blinded_key=d,
        verifier=verifier,
    )
    return cred, g_c


def pscab_extract(params: PscabParams, beta: int, identity: bytes, alpha, *, rng_seed=None,
                  chain_key=None, counter_limit: int = 0) -> PscabCardCredential:
    return _personalize(params, beta, identity, alpha, False, rng_seed, chain_key, counter_limit)[0]


def pscab_extract_v(params: PscabParams, beta: int, identity: bytes, alpha, *, rng_seed=None,
                    chain_key=None, counter_limit: int = 0) -> tuple[PscabCardCredential, GroupElement]:
    """Verifier variant: returns the card and the server's per-user ``g_C``."""
    return _personalize(params, beta, identity, alpha, True, rng_seed, chain_key, counter_limit)


def pscab_card_start(cred: PscabCardCredential, alpha) -> tuple[PscabSession, Frame]:
    cred.begin_query()
    group = cred.group
    x = group.scalar_from_bytes(cred.draw())
    g_c = user_generator(group, cred.identity, alpha if cred.verifier else None)
    r_a = group.exp(g_c, x)
    session = PscabSession(Phase.AWAIT_MSG2, "card", cred.protocol_id, cred.identity, ephemeral=x, r_a=r_a)
    return session, Frame(cred.protocol_id, MsgType.MSG1, pack_fields(cred.identity, group.encode_element(r_a)))


def _server_open(server, frame, rng, variant):
    params = server.params
    group = params.group
    expect(frame, server.protocol_id, MsgType.MSG1)
    identity, raw = unpack_fields(frame.payload, 2)
    if not identity:
        raise MalformedFrame("empty identity")
    r_a = group.check_element(_decode(group, raw))
    if server.verifier:
        g_c = server.records.get(bytes(identity))
        if g_c is None:
            raise UnknownIdentity("no record for this card")
    else:
        g_c = user_generator(group, identity)
    y = group.random_scalar(rng)
    r_b = group.exp(params.g_s, y)
    return PscabSession(Phase.AWAIT_MSG3, "server", server.protocol_id, bytes(identity), variant,
                        ephemeral=y, r_a=r_a, r_b=r_b, g_c=g_c)


def _server_key(server, s):
    group = server.params.group
    s_a = pi(group, s.r_a, s.r_b)
    s_b = pi(group, s.r_b, s.r_a)
    left = group.mul(group.exp(s.g_c, s_a), s.r_a)
    right = group.exp(server.params.g_s, (s.ephemeral + s_b) * server.master % group.q)
    s.sk = group.pair(left, right)
    s.k1 = confirmation_key(group, s.sk)


def pscab_server_respond(server: PscabServer, frame: Frame, rng=None) -> tuple[PscabSession, Frame]:
    s = _server_open(server, frame, rng, False)
    return s, Frame(server.protocol_id, MsgType.MSG2, pack_fields(server.params.group.encode_element(s.r_b)))


def _card_key(cred, alpha, s):
    group = cred.group
    s_a = pi(group, s.r_a, s.r_b)
    s_b = pi(group, s.r_b, s.r_a)
    h_inv = group.scalar_inverse(password_scalar(group, alpha))
    left = group.exp(cred.blinded_key, (s.ephemeral + s_a) * h_inv % group.q)
    right = group.mul(group.exp(cred.g_s, s_b), s.r_b)
    s.sk = group.pair(left, right)
    s.k1 = confirmation_key(group, s.sk)
    s.ephemeral = None


def _card_tag(cred, s):
    return _tag(cred.group, s.k1, cred.identity, cred.server_identity, s.r_a, s.r_b)


def _server_tag(group, k1, identity, server_identity, s):
    return _tag(group, k1, server_identity, identity, s.r_b, s.r_a)


def pscab_card_confirm(session: PscabSession, cred: PscabCardCredential, alpha, frame: Frame) -> Frame:
    if session.phase is not Phase.AWAIT_MSG2 or session.variant:
        raise UnexpectedMessage("card is not waiting for the second message")
    try:
        expect(frame, cred.protocol_id, MsgType.MSG2)
        (raw,) = unpack_fields(frame.payload, 1)
        session.r_b = cred.group.check_element(_decode(cred.group, raw))
        _card_key(cred, alpha, session)
    except Exception:
        session.fail()
        raise
    session.phase = Phase.AWAIT_MSG4
    return Frame(cred.protocol_id, MsgType.MSG3, _card_tag(cred, session))


def pscab_server_finish(server: PscabServer, session: PscabSession, frame: Frame) -> tuple[Frame, bytes]:
    """Check the card's confirmation; only then release the server's."""
    if session.phase is not Phase.AWAIT_MSG3 or session.variant:
        raise UnexpectedMessage("server is not waiting for the third message")
    group = server.params.group
    try:
        expect(frame, server.protocol_id, MsgType.MSG3)
        _server_key(server, session)
        expected = _tag(group, session.k1, session.identity, server.params.server_identity, session.r_a, session.r_b)
        if len(frame.payload) != TAG_LEN or not tags_equal(frame.payload, expected):
            raise ConfirmationFailed("card confirmation tag invalid")
    except Exception:
        session.fail()
        raise
    reply = _server_tag(group, session.k1, session.identity, server.params.server_identity, session)
    key = group.encode_target(session.sk)
    session.erase()
    session.phase = Phase.DONE
    return Frame(server.protocol_id, MsgType.MSG4, reply), key


def pscab_card_finish(session: PscabSession, cred: PscabCardCredential, frame: Frame) -> bytes:
    if session.phase is not Phase.AWAIT_MSG4:
        raise UnexpectedMessage("card is not waiting for the fourth message")
    try:
        expect(frame, cred.protocol_id, MsgType.MSG4)
        expected = _server_tag(cred.group, session.k1, cred.identity, cred.server_identity, session)
        if len(frame.payload) != TAG_LEN or not tags_equal(frame.payload, expected):
            raise ConfirmationFailed("server confirmation tag invalid")
    except Exception:
        session.fail()
        raise
    key = cred.group.encode_target(session.sk)
    session.erase()
    session.phase = Phase.DONE
    cred.record_success()
    return key


# server-first ordering, attack harness only

def pscab_insecure_variant_respond(server: PscabServer, frame: Frame, rng=None) -> tuple[PscabSession, Frame]:
    require_insecure_variants()
    group = server.params.group
    s = _server_open(server, frame, rng, True)
    _server_key(server, s)
    tag = _server_tag(group, s.k1, s.identity, server.params.server_identity, s)
    return s, Frame(server.protocol_id, MsgType.VARIANT2, pack_fields(group.encode_element(s.r_b), tag))


def pscab_card_confirm_variant(session: PscabSession, cred: PscabCardCredential, alpha,
                               frame: Frame) -> tuple[Frame, bytes]:
    if session.phase is not Phase.AWAIT_MSG2:
        raise UnexpectedMessage("card is not waiting for the second message")
    try:
        expect(frame, cred.protocol_id, MsgType.VARIANT2)
        raw, tag = unpack_fields(frame.payload, 2)
        session.r_b = cred.group.check_element(_decode(cred.group, raw))
        _card_key(cred, alpha, session)
        expected = _server_tag(cred.group, session.k1, cred.identity, cred.server_identity, session)
        if not tags_equal(tag, expected):
            raise ConfirmationFailed("server confirmation tag invalid")
    except Exception:
        session.fail()
        raise
    reply = Frame(cred.protocol_id, MsgType.MSG3, _card_tag(cred, session))
    key = cred.group.encode_target(session.sk)
    session.erase()
    session.phase = Phase.DONE
    cred.record_success()
    return reply, key


def pscab_server_finish_variant(server: PscabServer, session: PscabSession, frame: Frame) -> bytes:
    if session.phase is not Phase.AWAIT_MSG3 or not session.variant:
        raise UnexpectedMessage("server is not waiting for the third message")
    group = server.params.group
    try:
        expect(frame, server.protocol_id, MsgType.MSG3)
        expected = _tag(group, session.k1, session.identity, server.params.server_identity, session.r_a, session.r_b)
        if len(frame.payload) != TAG_LEN or not tags_equal(frame.payload, expected):
            raise ConfirmationFailed("card confirmation tag invalid")
    except Exception:
        session.fail()
        raise
    key = group.encode_target(session.sk)
    session.erase()
    session.phase = Phase.DONE
    return key


class CardHandshake:
    def __init__(self, cred: PscabCardCredential, alpha, variant: bool = False):
        self.cred = cred
        self.alpha = alpha
        self.variant = variant
        self.protocol_id = cred.protocol_id
        self.session = None
        self.session_key = None

    def start(self) -> Frame:
        self.session, frame = pscab_card_start(self.cred, self.alpha)
        return frame

    def receive(self, frame: Frame) -> Frame | None:
        if self.variant:
            reply, self.session_key = pscab_card_confirm_variant(self.session, self.cred, self.alpha, frame)
            return reply
        if self.session.phase is Phase.AWAIT_MSG2:
            return pscab_card_confirm(self.session, self.cred, self.alpha, frame)
        self.session_key = pscab_card_finish(self.session, self.cred, frame)
        return None


class ServerHandshake:
    def __init__(self, server: PscabServer, rng=None, variant: bool = False):
        self.server = server
        self.rng = rng
        self.variant = variant
        self.protocol_id = server.protocol_id
        self.session = None
        self.session_key = None

    def receive(self, frame: Frame) -> Frame | None:
        if self.session is None:
            respond = pscab_insecure_variant_respond if self.variant else pscab_server_respond
            self.session, reply = respond(self.server, frame, self.rng)
            return reply
        if self.variant:
            self.session_key = pscab_server_finish_variant(self.server, self.session, frame)
            return None
        reply, self.session_key = pscab_server_finish(self.server, self.session, frame)
        return reply
