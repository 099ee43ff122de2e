"""Scripted attackers for the smart-card protocols.

Every scenario builds a small deterministic world (server, victim card,
honest runs) from a seed, lets an attacker with a given capability set act
on it, and reports what the attacker ends up with: how many dictionary words
remain consistent with everything it has seen, whether it got the server to
accept, and how many server sessions and card queries it spent.

"Consistent" always means exact recomputation of an observed value under the
candidate password.  When the attacker's view contains nothing it can
recompute, every candidate survives.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable

from . import pscab, pscav, ssca
from .card import HandshakeResult, run_handshake
from .chain_rng import rng_init
from .errors import AuthError, CardDestroyed, NonSubgroupElement
from .group import MERSENNE_61, DebugGroup, encode_fields, hmac_tag, kdf, tags_equal, unwrap_key
from .variants import insecure_variants
from .wire import Frame, MsgType, pack_fields, unpack_fields

PROTOCOLS = ("ssca", "pscab", "pscabv", "pscav")


class UnknownScenario(KeyError):
    pass


class ModelMismatch(ValueError):
    """The attacker model lacks a capability the scenario needs."""


class Capability(Enum):
    QUERY_CARD = "query_card"
    READ_CARD_MEMORY = "read_card_memory"
    OBSERVE_TRANSCRIPTS = "observe_transcripts"
    CONTROL_READER = "control_reader"
    CONTACT_SERVER = "contact_server"


class ModelKind(Enum):
    TYPE_I = "type-i"
    TYPE_II = "type-ii"
    TYPE_III = "type-iii"
    TYPE_III_PRIME = "type-iii-prime"
    TYPE_IV = "type-iv"
    TYPE_IV_PRIME = "type-iv-prime"


_C = Capability
_CAPABILITIES = {
    ModelKind.TYPE_I: frozenset({_C.QUERY_CARD, _C.OBSERVE_TRANSCRIPTS, _C.CONTROL_READER, _C.CONTACT_SERVER}),
    ModelKind.TYPE_II: frozenset({_C.QUERY_CARD, _C.OBSERVE_TRANSCRIPTS, _C.CONTROL_READER, _C.CONTACT_SERVER}),
    ModelKind.TYPE_III: frozenset(Capability),
    ModelKind.TYPE_III_PRIME: frozenset({_C.QUERY_CARD, _C.READ_CARD_MEMORY, _C.CONTROL_READER, _C.CONTACT_SERVER}),
    # a memory stick has no processor to query and is used on a trusted computer
    ModelKind.TYPE_IV: frozenset({_C.READ_CARD_MEMORY, _C.OBSERVE_TRANSCRIPTS, _C.CONTACT_SERVER}),
    ModelKind.TYPE_IV_PRIME: frozenset({_C.READ_CARD_MEMORY, _C.CONTACT_SERVER}),
}

_MODEL_ALIASES = {
    "type-i": ModelKind.TYPE_I, "i": ModelKind.TYPE_I, "1": ModelKind.TYPE_I,
    "type-ii": ModelKind.TYPE_II, "ii": ModelKind.TYPE_II, "2": ModelKind.TYPE_II,
    "type-iii": ModelKind.TYPE_III, "iii": ModelKind.TYPE_III, "3": ModelKind.TYPE_III,
    "type-iii-prime": ModelKind.TYPE_III_PRIME, "type-iii'": ModelKind.TYPE_III_PRIME, "3p": ModelKind.TYPE_III_PRIME,
    "type-iv": ModelKind.TYPE_IV, "iv": ModelKind.TYPE_IV, "4": ModelKind.TYPE_IV,
    "type-iv-prime": ModelKind.TYPE_IV_PRIME, "type-iv'": ModelKind.TYPE_IV_PRIME, "4p": ModelKind.TYPE_IV_PRIME,
}

DEFAULT_TYPE_II_LIMIT = 16


@dataclass(frozen=True)
class AttackerModel:
    kind: ModelKind
    limit: int = 0

    def __post_init__(self):
        if self.kind is ModelKind.TYPE_II and self.limit <= 0:
            raise ValueError("a Type II card needs a positive query limit")
        if self.kind is not ModelKind.TYPE_II and self.limit:
            raise ValueError("only Type II cards carry a query limit")

    @classmethod
    def parse(cls, text: str) -> "AttackerModel":
        """``type-ii:16``, ``type-iii-prime``, ``3p`` and similar."""
        name, _, limit = text.strip().lower().partition(":")
        try:
            kind = _MODEL_ALIASES[name]
        except KeyError:
            raise ValueError(f"unknown attacker model {text!r}") from None
        if kind is ModelKind.TYPE_II:
            return cls(kind, int(limit) if limit else DEFAULT_TYPE_II_LIMIT)
        if limit:
            raise ValueError("only Type II takes a limit")
        return cls(kind)

    @property
    def capabilities(self) -> frozenset[Capability]:
        return _CAPABILITIES[self.kind]

    def has(self, cap: Capability) -> bool:
        return cap in self.capabilities

    def __str__(self):
        return f"{self.kind.value}:{self.limit}" if self.limit else self.kind.value


TYPE_I = AttackerModel(ModelKind.TYPE_I)
TYPE_III = AttackerModel(ModelKind.TYPE_III)
TYPE_III_PRIME = AttackerModel(ModelKind.TYPE_III_PRIME)
TYPE_IV = AttackerModel(ModelKind.TYPE_IV)
TYPE_IV_PRIME = AttackerModel(ModelKind.TYPE_IV_PRIME)


def type_ii(limit: int = DEFAULT_TYPE_II_LIMIT) -> AttackerModel:
    return AttackerModel(ModelKind.TYPE_II, limit)


@dataclass(frozen=True)
class Dictionary:
    words: tuple[str, ...]
    true_index: int | None = None

    def __post_init__(self):
        if not self.words:
            raise ValueError("dictionary is empty")
        if len(set(self.words)) != len(self.words):
            raise ValueError("dictionary words must be distinct")

    @classmethod
    def with_password(cls, words, password: str | None) -> "Dictionary":
        words = tuple(dict.fromkeys(w for w in words if w))
        idx = words.index(password) if password in words else None
        return cls(words, idx)

    @classmethod
    def load(cls, path, password: str | None = None) -> "Dictionary":
        text = Path(path).read_text(encoding="utf-8")
        return cls.with_password([w.strip() for w in text.splitlines()], password)

    @classmethod
    def bundled(cls, password: str | None = None) -> "Dictionary":
        text = resources.files("pwcard").joinpath("data/dictionary.txt").read_text(encoding="utf-8")
        return cls.with_password([w.strip() for w in text.splitlines()], password)

    @property
    def password(self) -> str | None:
        return None if self.true_index is None else self.words[self.true_index]

    def __len__(self):
        return len(self.words)


@dataclass
class AttackOutcome:
    surviving: int
    survivors: tuple[int, ...]
    dict_size: int
    impersonation_success: bool = False
    server_sessions_used: int = 0
    card_queries_used: int = 0
    password_absent: bool = False
    scenario: str = ""
    protocol: str = ""
    model: str = ""
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def report(self) -> dict:
        return {
            "scenario": self.scenario,
            "protocol": self.protocol,
            "model": self.model,
            "dict_size": self.dict_size,
            "surviving": self.surviving,
            "impersonation": self.impersonation_success,
            "sessions": self.server_sessions_used,
            "queries": self.card_queries_used,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.report(), sort_keys=False)


def offline_filter(view, dictionary: Dictionary, oracle: Callable[[object, str], bool]) -> AttackOutcome:
    survivors = tuple(i for i, word in enumerate(dictionary.words) if oracle(view, word))
    return AttackOutcome(
        surviving=len(survivors),
        survivors=survivors,
        dict_size=len(dictionary),
        password_absent=dictionary.true_index is None,
    )


def nothing_to_test(view, candidate) -> bool:
    """Oracle for views holding no value recomputable from a password guess."""
    return True


# SSCA offline view: card memory, optionally one recorded honest run

@dataclass(frozen=True)
class SscaView:
    wrapped_key: bytes
    identity: bytes
    server_identity: bytes
    transcript: tuple[Frame, ...] | None = None


def ssca_consistent(view: SscaView, candidate: str) -> bool:
    key = unwrap_key(candidate, view.wrapped_key)
    if not view.transcript:
        # every 32-byte string is a well-formed key; nothing else to check against
        return True
    f1, f2, f3 = view.transcript[:3]
    _, nonce_c, ct_c = unpack_fields(f1.payload, 3)
    r_card = ssca.open_sealed(key, nonce_c, view.identity, ct_c)
    if r_card is None:
        return False
    nonce_s, ct_s, tag_s = unpack_fields(f2.payload, 3)
    r_server = ssca.open_sealed(key, nonce_s, view.identity, ct_s)
    if r_server is None:
        return False
    sk = ssca.session_key(view.identity, view.server_identity, r_card, r_server)
    return (tags_equal(tag_s, ssca.server_tag(sk, view.identity, view.server_identity, r_card, r_server))
            and tags_equal(f3.payload, ssca.card_tag(sk, view.identity, view.server_identity, r_card, r_server)))


# server-first confirmation attacks

@dataclass(frozen=True)
class PscabReversedView:
    group: DebugGroup
    identity: bytes
    server_identity: bytes
    r_a: object
    r_b: object
    blinded_sk: object
    server_tag: bytes | None


def pscab_reversed_consistent(view: PscabReversedView, candidate: str) -> bool:
    if view.server_tag is None:
        return True
    g = view.group
    sk = g.target_exp(view.blinded_sk, g.scalar_inverse(pscab.password_scalar(g, candidate)))
    k1 = pscab.confirmation_key(g, sk)
    expected = hmac_tag(k1, encode_fields(view.server_identity, view.identity,
                                          g.encode_element(view.r_b), g.encode_element(view.r_a)))
    return tags_equal(expected, view.server_tag)


def _finish_with(server_hs, frame, outcome):
    try:
        server_hs.receive(frame)
    except AuthError:
        return
    outcome.impersonation_success = server_hs.session_key is not None


def attack_pscab_reversed(card: pscab.PscabCardCredential, server: pscab.PscabServer, dictionary: Dictionary,
                          *, reversed_order: bool = True, rng=None) -> AttackOutcome:
    """Card-memory thief against PSCAb, using one server session.

    The attacker knows ``D = d_C^h(alpha)`` but not the password.  It sends
    ``R_A = g_C^x`` and can compute ``T = sk^h(alpha)``.  If the server
    confirms first, each guess is checked via ``T^(1/h(guess))``.
    """
    if card.verifier:
        raise ValueError("this attack targets the identity-based protocol; PSCAbV users have password-bound g_C")
    rng = rng or random.Random()
    g = card.group
    x = g.random_scalar(rng)
    r_a = g.exp(pscab.user_generator(g, card.identity), x)
    hello = Frame(card.protocol_id, MsgType.MSG1, pack_fields(card.identity, g.encode_element(r_a)))
    with insecure_variants():
        server_hs = pscab.ServerHandshake(server, rng, variant=reversed_order)
        reply = server_hs.receive(hello)
    fields = unpack_fields(reply.payload, 2 if reversed_order else 1)
    r_b = g.decode_element(fields[0])
    tag = fields[1] if reversed_order else None
    s_a = pscab.pi(g, r_a, r_b)
    s_b = pscab.pi(g, r_b, r_a)
    blinded = g.pair(g.exp(card.blinded_key, x + s_a), g.mul(g.exp(card.g_s, s_b), r_b))
    view = PscabReversedView(g, card.identity, card.server_identity, r_a, r_b, blinded, tag)
    outcome = offline_filter(view, dictionary, pscab_reversed_consistent)
    outcome.server_sessions_used = 1
    if outcome.surviving == 1:
        guess = dictionary.words[outcome.survivors[0]]
        sk = g.target_exp(blinded, g.scalar_inverse(pscab.password_scalar(g, guess)))
        k1 = pscab.confirmation_key(g, sk)
        c_c = hmac_tag(k1, encode_fields(card.identity, card.server_identity, g.encode_element(r_a), g.encode_element(r_b)))
    else:
        # no way to build the card's confirmation: send something and get rejected
        c_c = rng.randbytes(32)
    _finish_with(server_hs, Frame(card.protocol_id, MsgType.MSG3, c_c), outcome)
    outcome.details["server_confirmation_seen"] = tag is not None
    return outcome


@dataclass(frozen=True)
class PscavReversedView:
    group: DebugGroup
    identity: bytes
    server_identity: bytes
    blinding: int
    r_a: object
    r_b: object
    server_tag: bytes | None


def _pscav_guess_key(view, candidate):
    g = view.group
    u = pscav.transcript_scalar(g, view.identity, view.server_identity, view.r_a, view.r_b)
    exponent = view.blinding * pscav.blinding_scalar(g, candidate) + u * pscav.verifier_scalar(g, candidate)
    return g.exp(view.r_b, exponent % g.q)


def pscav_reversed_consistent(view: PscavReversedView, candidate: str) -> bool:
    if view.server_tag is None:
        return True
    sk = _pscav_guess_key(view, candidate)
    expected = pscav.confirmation(view.group, sk, view.server_identity, view.identity, view.r_b, view.r_a)
    return tags_equal(expected, view.server_tag)


def attack_pscav_reversed(card: pscav.PscavCardCredential, server: pscav.PscavServer, dictionary: Dictionary,
                          *, reversed_order: bool = True, r: int | None = None, rng=None) -> AttackOutcome:
    """Card-memory thief against PSCAV, using one server session.

    The attacker sends ``R_A = W^r``.  With a server-first confirmation each
    guess gives ``sk' = R_B^(r*h2(guess) + u*a(guess))`` to compare.
    """
    rng = rng or random.Random()
    g = card.group
    r = g.random_scalar(rng) if r is None else r
    r_a = g.exp(card.blinded_generator, r)
    hello = Frame(pscav.PID, MsgType.MSG1, pack_fields(card.identity, g.encode_element(r_a)))
    with insecure_variants():
        server_hs = pscav.ServerHandshake(server, rng, variant=reversed_order)
        try:
            reply = server_hs.receive(hello)
        except NonSubgroupElement:
            out = offline_filter(None, dictionary, nothing_to_test)
            out.server_sessions_used = 1
            out.details["rejected"] = "NonSubgroupElement"
            return out
    fields = unpack_fields(reply.payload, 2 if reversed_order else 1)
    r_b = g.decode_element(fields[0])
    tag = fields[1] if reversed_order else None
    view = PscavReversedView(g, card.identity, card.server_identity, r, r_a, r_b, tag)
    outcome = offline_filter(view, dictionary, pscav_reversed_consistent)
    outcome.server_sessions_used = 1
    if outcome.surviving == 1:
        sk = _pscav_guess_key(view, dictionary.words[outcome.survivors[0]])
        c_c = pscav.confirmation(g, sk, card.identity, card.server_identity, r_a, r_b)
    else:
        c_c = rng.randbytes(32)
    _finish_with(server_hs, Frame(pscav.PID, MsgType.MSG3, c_c), outcome)
    outcome.details["server_confirmation_seen"] = tag is not None
    return outcome


# small-subgroup confinement

class DhBaseline:
    """Textbook Diffie-Hellman over the whole order-``q*t`` group, no checks.

    The key is confirmed by a client tag over a fixed label, which is what
    lets a man in the middle test its guesses.
    """

    def __init__(self, group: DebugGroup):
        self.group = group

    def keypair(self, rng):
        x = rng.randrange(1, self.group.n)
        return x, self.group.exp(self.group.generator, x)

    def shared(self, own: int, peer):
        return self.group.exp(peer, own)

    def confirm_tag(self, shared) -> bytes:
        return hmac_tag(kdf(b"dh-baseline", self.group.encode_element(shared)), b"client finished")


def attack_small_subgroup(t: int = 3, seed: int = 0, q: int = MERSENNE_61) -> AttackOutcome:
    """Man in the middle raises both public values to the q-th power.

    Both ends then share ``g^(qxy)``, one of only ``t`` values; the attacker
    enumerates them against the client's confirmation tag.
    """
    rng = random.Random(seed)
    group = DebugGroup(q=q, t=t)
    dh = DhBaseline(group)
    x, big_x = dh.keypair(rng)
    y, big_y = dh.keypair(rng)
    to_server = group.exp(big_x, q)
    to_client = group.exp(big_y, q)
    client_key = dh.shared(x, to_client)
    server_key = dh.shared(y, to_server)
    tag = dh.confirm_tag(client_key)
    guesses = 0
    recovered = None
    base = group.exp(group.generator, q)
    for i in range(t):
        guesses += 1
        cand = group.exp(base, i)
        if tags_equal(dh.confirm_tag(cand), tag):
            recovered = cand
            break
    out = AttackOutcome(surviving=1 if recovered is not None else 0,
                        survivors=(), dict_size=t, impersonation_success=False)
    out.details.update(
        applicable=t > 1,
        guesses=guesses,
        keys_agree=client_key == server_key,
        recovered=recovered is not None and recovered == client_key,
    )
    return out


def _low_order(group: DebugGroup):
    return group.exp(group.generator, group.q)


def _tamper_element(group, frame, index, count):
    fields = unpack_fields(frame.payload, count)
    el = group.decode_element(fields[index])
    fields[index] = group.encode_element(group.mul(el, _low_order(group)))
    return Frame(frame.protocol_id, frame.msg_type, pack_fields(*fields))


def small_subgroup_vs_protocols(t: int = 3, seed: int = 0, q: int = MERSENNE_61) -> dict[str, dict[str, bool]]:
    """Inject an order-t component into each protocol's exchanged values.

    Returns, per protocol, whether the server rejected a tampered first
    message and whether the card rejected a tampered second message.  SSCA
    exchanges no group elements; its ciphertext is tampered instead.
    """
    results = {}
    for name in PROTOCOLS:
        world = build_world(name, "hunter", seed, group=DebugGroup(q=q, t=t))
        g = world.group
        card_hs = world.card_hs()
        hello = card_hs.start()
        if name == "ssca":
            ident, nonce, ct = unpack_fields(hello.payload, 3)
            bad = Frame(hello.protocol_id, hello.msg_type,
                        pack_fields(ident, nonce, bytes(b ^ 0x5A for b in ct)))
        else:
            bad = _tamper_element(g, hello, 1, 2)
        server_rejects = _rejects(world.server_hs(), bad)

        card_hs = world.card_hs()
        server_hs = world.server_hs()
        reply = server_hs.receive(card_hs.start())
        if name == "ssca":
            nonce, ct, tag = unpack_fields(reply.payload, 3)
            bad_reply = Frame(reply.protocol_id, reply.msg_type,
                              pack_fields(nonce, bytes(b ^ 0x5A for b in ct), tag))
        else:
            bad_reply = _tamper_element(g, reply, 0, 1)
        card_rejects = _rejects(card_hs, bad_reply)
        results[name] = {"server_rejects": server_rejects, "card_rejects": card_rejects}
    return results


def _rejects(endpoint, frame) -> bool:
    try:
        endpoint.receive(frame)
    except AuthError:
        return True
    return False


# scenario worlds

@dataclass
class World:
    protocol: str
    group: DebugGroup
    server: object
    card: object
    password: str
    rng: random.Random
    server_rng: random.Random
    identity: bytes = b"card-0001"
    server_identity: bytes = b"auth.example"

    def card_hs(self, card=None, password=None, variant=False):
        card = card or self.card
        password = self.password if password is None else password
        if self.protocol == "ssca":
            return ssca.CardHandshake(card, password)
        mod = pscav if self.protocol == "pscav" else pscab
        return mod.CardHandshake(card, password, variant=variant)

    def server_hs(self, variant=False):
        if self.protocol == "ssca":
            return ssca.ServerHandshake(self.server, self.server_rng)
        mod = pscav if self.protocol == "pscav" else pscab
        return mod.ServerHandshake(self.server, self.server_rng, variant=variant)

    def honest_run(self) -> HandshakeResult:
        return run_handshake(self.card_hs(), self.server_hs())

    def forged_card(self):
        """A card built from the right password but without the real card secrets."""
        g = self.group
        seed, key = self.rng.randbytes(32), self.rng.randbytes(32)
        if self.protocol == "ssca":
            return ssca.ssca_personalize(self.rng.randbytes(32), self.identity, self.password,
                                         server_identity=self.server_identity, rng_seed=seed, chain_key=key)
        if self.protocol == "pscav":
            return replace(self.card, rng=rng_init(seed, key), query_counter=0,
                           blinded_generator=g.exp(g.subgroup_generator, g.random_scalar(self.rng)))
        return replace(self.card, rng=rng_init(seed, key), query_counter=0,
                       blinded_key=g.exp(g.subgroup_generator, g.random_scalar(self.rng)))

    def clone_card(self):
        """Copy of the victim card's memory, as read out by a Type III attacker."""
        return replace(self.card, query_counter=0, counter_limit=0)


def build_world(protocol: str, password: str, seed: int, counter_limit: int = 0,
                group: DebugGroup | None = None) -> World:
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    rng = random.Random(seed)
    server_rng = random.Random(rng.getrandbits(64))
    group = group or DebugGroup()
    ident, srv_ident = b"card-0001", b"auth.example"
    rng_seed, chain_key = rng.randbytes(32), rng.randbytes(32)
    if protocol == "ssca":
        beta = rng.randbytes(32)
        server = ssca.SscaServer(beta, srv_ident)
        card = ssca.ssca_personalize(beta, ident, password, server_identity=srv_ident,
                                     rng_seed=rng_seed, chain_key=chain_key, counter_limit=counter_limit)
    elif protocol in ("pscab", "pscabv"):
        params, beta = pscab.pscab_setup(group, srv_ident, rng)
        if protocol == "pscab":
            server = pscab.PscabServer(params, beta)
            card = pscab.pscab_extract(params, beta, ident, password, rng_seed=rng_seed,
                                       chain_key=chain_key, counter_limit=counter_limit)
        else:
            card, g_c = pscab.pscab_extract_v(params, beta, ident, password, rng_seed=rng_seed,
                                              chain_key=chain_key, counter_limit=counter_limit)
            server = pscab.PscabServer(params, beta, {ident: g_c})
    else:
        beta = rng.randbytes(32)
        card, record = pscav.pscav_personalize(group, beta, ident, password, server_identity=srv_ident,
                                               rng_seed=rng_seed, chain_key=chain_key,
                                               counter_limit=counter_limit)
        server = pscav.PscavServer(group, srv_ident, {ident: record})
    return World(protocol, group, server, card, password, rng, server_rng, ident, srv_ident)


def _query_card(world: World, word: str) -> None:
    """One query through a malicious reader, answered by a fake server."""
    hs = world.card_hs(password=word)
    hello = hs.start()
    if world.protocol == "ssca":
        return  # a fake server cannot build a well-formed second message without K
    g = world.group
    _, raw = unpack_fields(hello.payload, 2)
    fake_r_b = g.exp(g.decode_element(raw), g.random_scalar(world.rng))
    try:
        hs.receive(Frame(hello.protocol_id, MsgType.MSG2, pack_fields(g.encode_element(fake_r_b))))
    except AuthError:
        pass


def _all_survive(dictionary: Dictionary) -> AttackOutcome:
    return offline_filter(None, dictionary, nothing_to_test)


def _scenario_eavesdrop(world, model, dictionary):
    res = world.honest_run()
    out = offline_filter(tuple(res.frames), dictionary, nothing_to_test)
    out.details["honest_run_accepted"] = res.accepted
    return out


def _scenario_replay(world, model, dictionary):
    recorded = world.honest_run()
    card_frames = [f for i, f in enumerate(recorded.frames) if i % 2 == 0]
    server_hs = world.server_hs()
    out = _all_survive(dictionary)
    out.server_sessions_used = 1
    fresh = None
    for i, frame in enumerate(card_frames):
        try:
            reply = server_hs.receive(frame)
        except AuthError:
            break
        if i == 0:
            fresh = reply
    out.impersonation_success = server_hs.session_key is not None
    out.details["server_reply_fresh"] = fresh is not None and fresh != recorded.frames[1]
    return out


def _scenario_mitm(world, model, dictionary):
    """Relay a victim's session but substitute the attacker's own first message."""
    g = world.group
    card_hs = world.card_hs()
    server_hs = world.server_hs()
    hello = card_hs.start()
    if world.protocol == "ssca":
        ident, nonce, ct = unpack_fields(hello.payload, 3)
        forged = Frame(hello.protocol_id, hello.msg_type, pack_fields(ident, nonce, world.rng.randbytes(len(ct))))
    else:
        ident, raw = unpack_fields(hello.payload, 2)
        mine = g.exp(g.decode_element(raw), g.random_scalar(world.rng))
        forged = Frame(hello.protocol_id, hello.msg_type, pack_fields(ident, g.encode_element(mine)))
    out = _all_survive(dictionary)
    out.server_sessions_used = 1
    frame = forged
    try:
        while frame is not None:
            reply = server_hs.receive(frame)
            if reply is None:
                break
            frame = card_hs.receive(reply)
    except AuthError:
        pass
    out.impersonation_success = server_hs.session_key is not None
    out.details["victim_accepted"] = card_hs.session_key is not None
    return out


def _scenario_malicious_reader(world, model, dictionary):
    """The reader captures the password during an honest run; the card stays with its owner."""
    honest = world.honest_run()
    out = offline_filter(world.password, dictionary, lambda pw, cand: cand == pw)
    res = run_handshake(world.card_hs(card=world.forged_card()), world.server_hs())
    out.server_sessions_used = 1
    out.impersonation_success = res.server_key is not None and res.error is None
    out.details["honest_run_accepted"] = honest.accepted
    return out


def _scenario_stolen_card_query(world, model, dictionary):
    queries = 0
    destroyed = False
    for word in dictionary.words:
        try:
            _query_card(world, word)
        except CardDestroyed:
            destroyed = True
            break
        queries += 1
    out = _all_survive(dictionary)
    out.card_queries_used = queries
    out.details["card_destroyed"] = destroyed
    return out


def _secrets_zeroized(card) -> bool:
    values = [getattr(card, n) for n in card.SECRET_FIELDS]
    zero = all((v == bytes(len(v))) if isinstance(v, bytes) else v.exponent == 0 for v in values)
    return zero and card.rng.seed == bytes(32) and card.rng.chain_key == bytes(32)


def _scenario_counter_exhaustion(world, model, dictionary):
    if not world.card.counter_limit:
        raise ModelMismatch("counter exhaustion needs a Type II card")
    queries = 0
    destroyed = False
    words = dictionary.words
    while not destroyed:
        try:
            _query_card(world, words[queries % len(words)])
            queries += 1
        except CardDestroyed:
            destroyed = True
    out = _all_survive(dictionary)
    out.card_queries_used = queries
    out.details.update(card_destroyed=destroyed, secrets_zeroized=_secrets_zeroized(world.card))
    return out


def _impersonate(world, guess, out):
    res = run_handshake(world.card_hs(card=world.clone_card(), password=guess), world.server_hs())
    out.server_sessions_used += 1
    out.impersonation_success = res.server_key is not None and res.error is None


def _scenario_stolen_card_read(world, model, dictionary):
    """Read the card's memory and look for an offline password test.

    With transcript observation the attacker also holds one earlier honest
    run.  For the group protocols that run does not help (the card erased
    its ephemeral), so the attacker spends its one server session probing
    with the stolen memory instead.
    """
    observed = world.honest_run() if model.has(Capability.OBSERVE_TRANSCRIPTS) else None
    if world.protocol == "ssca":
        view = SscaView(world.card.wrapped_key, world.identity, world.server_identity,
                        tuple(observed.frames) if observed else None)
        out = offline_filter(view, dictionary, ssca_consistent)
        if out.surviving == 1:
            _impersonate(world, dictionary.words[out.survivors[0]], out)
        out.details["transcript_observed"] = observed is not None
        return out
    stolen = world.clone_card()
    if world.protocol == "pscab":
        out = attack_pscab_reversed(stolen, world.server, dictionary, reversed_order=False, rng=world.rng)
    elif world.protocol == "pscav":
        out = attack_pscav_reversed(stolen, world.server, dictionary, reversed_order=False, rng=world.rng)
    else:
        out = _probe_pscabv(world, stolen, dictionary)
    out.details["transcript_observed"] = observed is not None
    return out


def _probe_pscabv(world, stolen, dictionary):
    # g_C = H(C, alpha) is unknown without the password; R_A = D^r is the best available
    g = world.group
    r_a = g.exp(stolen.blinded_key, g.random_scalar(world.rng))
    server_hs = world.server_hs()
    out = _all_survive(dictionary)
    out.server_sessions_used = 1
    try:
        server_hs.receive(Frame(stolen.protocol_id, MsgType.MSG1, pack_fields(stolen.identity, g.encode_element(r_a))))
        server_hs.receive(Frame(stolen.protocol_id, MsgType.MSG3, world.rng.randbytes(32)))
    except AuthError:
        pass
    out.impersonation_success = server_hs.session_key is not None
    return out


def _scenario_memory_stick(world, model, dictionary):
    out = _scenario_stolen_card_read(world, model, dictionary)
    out.details["device"] = "memory-stick"
    return out


def _scenario_reversed(protocol, reversed_order):
    def run(world, model, dictionary):
        attack = attack_pscab_reversed if protocol == "pscab" else attack_pscav_reversed
        return attack(world.clone_card(), world.server, dictionary, reversed_order=reversed_order, rng=world.rng)
    return run


def _scenario_small_subgroup(world, model, dictionary):
    base = attack_small_subgroup(t=3, seed=world.rng.getrandbits(32))
    verdict = small_subgroup_vs_protocols(t=3, seed=world.rng.getrandbits(32))[world.protocol]
    out = _all_survive(dictionary)
    out.impersonation_success = not all(verdict.values())
    out.details.update(baseline=base.details, protocol_rejects=verdict)
    return out


@dataclass(frozen=True)
class Scenario:
    run: Callable
    requires: frozenset
    default_model: AttackerModel
    protocols: tuple[str, ...] = PROTOCOLS
    models: frozenset | None = None


SCENARIOS: dict[str, Scenario] = {
    "eavesdrop": Scenario(_scenario_eavesdrop, frozenset({_C.OBSERVE_TRANSCRIPTS}), TYPE_I),
    "replay": Scenario(_scenario_replay, frozenset({_C.OBSERVE_TRANSCRIPTS, _C.CONTACT_SERVER}), TYPE_I),
    "mitm": Scenario(_scenario_mitm, frozenset({_C.CONTACT_SERVER}), TYPE_I),
    "malicious-reader": Scenario(_scenario_malicious_reader, frozenset({_C.CONTROL_READER, _C.CONTACT_SERVER}), TYPE_I),
    "stolen-card-query": Scenario(_scenario_stolen_card_query, frozenset({_C.QUERY_CARD}), type_ii()),
    "stolen-card-read": Scenario(_scenario_stolen_card_read, frozenset({_C.READ_CARD_MEMORY, _C.CONTACT_SERVER}),
                                 TYPE_III),
    "memory-stick": Scenario(_scenario_memory_stick, frozenset({_C.READ_CARD_MEMORY, _C.CONTACT_SERVER}), TYPE_IV,
                             models=frozenset({ModelKind.TYPE_IV, ModelKind.TYPE_IV_PRIME})),
    "counter-exhaustion": Scenario(_scenario_counter_exhaustion, frozenset({_C.QUERY_CARD}), type_ii(),
                                   models=frozenset({ModelKind.TYPE_II})),
    "small-subgroup": Scenario(_scenario_small_subgroup, frozenset({_C.CONTACT_SERVER}), TYPE_I),
    "pscab-reversed": Scenario(_scenario_reversed("pscab", True), frozenset({_C.READ_CARD_MEMORY, _C.CONTACT_SERVER}),
                               TYPE_III, protocols=("pscab",)),
    "pscab-secure": Scenario(_scenario_reversed("pscab", False), frozenset({_C.READ_CARD_MEMORY, _C.CONTACT_SERVER}),
                             TYPE_III, protocols=("pscab",)),
    "pscav-reversed": Scenario(_scenario_reversed("pscav", True), frozenset({_C.READ_CARD_MEMORY, _C.CONTACT_SERVER}),
                               TYPE_III, protocols=("pscav",)),
    "pscav-secure": Scenario(_scenario_reversed("pscav", False), frozenset({_C.READ_CARD_MEMORY, _C.CONTACT_SERVER}),
                             TYPE_III, protocols=("pscav",)),
}


def run_scenario(name: str, protocol: str | None = None, model: AttackerModel | None = None,
                 dictionary: Dictionary | None = None, seed: int = 0,
                 victim_password: str | None = None) -> AttackOutcome:
    """Run a registered scenario; deterministic for a given seed.

    Without a dictionary the bundled 64 words are used.  The victim's
    password is ``victim_password`` if given (it may be missing from the
    dictionary), else the dictionary's marked word, else one picked by the
    seed.
    """
    try:
        scenario = SCENARIOS[name]
    except KeyError:
        raise UnknownScenario(name) from None
    if protocol is None:
        protocol = scenario.protocols[0]
    if protocol not in scenario.protocols:
        raise ValueError(f"scenario {name} does not apply to {protocol}")
    model = model or scenario.default_model
    missing = scenario.requires - model.capabilities
    if missing:
        raise ModelMismatch(f"{model} lacks {sorted(c.value for c in missing)}")
    if scenario.models is not None and model.kind not in scenario.models:
        raise ModelMismatch(f"scenario {name} is not defined under {model}")

    rng = random.Random(seed)
    dictionary = dictionary or Dictionary.bundled()
    if victim_password is not None:
        dictionary = Dictionary.with_password(dictionary.words, victim_password)
        password = victim_password
    else:
        if dictionary.true_index is None:
            dictionary = Dictionary(dictionary.words, rng.randrange(len(dictionary)))
        password = dictionary.password
    world = build_world(protocol, password, rng.getrandbits(64), counter_limit=model.limit)
    out = scenario.run(world, model, dictionary)
    out.scenario = name
    out.protocol = protocol
    out.model = str(model)
    out.seed = seed
    return out
