import random

import pytest
from oracle import pscab_key_exponent

from pwcard import pscab
from pwcard.card import Phase, run_handshake
from pwcard.errors import ConfirmationFailed, InsecureVariantDisabled, NonSubgroupElement, UnexpectedMessage
from pwcard.group import DebugGroup, HashRole
from pwcard.variants import insecure_variants
from pwcard.wire import Frame, MsgType, pack_fields, unpack_fields

G = DebugGroup()
S = b"ibe-server"
SEED = bytes(range(32))
KEY = bytes(range(32, 64))


def make(password="orchid", verifier=False, group=G, beta=123456789, identity=b"card-77", seed=SEED):
    params = pscab.PscabParams.create(group, S)
    cred, g_c = pscab._personalize(params, beta, identity, password, verifier, seed, KEY, 0)
    server = pscab.PscabServer(params, beta, {identity: g_c} if verifier else None)
    return cred, server


def test_unblinding_recovers_identity_key():
    cred, server = make()
    h = pscab.password_scalar(G, "orchid")
    g_c = pscab.user_generator(G, b"card-77")
    assert G.exp(cred.blinded_key, G.scalar_inverse(h)) == G.exp(g_c, server.master)
    wrong = G.scalar_inverse(pscab.password_scalar(G, "tulip"))
    assert G.exp(cred.blinded_key, wrong) != G.exp(g_c, server.master)
    assert G.is_in_subgroup(cred.blinded_key)


def test_distinct_passwords_distinct_blinded_keys():
    assert make("a")[0].blinded_key != make("b")[0].blinded_key


def test_verifier_record_is_hash_of_identity_and_password():
    cred, server = make(verifier=True)
    assert server.records[b"card-77"] == G.hash_to_group(HashRole.H2G, b"card-77", b"orchid")
    assert run_handshake(pscab.CardHandshake(cred, "orchid"), pscab.ServerHandshake(server)).accepted
    bad = run_handshake(pscab.CardHandshake(cred, "tulip"), pscab.ServerHandshake(server))
    assert not bad.accepted and MsgType.MSG4 not in bad.msg_types()


def test_card_start_exponent_readback():
    cred, _ = make()
    s1, f1 = pscab.pscab_card_start(cred, "orchid")
    s2, _ = pscab.pscab_card_start(cred, "orchid")
    g_c = pscab.user_generator(G, b"card-77")
    assert s1.r_a.exponent == g_c.exponent * s1.ephemeral % G.n
    assert G.is_in_subgroup(s1.r_a)
    assert s1.ephemeral != s2.ephemeral
    ident, raw = unpack_fields(f1.payload, 2)
    assert ident == b"card-77" and G.decode_element(raw) == s1.r_a


def test_server_response_is_fresh_per_query():
    cred, server = make()
    _, f1 = pscab.pscab_card_start(cred, "orchid")
    a, r1 = pscab.pscab_server_respond(server, f1)
    b, r2 = pscab.pscab_server_respond(server, f1)
    assert a.ephemeral != b.ephemeral and r1 != r2
    assert a.r_b == G.exp(server.params.g_s, a.ephemeral)


def test_low_order_first_message_rejected():
    g3 = DebugGroup(t=3)
    cred, server = make(group=g3)
    _, f1 = pscab.pscab_card_start(cred, "orchid")
    ident, raw = unpack_fields(f1.payload, 2)
    low = g3.element(g3.q)  # order 3
    bad = Frame(f1.protocol_id, f1.msg_type, pack_fields(ident, g3.encode_element(low)))
    with pytest.raises(NonSubgroupElement):
        pscab.pscab_server_respond(server, bad)


def test_low_order_reply_rejected_by_card():
    g3 = DebugGroup(t=3)
    cred, server = make(group=g3)
    s, f1 = pscab.pscab_card_start(cred, "orchid")
    _, f2 = pscab.pscab_server_respond(server, f1)
    r_b = g3.decode_element(unpack_fields(f2.payload, 1)[0])
    tampered = g3.mul(r_b, g3.element(g3.q))
    with pytest.raises(NonSubgroupElement):
        pscab.pscab_card_confirm(s, cred, "orchid", Frame(f2.protocol_id, f2.msg_type,
                                                          pack_fields(g3.encode_element(tampered))))


def test_two_formulas_agree_with_oracle():
    rng = random.Random(2024)
    params = pscab.PscabParams.create(G, S)
    for _ in range(200):
        beta = rng.randrange(1, G.q)
        cred, g_c = pscab._personalize(params, beta, rng.randbytes(6), "pw", False, SEED, KEY, 0)
        x, y = rng.randrange(1, G.q), rng.randrange(1, G.q)
        card = pscab.PscabSession(Phase.AWAIT_MSG2, ephemeral=x, r_a=G.exp(g_c, x), r_b=G.exp(params.g_s, y))
        srv = pscab.PscabSession(Phase.AWAIT_MSG3, ephemeral=y, r_a=card.r_a, r_b=card.r_b, g_c=g_c)
        pscab._card_key(cred, "pw", card)
        pscab._server_key(pscab.PscabServer(params, beta), srv)
        s_a, s_b = pscab.pi(G, card.r_a, card.r_b), pscab.pi(G, card.r_b, card.r_a)
        assert card.sk == srv.sk
        assert card.sk.exponent == pscab_key_exponent(G, g_c, params.g_s, beta, x, y, s_a, s_b)


def test_full_run_keys_and_erasure():
    cred, server = make()
    card, srv = pscab.CardHandshake(cred, "orchid"), pscab.ServerHandshake(server)
    res = run_handshake(card, srv)
    assert res.accepted and res.card_key == res.server_key
    assert res.msg_types() == [MsgType.MSG1, MsgType.MSG2, MsgType.MSG3, MsgType.MSG4]
    assert card.session.secrets_present() == [] and srv.session.secrets_present() == []
    assert G.decode_target(res.card_key).exponent != 0


def test_wrong_password_no_server_confirmation():
    cred, server = make()
    res = run_handshake(pscab.CardHandshake(cred, "tulip"), pscab.ServerHandshake(server))
    assert isinstance(res.error, ConfirmationFailed)
    assert res.msg_types() == [MsgType.MSG1, MsgType.MSG2, MsgType.MSG3, MsgType.REJECT]


def _to_msg4(cred, server):
    s, f1 = pscab.pscab_card_start(cred, "orchid")
    srv, f2 = pscab.pscab_server_respond(server, f1)
    f3 = pscab.pscab_card_confirm(s, cred, "orchid", f2)
    f4, _ = pscab.pscab_server_finish(server, srv, f3)
    return s, f4


def test_tampered_server_confirmation():
    cred, server = make()
    s, f4 = _to_msg4(cred, server)
    with pytest.raises(ConfirmationFailed):
        pscab.pscab_card_finish(s, cred, Frame(f4.protocol_id, f4.msg_type, bytes([f4.payload[0] ^ 1]) + f4.payload[1:]))


def test_cross_session_server_confirmation():
    cred, server = make()
    s1, f4_1 = _to_msg4(cred, server)
    s2, f4_2 = _to_msg4(cred, server)
    with pytest.raises(ConfirmationFailed):
        pscab.pscab_card_finish(s1, cred, f4_2)


def test_transcript_through_reply_is_password_free():
    cred_a, server = make("orchid")
    cred_b, _ = make("tulip")
    _, f1a = pscab.pscab_card_start(cred_a, "orchid")
    _, f1b = pscab.pscab_card_start(cred_b, "tulip")
    assert f1a == f1b
    _, f2a = pscab.pscab_server_respond(server, f1a, random.Random(5))
    _, f2b = pscab.pscab_server_respond(server, f1b, random.Random(5))
    assert f2a == f2b


def test_variant_is_gated():
    cred, server = make()
    with pytest.raises(InsecureVariantDisabled):
        run_handshake(pscab.CardHandshake(cred, "orchid", variant=True),
                      pscab.ServerHandshake(server, variant=True))


def test_variant_completes_in_harness():
    cred, server = make()
    with insecure_variants():
        res = run_handshake(pscab.CardHandshake(cred, "orchid", variant=True),
                            pscab.ServerHandshake(server, variant=True))
    assert res.accepted and res.card_key == res.server_key
    assert res.msg_types() == [MsgType.MSG1, MsgType.VARIANT2, MsgType.MSG3]


def test_secure_card_refuses_variant_reply():
    cred, server = make()
    s, f1 = pscab.pscab_card_start(cred, "orchid")
    with insecure_variants():
        _, f2 = pscab.pscab_insecure_variant_respond(server, f1)
    with pytest.raises(UnexpectedMessage):
        pscab.pscab_card_confirm(s, cred, "orchid", f2)
