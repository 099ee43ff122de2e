import logging
import socket

import pytest
from conftest import PASSWORD
from netfuzz import REJECT_BYTES, exchange, fuzz_service

from pwcard import net, pscab, ssca
from pwcard.net import EXIT_ACCEPT, EXIT_DESTROYED, EXIT_NETWORK, EXIT_REJECT, ServerConnection, authenticate
from pwcard.store import PROTOCOL_NAMES, encode_card, load_card
from pwcard.wire import Frame, MsgType, ProtocolId, decode_frame, encode_frame, pack_fields


@pytest.mark.parametrize("proto", sorted(PROTOCOL_NAMES))
def test_loopback_accept_with_matching_check(enrolled, service, proto, caplog):
    caplog.set_level(logging.INFO, logger="pwcard.net")
    report = authenticate(enrolled[1][proto], service.address, PASSWORD)
    assert report.status == EXIT_ACCEPT, report
    assert len(report.check) == 16 and int(report.check, 16) >= 0
    server_side = [r for r in service.sessions if r.accepted]
    assert [r.check for r in server_side] == [report.check]
    assert f"Accept check={report.check}" in caplog.text


@pytest.mark.parametrize("proto", sorted(PROTOCOL_NAMES))
def test_wrong_password_rejected_and_server_keeps_serving(enrolled, service, proto):
    assert authenticate(enrolled[1][proto], service.address, "wrong").status == EXIT_REJECT
    assert authenticate(enrolled[1][proto], service.address, PASSWORD).status == EXIT_ACCEPT
    assert [r.accepted for r in service.sessions] == [False, True]


def test_image_updated_after_each_run(enrolled, service):
    path = enrolled[1]["pscab"]
    before = path.read_bytes()
    authenticate(path, service.address, "wrong")
    after = load_card(path)
    assert after.query_counter == 1 and path.read_bytes() != before
    authenticate(path, service.address, PASSWORD)
    assert load_card(path).query_counter == 0


def test_counter_exhausted_image(enrolled, service):
    path = enrolled[1]["ssca"]
    for _ in range(3):
        assert authenticate(path, service.address, "wrong").status == EXIT_REJECT
    report = authenticate(path, service.address, PASSWORD)
    assert report.status == EXIT_DESTROYED and "card destroyed" in report.message
    card = load_card(path)
    assert card.destroyed and card.wrapped_key == bytes(32)


def test_server_down(enrolled):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    assert authenticate(enrolled[1]["ssca"], ("127.0.0.1", port), PASSWORD).status == EXIT_NETWORK


def test_second_first_message_on_one_connection_rejected(enrolled, service):
    store, cards = enrolled
    cred = load_card(cards["pscab"])
    _, f1 = pscab.pscab_card_start(cred, PASSWORD)
    _, f1b = pscab.pscab_card_start(cred, PASSWORD)
    reply = exchange(service.address, encode_frame(f1) + encode_frame(f1b))
    second = decode_frame(reply[-7:])
    assert second.msg_type == MsgType.REJECT
    assert decode_frame(reply[:-7]).msg_type == MsgType.MSG2


def test_protocol_switch_on_one_connection_rejected(enrolled, service):
    _, cards = enrolled
    cred = load_card(cards["pscab"])
    _, f1 = pscab.pscab_card_start(cred, PASSWORD)
    switched = Frame(ProtocolId.PSCAV, MsgType.MSG3, bytes(32))
    reply = exchange(service.address, encode_frame(f1) + encode_frame(switched))
    assert reply.endswith(encode_frame(Frame(ProtocolId.PSCAB, MsgType.REJECT)))


def test_connection_state_machine_in_process(enrolled):
    store, cards = enrolled
    servers = {p: store.server_for(p) for p in store.masters}
    conn = ServerConnection(servers, 1)
    cred = load_card(cards["ssca"])
    _, f1 = ssca.ssca_card_start(cred, PASSWORD)
    reply, close = conn.handle(f1)
    assert reply.msg_type == MsgType.MSG2 and not close
    reply, close = conn.handle(f1)
    assert reply == Frame(ProtocolId.SSCA, MsgType.REJECT) and close
    assert conn.record.accepted is False


def test_first_frame_must_open_session(enrolled):
    store, _ = enrolled
    conn = ServerConnection({p: store.server_for(p) for p in store.masters}, 1)
    reply, close = conn.handle(Frame(ProtocolId.PSCAV, MsgType.MSG3, b""))
    assert reply.msg_type == MsgType.REJECT and reply.payload == b"" and close


def test_protocol_filter(enrolled):
    store, cards = enrolled
    with net.AuthService(store, protocols=(ProtocolId.PSCAV,)) as svc:
        assert authenticate(cards["ssca"], svc.address, PASSWORD).status == EXIT_REJECT
        assert authenticate(cards["pscav"], svc.address, PASSWORD).status == EXIT_ACCEPT


@pytest.mark.parametrize("data", [
    b"",
    b"\x01",
    b"\x02\x01\x01\x00\x00\x00\x00",
    b"\x01\x09\x01\x00\x00\x00\x00",
    b"\x01\x01\x01\x00\x00\x00\x09abc",
    b"\x01\x01\x01\xff\xff\xff\xff",
    encode_frame(Frame(ProtocolId.SSCA, MsgType.MSG1, b"junk")),
    encode_frame(Frame(ProtocolId.PSCAB, MsgType.MSG1, pack_fields(b"user-pscab", b"\x01\x01" + bytes(8)))),
])
def test_malformed_input_gets_opaque_reject(service, data):
    reply = exchange(service.address, data)
    assert reply in REJECT_BYTES or (data == b"" and reply == b"")


def test_fuzz_sample_never_crashes(enrolled, service, caplog):
    caplog.set_level(logging.INFO, logger="pwcard.net")
    assert fuzz_service(service.address, 1000, seed=1) == 0
    assert "internal error" not in caplog.text
    assert authenticate(enrolled[1]["pscav"], service.address, PASSWORD).status == EXIT_ACCEPT


def test_no_secrets_in_logs_or_stdout(enrolled, service, caplog, capsys, monkeypatch):
    caplog.set_level(logging.DEBUG)
    keys = []
    real = net.check_value

    def recording(sk):
        keys.append(sk)
        return real(sk)

    monkeypatch.setattr(net, "check_value", recording)
    store, cards = enrolled
    images = {name: load_card(path) for name, path in cards.items()}
    for name, path in cards.items():
        print(authenticate(path, service.address, PASSWORD))
        print(authenticate(path, service.address, "guess"))
    secrets = [PASSWORD.encode(), b"guess"] + list(store.masters.values()) + keys
    secrets.append(ssca.card_key(store.masters[ProtocolId.SSCA], b"user-ssca"))
    for name, cred in images.items():
        if name == "ssca":
            secrets.append(cred.wrapped_key)
        else:
            blob = encode_card(cred)
            g = store.group
            el = cred.blinded_generator if name == "pscav" else cred.blinded_key
            secrets.append(g.encode_element(el))
            assert g.encode_element(el) in blob
    assert keys, "no session keys captured"
    text = caplog.text + capsys.readouterr().out
    for s in secrets:
        for form in (s.hex(), s.hex().upper(), repr(s)):
            assert form not in text
        if s.isascii() and len(s) > 3:
            assert s.decode("ascii", "replace") not in text
