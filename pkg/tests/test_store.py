import pytest

from pwcard import pscab, pscav, ssca
from pwcard.card import run_handshake
from pwcard.errors import CardDestroyed
from pwcard.group import DebugGroup
from pwcard.store import PROTOCOL_NAMES, ServerStore, decode_card, encode_card, load_card, save_card
from pwcard.wire import ProtocolId

MODULES = {"ssca": ssca, "pscab": pscab, "pscabv": pscab, "pscav": pscav}


@pytest.fixture
def store():
    return ServerStore(b"store-server")


@pytest.mark.parametrize("proto", sorted(PROTOCOL_NAMES))
def test_card_image_round_trip_and_handshake(store, proto):
    cred = store.personalize(proto, b"u1", "secret", counter_limit=4)
    cred.query_counter = 2
    data = encode_card(cred)
    back = decode_card(data)
    assert encode_card(back) == data
    assert back.query_counter == 2 and back.counter_limit == 4 and not back.destroyed
    server = ServerStore.loads(store.dumps()).server_for(PROTOCOL_NAMES[proto])
    mod = MODULES[proto]
    assert run_handshake(mod.CardHandshake(back, "secret"), mod.ServerHandshake(server)).accepted


@pytest.mark.parametrize("proto", sorted(PROTOCOL_NAMES))
def test_card_image_holds_no_master_secret(store, proto):
    cred = store.personalize(proto, b"u1", "secret")
    data = encode_card(cred)
    master = store.masters[PROTOCOL_NAMES[proto]]
    assert master not in data
    assert store.group.encode_scalar(store.master_scalar(PROTOCOL_NAMES[proto]))[-8:] not in data


def test_store_text_round_trip_is_byte_identical(store):
    for proto in PROTOCOL_NAMES:
        store.personalize(proto, b"alice", "pw")
        store.personalize(proto, b"bob", "pw2")
    text = store.dumps()
    again = ServerStore.loads(text)
    assert again.dumps() == text
    assert again == store
    assert text == text.lower()


def test_store_file_round_trip(tmp_path, store):
    store.personalize("pscav", b"alice", "pw")
    path = tmp_path / "srv.db"
    store.save(path)
    first = path.read_bytes()
    ServerStore.load(path).save(path)
    assert path.read_bytes() == first


def test_store_layout(store):
    store.personalize("pscabv", b"\xab", "pw")
    store.personalize("pscav", b"\xcd", "pw")
    lines = store.dumps().splitlines()
    assert lines[0] == "00:" + b"store-server".hex() + ":1fffffffffffffff:01"
    assert any(ln.startswith("03:ab:") and ln.count(":") == 2 for ln in lines)
    assert any(ln.startswith("04:cd:") and ln.count(":") == 3 for ln in lines)
    assert any(ln.startswith("03::") for ln in lines)


def test_duplicate_enrollment_refused(store):
    store.personalize("pscav", b"alice", "pw")
    with pytest.raises(ValueError):
        store.personalize("pscav", b"alice", "pw")


def test_server_for_unconfigured_protocol(store):
    with pytest.raises(KeyError):
        store.server_for(ProtocolId.SSCA)


def test_cofactor_survives_round_trip():
    s = ServerStore(b"x", DebugGroup(t=3))
    s.personalize("pscab", b"a", "pw")
    assert ServerStore.loads(s.dumps()).group == DebugGroup(t=3)


def test_card_file_save_load(tmp_path, store):
    cred = store.personalize("ssca", b"a", "pw")
    path = tmp_path / "card.img"
    save_card(path, cred)
    assert encode_card(load_card(path)) == encode_card(cred)
    assert (path.stat().st_mode & 0o777) == 0o600


@pytest.mark.parametrize("blob", [b"", b"PWCI\x01\x01\x00", b"nope", b"PWCI\x01\x01\x00\x01\x09"])
def test_bad_card_images(blob):
    with pytest.raises(ValueError):
        decode_card(blob)


def test_destroyed_card_image_is_zeroized(store):
    cred = store.personalize("pscab", b"a", "pw", counter_limit=1)
    cred.begin_query()
    with pytest.raises(CardDestroyed):
        cred.begin_query()
    back = decode_card(encode_card(cred))
    assert back.destroyed and back.blinded_key == store.group.identity
    assert back.rng.seed == bytes(32) and back.rng.chain_key == bytes(32)
