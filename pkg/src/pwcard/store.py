"""Card image files and the server's credential store.

Card images are ``PWCI`` + version byte + TLV fields (1-byte tag, 2-byte
length).  The server store is a text file, one record per line:

    00:<hex server id>:<hex q>:<hex t>     header, always first
    <pid>::<hex master secret>             one per protocol in use
    03:<hex C>:<hex g_C>                   PSCAbV user
    04:<hex C>:<hex g_C>:<hex V>           PSCAV user
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import pscab, pscav, ssca
from .chain_rng import RngState
from .group import DebugGroup
from .wire import ProtocolId

MAGIC = b"PWCI\x01"

T_PROTOCOL = 0x01
T_IDENTITY = 0x02
T_SERVER = 0x03
T_Q = 0x04
T_T = 0x05
T_SUITE = 0x06
T_SECRET = 0x10
T_GS = 0x11
T_SEED = 0x20
T_CHAIN = 0x21
T_RNG_COUNTER = 0x22
T_QUERIES = 0x30
T_LIMIT = 0x31
T_DESTROYED = 0x32

PROTOCOL_NAMES = {
    "ssca": ProtocolId.SSCA,
    "pscab": ProtocolId.PSCAB,
    "pscabv": ProtocolId.PSCABV,
    "pscav": ProtocolId.PSCAV,
}


def _int_bytes(v: int) -> bytes:
    return v.to_bytes(max(1, (v.bit_length() + 7) // 8), "big")


def _tlv(tag: int, value: bytes) -> bytes:
    if len(value) > 0xFFFF:
        raise ValueError("TLV value too long")
    return bytes([tag]) + len(value).to_bytes(2, "big") + value


def card_protocol(cred) -> int:
    if isinstance(cred, ssca.SscaCardCredential):
        return ProtocolId.SSCA
    return cred.protocol_id


def encode_card(cred) -> bytes:
    pid = card_protocol(cred)
    out = bytearray(MAGIC)
    out += _tlv(T_PROTOCOL, bytes([pid]))
    out += _tlv(T_IDENTITY, cred.identity)
    out += _tlv(T_SERVER, cred.server_identity)
    if pid == ProtocolId.SSCA:
        out += _tlv(T_SECRET, cred.wrapped_key)
    else:
        g = cred.group
        out += _tlv(T_Q, _int_bytes(g.q)) + _tlv(T_T, _int_bytes(g.t)) + _tlv(T_SUITE, bytes([g.suite_id]))
        if pid == ProtocolId.PSCAV:
            out += _tlv(T_SECRET, g.encode_element(cred.blinded_generator))
        else:
            out += _tlv(T_SECRET, g.encode_element(cred.blinded_key))
            out += _tlv(T_GS, g.encode_element(cred.g_s))
    out += _tlv(T_SEED, cred.rng.seed) + _tlv(T_CHAIN, cred.rng.chain_key)
    out += _tlv(T_RNG_COUNTER, cred.rng.counter.to_bytes(8, "big"))
    out += _tlv(T_QUERIES, cred.query_counter.to_bytes(4, "big"))
    out += _tlv(T_LIMIT, cred.counter_limit.to_bytes(4, "big"))
    out += _tlv(T_DESTROYED, b"\x01" if cred.destroyed else b"\x00")
    return bytes(out)


def _parse_tlv(data: bytes) -> dict[int, bytes]:
    if not data.startswith(MAGIC):
        raise ValueError("not a card image")
    fields = {}
    pos = len(MAGIC)
    while pos < len(data):
        if pos + 3 > len(data):
            raise ValueError("truncated card image")
        tag = data[pos]
        n = int.from_bytes(data[pos + 1:pos + 3], "big")
        pos += 3
        if pos + n > len(data):
            raise ValueError("truncated card image")
        if tag in fields:
            raise ValueError(f"duplicate tag {tag:#04x}")
        fields[tag] = data[pos:pos + n]
        pos += n
    return fields


def decode_card(data: bytes):
    f = _parse_tlv(data)
    try:
        pid = f[T_PROTOCOL][0]
        common = dict(
            identity=f[T_IDENTITY],
            server_identity=f[T_SERVER],
            rng=RngState(f[T_SEED], f[T_CHAIN], int.from_bytes(f[T_RNG_COUNTER], "big")),
            query_counter=int.from_bytes(f[T_QUERIES], "big"),
            counter_limit=int.from_bytes(f[T_LIMIT], "big"),
            destroyed=f[T_DESTROYED] == b"\x01",
        )
        if pid == ProtocolId.SSCA:
            return ssca.SscaCardCredential(wrapped_key=f[T_SECRET], **common)
        group = DebugGroup(q=int.from_bytes(f[T_Q], "big"), t=int.from_bytes(f[T_T], "big"), suite_id=f[T_SUITE][0])
        if pid == ProtocolId.PSCAV:
            return pscav.PscavCardCredential(group=group, blinded_generator=group.decode_element(f[T_SECRET]),
                                             **common)
        if pid in (ProtocolId.PSCAB, ProtocolId.PSCABV):
            return pscab.PscabCardCredential(group=group, g_s=group.decode_element(f[T_GS]),
                                             blinded_key=group.decode_element(f[T_SECRET]),
                                             verifier=pid == ProtocolId.PSCABV, **common)
    except KeyError as exc:
        raise ValueError(f"card image lacks tag {exc.args[0]:#04x}") from None
    raise ValueError(f"unknown protocol id {pid:#04x} in card image")


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o600)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def save_card(path, cred) -> None:
    _atomic_write(path, encode_card(cred))


def load_card(path):
    return decode_card(Path(path).read_bytes())


@dataclass
class ServerStore:
    server_identity: bytes
    group: DebugGroup = field(default_factory=DebugGroup)
    masters: dict[int, bytes] = field(default_factory=dict)
    records: dict[tuple[int, bytes], tuple[bytes, ...]] = field(default_factory=dict)

    def __repr__(self):
        return (f"ServerStore(server_identity={self.server_identity!r}, group={self.group!r}, "
                f"protocols={sorted(self.masters)}, users={len(self.records)})")

    def master(self, pid: int, create: bool = False) -> bytes:
        if pid not in self.masters:
            if not create:
                raise KeyError(f"no master secret for protocol {pid:#04x}")
            self.masters[pid] = os.urandom(32)
        return self.masters[pid]

    def master_scalar(self, pid: int, create: bool = False) -> int:
        return self.group.scalar_from_bytes(self.master(pid, create))

    def pscab_params(self) -> pscab.PscabParams:
        return pscab.PscabParams.create(self.group, self.server_identity)

    def personalize(self, protocol: str | int, identity: bytes, password, *, counter_limit: int = 0,
                    rng_seed=None, chain_key=None):
        pid = PROTOCOL_NAMES[protocol] if isinstance(protocol, str) else ProtocolId(protocol)
        if (pid, identity) in self.records:
            raise ValueError(f"identity {identity!r} already enrolled for {pid.name}")
        kw = dict(rng_seed=rng_seed, chain_key=chain_key, counter_limit=counter_limit)
        if pid == ProtocolId.SSCA:
            return ssca.ssca_personalize(self.master(pid, True), identity, password,
                                         server_identity=self.server_identity, **kw)
        g = self.group
        if pid == ProtocolId.PSCAB:
            return pscab.pscab_extract(self.pscab_params(), self.master_scalar(pid, True), identity, password, **kw)
        if pid == ProtocolId.PSCABV:
            cred, g_c = pscab.pscab_extract_v(self.pscab_params(), self.master_scalar(pid, True), identity,
                                              password, **kw)
            self.records[(pid, bytes(identity))] = (g.encode_element(g_c),)
            return cred
        cred, rec = pscav.pscav_personalize(g, self.master(pid, True), identity, password,
                                            server_identity=self.server_identity, **kw)
        self.records[(pid, bytes(identity))] = (g.encode_element(rec.g_c), g.encode_element(rec.v))
        return cred

    def server_for(self, pid: int):
        """Build the protocol server; ``KeyError`` if the protocol was never set up."""
        g = self.group
        if pid == ProtocolId.SSCA:
            return ssca.SscaServer(self.master(pid), self.server_identity)
        if pid == ProtocolId.PSCAB:
            return pscab.PscabServer(self.pscab_params(), self.master_scalar(pid))
        if pid == ProtocolId.PSCABV:
            recs = {c: g.decode_element(v[0]) for (p, c), v in self.records.items() if p == pid}
            return pscab.PscabServer(self.pscab_params(), self.master_scalar(pid), recs)
        if pid == ProtocolId.PSCAV:
            self.master(pid)
            server = pscav.PscavServer(g, self.server_identity)
            for (p, c), values in self.records.items():
                if p == pid:
                    gc, v = values
                    server.add(pscav.PscavServerRecord(c, g.decode_element(gc), g.decode_element(v)))
            return server
        raise KeyError(pid)

    def dumps(self) -> str:
        lines = [f"00:{self.server_identity.hex()}:{_int_bytes(self.group.q).hex()}:{_int_bytes(self.group.t).hex()}"]
        for pid, secret in self.masters.items():
            lines.append(f"{pid:02x}::{secret.hex()}")
        for (pid, ident), values in self.records.items():
            lines.append(":".join([f"{pid:02x}", ident.hex(), *(v.hex() for v in values)]))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ServerStore":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("00:"):
            raise ValueError("server store lacks its header line")
        _, sid, q, t = lines[0].split(":")
        store = cls(bytes.fromhex(sid), DebugGroup(q=int(q, 16), t=int(t, 16)))
        for ln in lines[1:]:
            parts = ln.split(":")
            pid = int(parts[0], 16)
            if pid not in ProtocolId._value2member_map_:
                raise ValueError(f"unknown protocol id in store: {parts[0]}")
            if parts[1] == "":
                store.masters[pid] = bytes.fromhex(parts[2])
            else:
                store.records[(pid, bytes.fromhex(parts[1]))] = tuple(bytes.fromhex(p) for p in parts[2:])
        return store

    def save(self, path) -> None:
        _atomic_write(path, self.dumps().encode("ascii"))

    @classmethod
    def load(cls, path) -> "ServerStore":
        return cls.loads(Path(path).read_text(encoding="ascii"))
