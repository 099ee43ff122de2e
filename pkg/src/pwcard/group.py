"""Algebraic substrate shared by the protocols.

The only backend is an exponent-tracking "debug" group: every element is
stored as its discrete logarithm ``e`` with respect to a fixed generator of
a cyclic group of order ``n = q * t``.  Honest elements live in the order-q
subgroup (``e % t == 0``); the cofactor ``t`` exists so that small-subgroup
tampering can be demonstrated.  The symmetric pairing multiplies reduced
exponents, which makes every pairing identity in the protocols exactly
checkable.  This is a test substrate, not a secure group: anyone can read
the discrete log of any element.

Hashing is a single SHA-256 with a role tag and length-prefixed fields, so
the different random oracles the protocols need never collide.
"""

from __future__ import annotations

import hashlib
import hmac as _hmac
import secrets
from dataclasses import dataclass
from enum import Enum

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from sympy import isprime

from .errors import NonSubgroupElement, SuiteMismatch

MERSENNE_61 = (1 << 61) - 1

HASH_LEN = 32
NONCE_LEN = 16
_ZERO_NONCE = bytes(NONCE_LEN)
_DOMAIN = b"pwcard/v1"

_ELEMENT_TYPE = 0x01
_TARGET_TYPE = 0x02


class HashRole(Enum):
    H2G = b"H2G"
    H1 = b"H1"
    H2S = b"H2S"
    H2S_A = b"H2S-A"
    H2S_B = b"H2S-B"
    PI = b"PI"
    KDF = b"KDF"
    SK = b"SK"
    WRAP = b"WRAP"


_GROUP_ROLES = frozenset({HashRole.H2G, HashRole.H1})
_SCALAR_ROLES = frozenset({HashRole.H2S, HashRole.H2S_A, HashRole.H2S_B, HashRole.PI, HashRole.SK})


def encode_fields(*parts: bytes) -> bytes:
    """Concatenate fields, each behind a 4-byte big-endian length."""
    return b"".join(len(p).to_bytes(4, "big") + bytes(p) for p in parts)


def role_hash(role: HashRole, *parts: bytes) -> bytes:
    tag = role.value
    h = hashlib.sha256(_DOMAIN)
    h.update(bytes([len(tag)]) + tag)
    h.update(encode_fields(*parts))
    return h.digest()


def kdf(*parts: bytes) -> bytes:
    return role_hash(HashRole.KDF, *parts)


def hmac_tag(key: bytes, msg: bytes) -> bytes:
    return _hmac.new(key, msg, hashlib.sha256).digest()


def tags_equal(a: bytes, b: bytes) -> bool:
    return _hmac.compare_digest(a, b)


def password_bytes(password: str | bytes) -> bytes:
    if isinstance(password, str):
        return password.encode("utf-8")
    return bytes(password)


def stream_xor(key: bytes, nonce: bytes, data: bytes) -> bytes:
    """AES-256-CTR keystream XOR. Unauthenticated by design."""
    enc = Cipher(algorithms.AES(key), modes.CTR(nonce)).encryptor()
    return enc.update(data) + enc.finalize()


def wrap_key(password: str | bytes, plain: bytes, length: int = HASH_LEN) -> bytes:
    """Encrypt a fixed-length key under a password.

    There is no integrity tag: :func:`unwrap_key` returns *some* key for every
    password, so the wrapped value alone cannot confirm a guess.
    """
    if len(plain) != length:
        raise ValueError(f"wrapped keys are {length} bytes, got {len(plain)}")
    return stream_xor(role_hash(HashRole.WRAP, password_bytes(password)), _ZERO_NONCE, plain)


def unwrap_key(password: str | bytes, wrapped: bytes, length: int = HASH_LEN) -> bytes:
    if len(wrapped) != length:
        raise ValueError(f"wrapped keys are {length} bytes, got {len(wrapped)}")
    return stream_xor(role_hash(HashRole.WRAP, password_bytes(password)), _ZERO_NONCE, wrapped)


@dataclass(frozen=True)
class GroupConfig:
    q: int
    t: int = 1
    suite_id: int = 1
    hash_id: str = "sha256"

    def __post_init__(self):
        if not isprime(self.q):
            raise ValueError(f"subgroup order {self.q} is not prime")
        if self.t < 1:
            raise ValueError("cofactor must be a positive integer")
        if self.t % self.q == 0:
            raise ValueError("cofactor must not be a multiple of q")
        if not 0 <= self.suite_id <= 0xFF:
            raise ValueError("suite_id is one byte")
        if self.hash_id != "sha256":
            raise ValueError(f"unsupported hash {self.hash_id!r}")

    @property
    def n(self) -> int:
        return self.q * self.t


@dataclass(frozen=True, slots=True)
class GroupElement:
    suite_id: int
    exponent: int


@dataclass(frozen=True, slots=True)
class TargetElement:
    suite_id: int
    exponent: int


class DebugGroup:
    """Cyclic group of order ``q*t`` with elements represented by their exponents."""

    def __init__(self, q: int = MERSENNE_61, t: int = 1, suite_id: int = 1):
        self.config = GroupConfig(q=q, t=t, suite_id=suite_id)
        self.q = q
        self.t = t
        self.n = q * t
        self.suite_id = suite_id
        self.width = (self.n.bit_length() + 7) // 8
        self.identity = GroupElement(suite_id, 0)
        self.target_identity = TargetElement(suite_id, 0)
        # generator of the whole group, and of the order-q subgroup
        self.generator = GroupElement(suite_id, 1 % self.n)
        self.subgroup_generator = GroupElement(suite_id, t % self.n)

    def __repr__(self):
        return f"DebugGroup(q={self.q}, t={self.t}, suite_id={self.suite_id})"

    def __eq__(self, other):
        return isinstance(other, DebugGroup) and self.config == other.config

    def __hash__(self):
        return hash(self.config)

    def _own(self, x):
        if x.suite_id != self.suite_id:
            raise SuiteMismatch(f"element of suite {x.suite_id} used with suite {self.suite_id}")

    def element(self, exponent: int) -> GroupElement:
        return GroupElement(self.suite_id, exponent % self.n)

    def exp(self, base: GroupElement, k: int) -> GroupElement:
        self._own(base)
        return GroupElement(self.suite_id, base.exponent * k % self.n)

    def mul(self, a: GroupElement, b: GroupElement) -> GroupElement:
        self._own(a)
        self._own(b)
        return GroupElement(self.suite_id, (a.exponent + b.exponent) % self.n)

    def is_in_subgroup(self, x: GroupElement) -> bool:
        self._own(x)
        return x.exponent % self.t == 0

    def check_element(self, x: GroupElement) -> GroupElement:
        """Reject anything outside the order-q subgroup, and the identity."""
        if not self.is_in_subgroup(x) or x.exponent == 0:
            raise NonSubgroupElement("received element is not a subgroup generator")
        return x

    def scalar_inverse(self, k: int) -> int:
        if k % self.q == 0:
            raise ValueError("zero has no inverse mod q")
        return pow(k, -1, self.q)

    def random_scalar(self, rng=None) -> int:
        """Uniform element of Z_q*; ``rng`` is any ``random.Random``-like object."""
        if rng is None:
            return secrets.randbelow(self.q - 1) + 1
        return rng.randrange(1, self.q)

    def scalar_from_bytes(self, data: bytes) -> int:
        """Map RNG output into Z_q*."""
        return int.from_bytes(data, "big") % (self.q - 1) + 1

    def pair(self, a: GroupElement, b: GroupElement) -> TargetElement:
        if not (self.is_in_subgroup(a) and self.is_in_subgroup(b)):
            raise NonSubgroupElement("pairing inputs must lie in the order-q subgroup")
        return TargetElement(self.suite_id, (a.exponent // self.t) * (b.exponent // self.t) % self.q)

    def target_exp(self, x: TargetElement, k: int) -> TargetElement:
        self._own(x)
        return TargetElement(self.suite_id, x.exponent * k % self.q)

    def target_mul(self, a: TargetElement, b: TargetElement) -> TargetElement:
        self._own(a)
        self._own(b)
        return TargetElement(self.suite_id, (a.exponent + b.exponent) % self.q)

    def hash_to_group(self, role: HashRole, *parts: bytes) -> GroupElement:
        """Deterministic generator of the order-q subgroup."""
        if role not in _GROUP_ROLES:
            raise ValueError(f"{role.name} is not a hash-to-group role")
        return GroupElement(self.suite_id, self.t * self._nonzero_mod_q(role, parts))

    def hash_to_scalar(self, role: HashRole, *parts: bytes) -> int:
        if role not in _SCALAR_ROLES:
            raise ValueError(f"{role.name} is not a hash-to-scalar role")
        return self._nonzero_mod_q(role, parts)

    def _nonzero_mod_q(self, role, parts):
        v = int.from_bytes(role_hash(role, *parts), "big") % self.q
        counter = 0
        while v == 0:
            counter += 1
            if counter > 0xFF:
                raise RuntimeError("hash rejection loop exhausted")
            v = int.from_bytes(role_hash(role, *parts, bytes([counter])), "big") % self.q
        return v

    # encodings

    def encode_scalar(self, k: int) -> bytes:
        return (k % self.n).to_bytes(self.width, "big")

    def decode_scalar(self, data: bytes) -> int:
        if len(data) != self.width:
            raise ValueError("bad scalar length")
        k = int.from_bytes(data, "big")
        if k >= self.n:
            raise ValueError("scalar out of range")
        return k

    def encode_element(self, x: GroupElement) -> bytes:
        self._own(x)
        return bytes([self.suite_id, _ELEMENT_TYPE]) + x.exponent.to_bytes(self.width, "big")

    def decode_element(self, data: bytes) -> GroupElement:
        return GroupElement(self.suite_id, self._decode(data, _ELEMENT_TYPE, self.n))

    def encode_target(self, x: TargetElement) -> bytes:
        self._own(x)
        return bytes([self.suite_id, _TARGET_TYPE]) + x.exponent.to_bytes(self.width, "big")

    def decode_target(self, data: bytes) -> TargetElement:
        return TargetElement(self.suite_id, self._decode(data, _TARGET_TYPE, self.q))

    def _decode(self, data, type_byte, bound):
        if len(data) != self.width + 2:
            raise ValueError("bad element length")
        if data[0] != self.suite_id:
            raise SuiteMismatch(f"element of suite {data[0]} decoded with suite {self.suite_id}")
        if data[1] != type_byte:
            raise ValueError("wrong element type")
        e = int.from_bytes(data[2:], "big")
        if e >= bound:
            raise ValueError("element exponent out of range")
        return e
