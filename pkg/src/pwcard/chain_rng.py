"""Card-side random numbers from a keyed hash chain.

The card keeps one 32-byte cell that is rewritten on every draw.  Each draw
evaluates HMAC-SHA256 under a card-local key twice over ``seed || counter``,
with distinct one-byte labels: one result is handed out, the other replaces
the cell.  The emitted value is therefore never stored, and earlier cells
cannot be recomputed from the current one without inverting the keyed hash.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

SEED_LEN = 32

_OUTPUT = b"\x01"
_ADVANCE = b"\x00"


@dataclass(frozen=True)
class RngState:
    seed: bytes
    chain_key: bytes
    counter: int = 0


def _keyed(key: bytes, label: bytes, seed: bytes, counter: int) -> bytes:
    return hmac.new(key, label + seed + counter.to_bytes(8, "big"), hashlib.sha256).digest()


def rng_init(seed: bytes, chain_key: bytes) -> RngState:
    if len(seed) != SEED_LEN or len(chain_key) != SEED_LEN:
        raise ValueError("seed and chain key are 32 bytes each")
    return RngState(bytes(seed), bytes(chain_key), 0)


def rng_next(state: RngState) -> tuple[bytes, RngState]:
    out = _keyed(state.chain_key, _OUTPUT, state.seed, state.counter)
    nxt = _keyed(state.chain_key, _ADVANCE, state.seed, state.counter)
    return out, RngState(nxt, state.chain_key, state.counter + 1)


def zeroized(state: RngState) -> RngState:
    return RngState(bytes(SEED_LEN), bytes(SEED_LEN), state.counter)
