"""Counter-based random streams with order-independent derivation.

A stream is identified by ``(master_seed, stream_index)``. The Philox-4x64
key is the first 16 bytes of

    SHA-256(b"edge-logdet/v1" || le64(master_seed) || le64(stream_index))

and the counter starts at zero, so a stream can be rebuilt anywhere without
replaying any other stream. Uniform doubles take the top 53 bits of each raw
64-bit word and are centred in their cell, giving values in the open
interval (0, 1).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

_DOMAIN = b"edge-logdet/v1"
_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53


def derive_key(master_seed: int, stream_index: int) -> int:
    """128-bit Philox key for a stream; inputs are reduced mod 2**64."""
    payload = (
        _DOMAIN
        + (master_seed & _MASK64).to_bytes(8, "little")
        + (stream_index & _MASK64).to_bytes(8, "little")
    )
    return int.from_bytes(hashlib.sha256(payload).digest()[:16], "little")


def campaign_stream_index(n: int, rep: int) -> int:
    """Stream index for replicate ``rep`` of matrix size ``n``: ``n << 32 | rep``."""
    if not (0 <= n < 1 << 32 and 0 <= rep < 1 << 32):
        raise ValueError("n and rep must fit in 32 bits")
    return (n << 32) | rep


@dataclass
class RngStream:
    master_seed: int
    stream_index: int = 0
    algorithm: str = field(default="philox4x64-sha256", init=False)
    _bitgen: np.random.Philox = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.master_seed &= _MASK64
        self.stream_index &= _MASK64
        self._bitgen = np.random.Philox(key=derive_key(self.master_seed, self.stream_index))

    @property
    def provenance(self) -> tuple[int, int]:
        return (self.master_seed, self.stream_index)

    def raw(self, n: int) -> np.ndarray:
        return self._bitgen.random_raw(n)

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in (0, 1); never exactly 0 or 1."""
        bits = self._bitgen.random_raw(n) >> np.uint64(11)
        return (bits.astype(np.float64) + 0.5) * _TWO_M53

    def spawn(self, stream_index: int) -> "RngStream":
        """Sibling stream under the same master seed."""
        return RngStream(self.master_seed, stream_index)
