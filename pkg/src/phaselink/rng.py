"""Deterministic random streams built on the SplitMix64 finalizer.

All randomness in the package flows through these functions so that runs
are reproducible from integer seeds alone, independent of numpy's global
state. The generator is counter-based: draw i of stream s is the SplitMix64
mix of ``s + (i+1) * GOLDEN`` (mod 2^64). Constants:

    GOLDEN = 0x9E3779B97F4A7C15
    MIX1   = 0xBF58476D1CE4E5B9   (xor-shift 30, multiply)
    MIX2   = 0x94D049BB133111EB   (xor-shift 27, multiply)
    final xor-shift 31

Because ``i -> s + (i+1)*GOLDEN`` is a bijection on 64-bit integers (GOLDEN
is odd) and the mix is invertible, distinct indices of one stream can never
collide.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_INV_2_53 = 1.0 / (1 << 53)


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer (scalar, pure Python)."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def split_seed(seed: int, stream_index: int) -> int:
    """Derive an independent child seed for a numbered stream.

    Deterministic and collision-free across stream indices for a fixed
    parent seed (bijective update, see module docstring).
    """
    return mix64((seed + ((stream_index + 1) * GOLDEN)) & MASK64)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _U_MIX1
    z = (z ^ (z >> np.uint64(27))) * _U_MIX2
    return z ^ (z >> np.uint64(31))


def raw64(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """n raw 64-bit draws from the stream, starting at position offset."""
    if n < 0:
        raise ValueError("n must be non-negative")
    idx = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
    return _mix_array(np.uint64(seed & MASK64) + idx * _U_GOLDEN)


def uniforms(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """n uniform floats in [0, 1) with 53-bit resolution."""
    z = raw64(seed, n, offset)
    return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53


def random_bits(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """n unbiased bits as a uint8 array of 0/1."""
    return (raw64(seed, n, offset) & np.uint64(1)).astype(np.uint8)


def random_bytes(seed: int, n: int) -> bytes:
    """n deterministic bytes from the stream."""
    words = raw64(seed, (n + 7) // 8)
    return words.tobytes()[:n]
