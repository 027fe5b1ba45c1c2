"""Four-phase encoding and basis measurement.

Frozen bit/phase convention (any consistent one works; this one is fixed
for interoperability):

    Z basis: bit 0 -> 0,     bit 1 -> pi
    X basis: bit 0 -> pi/2,  bit 1 -> 3*pi/2

Every phase decomposes as pm1 + pm2 with pm1 in {0, pi/2} (basis
modulator) and pm2 in {0, pi} (bit modulator).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

BASIS_Z = "Z"
BASIS_X = "X"

_PHASES = {
    (BASIS_Z, 0): 0.0,
    (BASIS_Z, 1): math.pi,
    (BASIS_X, 0): math.pi / 2.0,
    (BASIS_X, 1): 3.0 * math.pi / 2.0,
}


@dataclass(frozen=True)
class PhaseSymbol:
    phase: float
    basis: str
    bit: int


class ClickOutcome(NamedTuple):
    """Detection outcome of one pulse, from the Monte Carlo click model."""

    clicked: bool
    error: bool


@dataclass(frozen=True)
class SiftRecord:
    timestamp_index: int
    alice_basis: str
    bob_basis: str
    bob_bit: int
    kept: bool


def encode_pulse(chip_bit: int, basis_choice: str) -> PhaseSymbol:
    """Map a chip bit and basis choice onto one of the four phases."""
    if chip_bit not in (0, 1):
        raise ValueError("chip_bit must be 0 or 1")
    if basis_choice not in (BASIS_Z, BASIS_X):
        raise ValueError("basis must be 'Z' or 'X'")
    return PhaseSymbol(
        phase=_PHASES[(basis_choice, chip_bit)], basis=basis_choice, bit=chip_bit
    )


def modulator_settings(symbol: PhaseSymbol) -> tuple:
    """Decompose a symbol's phase into the two cascaded modulator settings
    (pm1 in {0, pi/2}, pm2 in {0, pi})."""
    pm1 = math.pi / 2.0 if symbol.basis == BASIS_X else 0.0
    pm2 = math.pi if symbol.bit == 1 else 0.0
    return pm1, pm2


def measure_pulse(
    symbol: PhaseSymbol, bob_basis: str, outcome: ClickOutcome, timestamp_index: int = 0
) -> SiftRecord:
    """Measurement record for one pulse.

    kept iff the bases match and the detector clicked; Bob's bit is
    Alice's bit flipped by the outcome's error flag.
    """
    if bob_basis not in (BASIS_Z, BASIS_X):
        raise ValueError("basis must be 'Z' or 'X'")
    kept = outcome.clicked and symbol.basis == bob_basis
    bob_bit = symbol.bit ^ int(outcome.error)
    return SiftRecord(
        timestamp_index=timestamp_index,
        alice_basis=symbol.basis,
        bob_basis=bob_basis,
        bob_bit=bob_bit,
        kept=kept,
    )
