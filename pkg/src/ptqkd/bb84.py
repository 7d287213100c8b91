"""BB84 encoding, transmission, measurement and sifting."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np

from ptqkd import qmath
from ptqkd.ptcore import MeasurementPair, cpt_measure


class Basis(IntEnum):
    COMPUTATIONAL = 0
    DIAGONAL = 1


# Row 2*b + a holds the state encoding bit a in basis b.
BB84_STATES = np.array(
    [
        [1, 0],
        [0, 1],
        [qmath.SQRT1_2, qmath.SQRT1_2],
        [qmath.SQRT1_2, -qmath.SQRT1_2],
    ],
    dtype=complex,
)

STATE_LABELS = ("psi00", "psi10", "psi01", "psi11")

BASIS_PAIRS = (
    MeasurementPair.hermitian(BB84_STATES[0], BB84_STATES[1]),
    MeasurementPair.hermitian(BB84_STATES[2], BB84_STATES[3]),
)

# Tag codes used in transcripts.
TAG_NAMES = ("conclusive", "unambiguous", "inconclusive-null")


def encode(a: int, b: int) -> np.ndarray:
    """State |psi_ab>: bit ``a`` in basis ``b``."""
    if a not in (0, 1) or b not in (0, 1):
        raise ValueError("bit and basis must be 0 or 1")
    return BB84_STATES[2 * b + a].copy()


def measure_in_basis(state, basis: int, rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """Projective measurement in a BB84 basis; returns (bit, collapsed basis state)."""
    outcome, _ = cpt_measure(BASIS_PAIRS[int(basis)], state, rng)
    bit = 0 if outcome == 1 else 1
    return bit, encode(bit, int(basis))


def prob_zero_batch(states: np.ndarray, bases: np.ndarray) -> np.ndarray:
    """P(bit 0) for each row of ``states`` measured in the matching entry of ``bases``."""
    refs = BB84_STATES[2 * bases]
    num = np.abs(np.einsum("ni,ni->n", refs.conj(), states)) ** 2
    den = np.einsum("ni,ni->n", states.conj(), states).real
    return np.clip(num / den, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class Transcript:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    bob_bits: np.ndarray
    lost: np.ndarray
    eve_bits: Optional[np.ndarray] = None  # -1 marks an undecided bit
    eve_tags: Optional[np.ndarray] = None  # indices into TAG_NAMES

    def __len__(self) -> int:
        return len(self.a)

    @property
    def sifted_mask(self) -> np.ndarray:
        return (self.b == self.c) & ~self.lost

    def to_dict(self) -> dict:
        d = {
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "bob_bits": self.bob_bits.tolist(),
            "eve_bits": None,
            "eve_tags": None,
            "lost": self.lost.tolist(),
        }
        if self.eve_bits is not None:
            d["eve_bits"] = [None if x < 0 else int(x) for x in self.eve_bits]
            d["eve_tags"] = [TAG_NAMES[t] for t in self.eve_tags]
        return d


@dataclass(frozen=True, eq=False)
class SiftResult:
    alice_key: np.ndarray
    bob_key: np.ndarray
    eve_key: Optional[np.ndarray]
    sifted_fraction: float
    qber: Optional[float]  # None when nothing survived sifting

    def to_dict(self) -> dict:
        return {
            "alice_key": self.alice_key.tolist(),
            "bob_key": self.bob_key.tolist(),
            "eve_key": None
            if self.eve_key is None
            else [None if x < 0 else int(x) for x in self.eve_key],
            "sifted_fraction": self.sifted_fraction,
            "qber": self.qber,
        }


def run_protocol(l: int, eve=None, rng: Optional[np.random.Generator] = None) -> Transcript:
    """Send ``l`` qubits from Alice to Bob, optionally through ``eve``.

    ``eve`` is any object with an ``intercept_batch(states, rng)`` method
    (see :class:`ptqkd.eve.Strategy`). Random draws happen in a fixed order
    so a given generator state always yields the same transcript.
    """
    if l < 1:
        raise ValueError("l must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    a, b, c = rng.integers(0, 2, size=(3, l), dtype=np.int8)
    states = BB84_STATES[2 * b + a]
    if eve is None:
        lost = np.zeros(l, dtype=bool)
        arriving = states
        eve_bits = eve_tags = None
    else:
        out = eve.intercept_batch(states, rng)
        lost = out.lost
        arriving = out.resend
        eve_bits, eve_tags = out.bits, out.tags
    u = rng.random(l)
    p0 = prob_zero_batch(arriving, c)
    bob_bits = (u >= p0).astype(np.int8)
    bob_bits[lost] = 0
    return Transcript(a, b, c, bob_bits, lost, eve_bits, eve_tags)


def sift(t: Transcript) -> SiftResult:
    mask = t.sifted_mask
    n = len(t)
    alice = t.a[mask]
    bob = t.bob_bits[mask]
    eve_key = None if t.eve_bits is None else t.eve_bits[mask]
    m = int(mask.sum())
    qber = float(np.count_nonzero(alice != bob)) / m if m else None
    return SiftResult(alice, bob, eve_key, m / n if n else 0.0, qber)
