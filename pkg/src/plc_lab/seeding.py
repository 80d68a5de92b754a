"""Deterministic seed derivation for per-clip and per-assessor RNG streams.

All sampling in the toolkit goes through ``numpy.random.default_rng`` (PCG64),
which produces identical streams across platforms for a given 64-bit seed.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def splitmix64(value: int) -> int:
    """One step of the splitmix64 mixer; maps any integer to a 64-bit hash."""
    z = (value + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master_seed: int, index: int) -> int:
    """Per-item seed: master seed XOR a splitmix64 hash of the item index."""
    return (master_seed & _MASK64) ^ splitmix64(index)


def seed_from_label(master_seed: int, label: str) -> int:
    """Stable seed for a string label (e.g. an assessor id)."""
    acc = 0
    for byte in label.encode("utf-8"):
        acc = splitmix64(acc ^ byte)
    return (master_seed & _MASK64) ^ acc
