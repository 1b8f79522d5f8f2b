"""Deterministic sub-seed derivation.

Every random draw in the package flows from one global seed. Component
seeds are derived as a 64-bit splitmix walk over (seed, label) so that
independent components get statistically independent streams while runs
stay bit-reproducible across platforms.
"""

_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, label: str) -> int:
    """Derive a 64-bit sub-seed from a parent seed and a text label."""
    h = _splitmix64(seed & _MASK)
    for byte in label.encode("utf-8"):
        h = _splitmix64(h ^ (byte + 1))
    return h
