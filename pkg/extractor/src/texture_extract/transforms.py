"""Control-condition transforms on token windows.

These mirror the transforms documented by the textcurv package byte for
byte (same PCG64 generator, same SHA-256 seed derivation), but are
re-implemented here so the extractor touches the analysis package only
through its file format and CLI.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_slot_seed(master_seed: int, slot_id: str) -> int:
    """First 8 bytes of SHA-256("textcurv:<seed>:<slot_id>"), big endian."""
    payload = f"textcurv:{master_seed}:{slot_id}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def shuffle_window(window: list[str], seed: int) -> list[str]:
    """Seeded PCG64 permutation of a right-context window."""
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(len(window))
    return [window[i] for i in perm]


def pair_slots(positions: list[int], seed: int) -> dict[int, int]:
    """Random pairing of sampled slots for the suffix-swap control.

    Positions are shuffled with a seeded PCG64 stream and taken two at a
    time; each member of a pair maps to the other. With an odd count the
    leftover slot maps to itself (its suffix is unchanged).
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    order = [positions[i] for i in rng.permutation(len(positions))]
    mapping: dict[int, int] = {}
    for i in range(0, len(order) - 1, 2):
        a, b = order[i], order[i + 1]
        mapping[a] = b
        mapping[b] = a
    if len(order) % 2 == 1:
        mapping[order[-1]] = order[-1]
    return mapping
