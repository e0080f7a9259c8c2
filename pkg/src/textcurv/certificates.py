"""Definition-independent flatness certificates and control transforms.

Two certificates are computed from a belief field over the context-radius
grid:

* holonomy: the second mixed difference of log-odds over unit squares of
  the (re-indexed) grid. It vanishes exactly when left and right context
  contribute additively in log-odds, so a nonzero value witnesses
  order-sensitive evidence composition.
* CEI: the KL gap between the two-sided belief and its product-of-experts
  reconstruction from the one-sided beliefs. It vanishes exactly when the
  two sides combine as independent log Bayes factors.

The module also hosts the two coherence-destroying sequence transforms
(suffix swap and local shuffle) used as matched controls.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .beliefs import Belief, BeliefField, kl
from .errors import DegenerateReference, InvalidInput


@dataclass(frozen=True)
class HolonomyReport:
    """Unit-square holonomy values and their RMS aggregate (nats)."""

    per_cell: dict[tuple[str, int, int], float]
    h: float
    weighted: bool
    ref_state: str


@dataclass(frozen=True)
class CeiReport:
    """Contextual evidence interaction at one grid cell (nats)."""

    cei: float
    poe: Belief
    two_sided: Belief
    radii_used: tuple[int, int]


def default_ref_state(field: BeliefField) -> str:
    """Most probable state under the smallest-radius cell, ties lexicographic.

    The support is ordered (candidates sorted, tail last) so ``argmax``
    already resolves ties toward the lexicographically smallest state.
    """
    probs = field.grid[(0, 0)].probs
    return field.support.states[int(np.argmax(probs))]


def log_odds(field: BeliefField, ref_state: str) -> np.ndarray:
    """Log-odds field u[s, li, ri] = log(mu(li,ri)(s) / mu(li,ri)(ref)).

    Indexed by state position in the support and by *grid indices* into
    the radius list. Requires a strictly positive (smoothed) field.
    """
    ref = field.support.index(ref_state)
    grid = field.grid_array()
    if np.any(grid[:, :, ref] <= 0):
        raise DegenerateReference(f"reference state {ref_state!r} has zero probability")
    if np.any(grid <= 0):
        raise InvalidInput("field has zero entries; smooth it before taking log-odds")
    u = np.log(grid) - np.log(grid[:, :, ref])[:, :, None]
    return np.moveaxis(u, 2, 0)


def holonomy(field: BeliefField, ref_state: str | None = None, weighted: bool = True) -> HolonomyReport:
    """Unit-square holonomy on the grid and its per-slot RMS magnitude.

    Non-uniform radius grids are used through their positions, so a unit
    square is a step of one grid *index* on each axis. When ``weighted``,
    state weights are proportional to mu(L+1, R+1) and normalized over
    states; otherwise each state weighs 1/|S|.
    """
    if field.n_radii < 2:
        raise InvalidInput("holonomy needs at least two radii per axis")
    if ref_state is None:
        ref_state = default_ref_state(field)
    u = log_odds(field, ref_state)
    omega = u[:, 1:, 1:] - u[:, 1:, :-1] - u[:, :-1, 1:] + u[:, :-1, :-1]

    n_states = len(field.support)
    if weighted:
        grid = field.grid_array()
        w = np.moveaxis(grid[1:, 1:, :], 2, 0)
        w = w / w.sum(axis=0, keepdims=True)
    else:
        w = np.full_like(omega, 1.0 / n_states)

    n_cells = omega.shape[1] * omega.shape[2]
    h = float(np.sqrt(np.sum(w * omega**2) / n_cells))

    per_cell = {
        (field.support.states[s], li, ri): float(omega[s, li, ri])
        for s in range(n_states)
        for li in range(omega.shape[1])
        for ri in range(omega.shape[2])
    }
    return HolonomyReport(per_cell=per_cell, h=h, weighted=weighted, ref_state=ref_state)


def poe_reconstruct(left_only: Belief, right_only: Belief, base: Belief) -> Belief:
    """Product-of-experts reconstruction: proportional to left*right/base."""
    if not (left_only.support.states == right_only.support.states == base.support.states):
        raise InvalidInput("PoE requires a shared support")
    if np.any(base.probs == 0):
        raise DegenerateReference("base belief has a zero entry")
    if np.any(left_only.probs == 0) or np.any(right_only.probs == 0):
        raise InvalidInput("one-sided beliefs must be strictly positive")
    raw = left_only.probs * right_only.probs / base.probs
    return Belief(base.support, raw / raw.sum())


def cei(field: BeliefField, L_index: int | None = None, R_index: int | None = None) -> CeiReport:
    """CEI of the two-sided cell (L,R) against its PoE reconstruction.

    Defaults to the maximal grid indices on both axes.
    """
    top = field.n_radii - 1
    li = top if L_index is None else L_index
    ri = top if R_index is None else R_index
    for key in ((li, 0), (0, ri), (0, 0), (li, ri)):
        if key not in field.grid:
            raise InvalidInput(f"grid cell {key} missing")
    poe = poe_reconstruct(field.grid[(li, 0)], field.grid[(0, ri)], field.grid[(0, 0)])
    two_sided = field.grid[(li, ri)]
    return CeiReport(
        cei=kl(two_sided, poe),
        poe=poe,
        two_sided=two_sided,
        radii_used=(field.radii[li], field.radii[ri]),
    )


def _check_window(seq: Sequence, slot: int, radius: int) -> None:
    if radius < 0:
        raise InvalidInput(f"radius must be >= 0, got {radius}")
    if slot < 0 or slot >= len(seq):
        raise InvalidInput(f"slot {slot} outside sequence of length {len(seq)}")
    if slot + 1 + radius > len(seq):
        raise InvalidInput(
            f"right window [{slot + 1}, {slot + radius}] out of bounds for length {len(seq)}"
        )


def suffix_swap(
    seq_a: Sequence,
    seq_b: Sequence,
    slot_a: int,
    slot_b: int,
    radius: int,
) -> tuple[list, list]:
    """Exchange the right-context windows of two slots; everything else fixed."""
    _check_window(seq_a, slot_a, radius)
    _check_window(seq_b, slot_b, radius)
    out_a = list(seq_a)
    out_b = list(seq_b)
    wa = out_a[slot_a + 1 : slot_a + 1 + radius]
    wb = out_b[slot_b + 1 : slot_b + 1 + radius]
    out_a[slot_a + 1 : slot_a + 1 + radius] = wb
    out_b[slot_b + 1 : slot_b + 1 + radius] = wa
    return out_a, out_b


def local_shuffle(seq: Sequence, slot: int, radius: int, seed: int) -> list:
    """Permute the right-context window with a seeded PCG64 permutation.

    The generator is numpy's PCG64 (a published, portable algorithm), so a
    given (window length, seed) pair always yields the same permutation.
    The window multiset is preserved exactly.
    """
    _check_window(seq, slot, radius)
    out = list(seq)
    window = out[slot + 1 : slot + 1 + radius]
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(len(window))
    out[slot + 1 : slot + 1 + radius] = [window[i] for i in perm]
    return out


def derive_slot_seed(master_seed: int, slot_id: str) -> int:
    """Per-slot RNG stream: first 8 bytes of SHA-256("textcurv:<seed>:<slot_id>")."""
    payload = f"textcurv:{master_seed}:{slot_id}".encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big")
