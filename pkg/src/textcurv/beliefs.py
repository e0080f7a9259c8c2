"""Core probabilistic objects: slot supports, beliefs, KL, smoothing.

A *slot* is a position in a token sequence viewed as (prefix, blank,
suffix). Its state space is a finite candidate set plus a reserved tail
bucket that absorbs the probability mass left outside the truncated
candidates, so that every belief about the slot lives on one fixed,
deterministically ordered support.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DivergenceInfinite,
    InvalidInput,
    MassOverflow,
    ValidationError,
)

TAIL = "<TAIL>"

# Tolerances shared by constructors and validators.
SUM_TOL = 1e-9
RESIDUAL_TOL = 1e-9


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SlotSupport:
    """Ordered slot-local state list: sorted candidates, then the tail bucket.

    The ordering is deterministic by construction (candidates sorted
    lexicographically, tail always last), so probability vectors indexed
    against a support are comparable across producers and languages.
    """

    states: tuple[str, ...]

    def __post_init__(self):
        if len(self.states) < 1 or self.states[-1] != TAIL:
            raise ValidationError(f"support must end with the reserved tail state {TAIL!r}")
        candidates = self.states[:-1]
        if TAIL in candidates:
            raise ValidationError(f"{TAIL!r} is reserved and cannot be a candidate")
        if len(set(candidates)) != len(candidates):
            raise ValidationError("duplicate state identifiers in support")
        if list(candidates) != sorted(candidates):
            raise ValidationError("candidate states must be sorted lexicographically")

    @property
    def tail_index(self) -> int:
        return len(self.states) - 1

    @property
    def candidates(self) -> tuple[str, ...]:
        return self.states[:-1]

    def __len__(self) -> int:
        return len(self.states)

    def index(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise InvalidInput(f"state {state!r} not in support") from None


@dataclass(frozen=True)
class Belief:
    """A probability vector over a :class:`SlotSupport`."""

    support: SlotSupport
    probs: np.ndarray

    def __post_init__(self):
        probs = _freeze(self.probs)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or len(probs) != len(self.support):
            raise ValidationError("belief length does not match support size")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValidationError("belief entries must be finite and non-negative")
        if abs(float(probs.sum()) - 1.0) > SUM_TOL:
            raise ValidationError(f"belief mass {probs.sum()!r} not within {SUM_TOL} of 1")

    def __getitem__(self, state: str) -> float:
        return float(self.probs[self.support.index(state)])


def uniform(support: SlotSupport) -> Belief:
    n = len(support)
    return Belief(support, np.full(n, 1.0 / n))


def build_support(
    left_topk: Sequence[tuple[str, float]],
    right_topk: Sequence[tuple[str, float]],
    k: int,
) -> SlotSupport:
    """Union of the top-k states from each side, plus the tail bucket.

    Ties at the top-k boundary are broken by lexicographic state order,
    which makes the selection deterministic and insensitive to how the
    caller ordered equal-probability entries.
    """
    if k < 1:
        raise InvalidInput(f"k must be >= 1, got {k}")
    chosen: set[str] = set()
    for side in (left_topk, right_topk):
        states = [s for s, _ in side]
        if len(set(states)) != len(states):
            raise InvalidInput("duplicate state within one top-k list")
        for s, p in side:
            if s == TAIL:
                raise InvalidInput(f"{TAIL!r} cannot appear in a top-k list")
            if not (0.0 <= p <= 1.0):
                raise InvalidInput(f"probability {p} for {s!r} outside [0, 1]")
        ranked = sorted(side, key=lambda sp: (-sp[1], sp[0]))
        chosen.update(s for s, _ in ranked[:k])
    return SlotSupport(tuple(sorted(chosen)) + (TAIL,))


def pushforward_tail(raw: Sequence[tuple[str, float]], support: SlotSupport) -> Belief:
    """Project raw (state, prob) pairs onto the support, leftover mass to tail.

    A residual in [-1e-9, 0) is treated as producer rounding: the tail is
    clamped to zero and the vector renormalized.
    """
    probs = np.zeros(len(support))
    seen: set[str] = set()
    for s, p in raw:
        if s == TAIL:
            raise InvalidInput(f"{TAIL!r} may not be assigned mass directly")
        if s in seen:
            raise InvalidInput(f"duplicate raw state {s!r}")
        if p < 0:
            raise InvalidInput(f"negative probability {p} for {s!r}")
        seen.add(s)
        probs[support.index(s)] = p
    residual = 1.0 - float(probs.sum())
    if residual < -RESIDUAL_TOL:
        raise MassOverflow(f"raw mass exceeds 1 by {-residual:.3e}")
    if residual < 0.0:
        probs /= probs.sum()
    else:
        probs[support.tail_index] = residual
    return Belief(support, probs)


def smooth(b: Belief, delta: float) -> Belief:
    """Mix with the uniform distribution: (1 - delta) * b + delta * Unif."""
    if not (0.0 < delta < 1.0):
        raise InvalidInput(f"delta must lie in (0, 1), got {delta}")
    n = len(b.support)
    return Belief(b.support, (1.0 - delta) * b.probs + delta / n)


def kl(mu: Belief, nu: Belief) -> float:
    """Kullback-Leibler divergence in nats, with 0*log(0) := 0."""
    if mu.support.states != nu.support.states:
        raise InvalidInput("KL requires a shared support")
    p = mu.probs
    q = nu.probs
    mask = p > 0
    if np.any(q[mask] == 0):
        raise DivergenceInfinite("absolute continuity violated: nu(s)=0 but mu(s)>0")
    total = float(np.sum(p[mask] * np.log(p[mask] / q[mask])))
    return max(total, 0.0)


@dataclass(frozen=True)
class BeliefField:
    """Per-slot grid of two-sided beliefs over a context-radius grid.

    ``grid`` is keyed by *(left index, right index)* into ``radii``; the
    canonical file format keys cells by radius values instead, and the
    loader translates. ``left_boundary``/``right_boundary`` are the
    one-sided beliefs at the largest radius.
    """

    slot_id: str
    position: int
    support: SlotSupport
    radii: tuple[int, ...]
    grid: Mapping[tuple[int, int], Belief]
    left_boundary: Belief
    right_boundary: Belief
    embeddings: Mapping[str, np.ndarray] | None = None
    condition: str = "real"

    def __post_init__(self):
        if self.embeddings is not None:
            frozen = {s: _freeze(v) for s, v in self.embeddings.items()}
            object.__setattr__(self, "embeddings", frozen)

    @property
    def n_radii(self) -> int:
        return len(self.radii)

    def belief_at(self, li: int, ri: int) -> Belief:
        return self.grid[(li, ri)]

    def grid_array(self) -> np.ndarray:
        """Dense (n_radii, n_radii, n_states) probability tensor."""
        m = self.n_radii
        out = np.empty((m, m, len(self.support)))
        for li in range(m):
            for ri in range(m):
                out[li, ri] = self.grid[(li, ri)].probs
        return out

    def smoothed(self, delta: float) -> "BeliefField":
        """Return a copy with every belief (grid and boundaries) smoothed."""
        return BeliefField(
            slot_id=self.slot_id,
            position=self.position,
            support=self.support,
            radii=self.radii,
            grid={key: smooth(b, delta) for key, b in self.grid.items()},
            left_boundary=smooth(self.left_boundary, delta),
            right_boundary=smooth(self.right_boundary, delta),
            embeddings=self.embeddings,
            condition=self.condition,
        )

    def validate(self) -> None:
        """Check structural invariants, raising ValidationError on failure."""
        sid = self.slot_id
        if self.position < 0:
            raise ValidationError("position must be >= 0", slot_id=sid, path="position")
        if len(self.radii) < 1:
            raise ValidationError("radii list is empty", slot_id=sid, path="radii")
        if list(self.radii) != sorted(set(self.radii)) or any(r < 0 for r in self.radii):
            raise ValidationError(
                "radii must be strictly increasing non-negative integers",
                slot_id=sid,
                path="radii",
            )
        m = self.n_radii
        expected = {(li, ri) for li in range(m) for ri in range(m)}
        if set(self.grid.keys()) != expected:
            raise ValidationError(
                f"grid incomplete: expected {m}x{m} cells, got {len(self.grid)}",
                slot_id=sid,
                path="grid",
            )
        for key, belief in self.grid.items():
            if belief.support.states != self.support.states:
                raise ValidationError(
                    "grid belief on a different support",
                    slot_id=sid,
                    path=f"grid[{key}]",
                )
        for name, boundary in (("left_boundary", self.left_boundary),
                               ("right_boundary", self.right_boundary)):
            if boundary.support.states != self.support.states:
                raise ValidationError(
                    "boundary belief on a different support", slot_id=sid, path=name
                )
        if 0 in self.radii:
            zero = self.radii.index(0)
            top = m - 1
            pairs = (
                ("left_boundary", self.left_boundary, self.grid[(top, zero)]),
                ("right_boundary", self.right_boundary, self.grid[(zero, top)]),
            )
            for name, boundary, cell in pairs:
                if np.max(np.abs(boundary.probs - cell.probs)) > SUM_TOL:
                    raise ValidationError(
                        "boundary belief disagrees with its one-sided grid cell",
                        slot_id=sid,
                        path=name,
                    )
        if self.embeddings is not None:
            dims = set()
            for s, vec in self.embeddings.items():
                if s not in self.support.candidates:
                    raise ValidationError(
                        f"embedding for unknown state {s!r}", slot_id=sid, path="embeddings"
                    )
                if vec.ndim != 1 or not np.all(np.isfinite(vec)):
                    raise ValidationError(
                        f"embedding for {s!r} must be a finite vector",
                        slot_id=sid,
                        path="embeddings",
                    )
                dims.add(len(vec))
            if len(dims) > 1:
                raise ValidationError(
                    "embedding vectors have mixed dimensions", slot_id=sid, path="embeddings"
                )
