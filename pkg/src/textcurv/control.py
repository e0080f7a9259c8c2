"""Inference-time controllers driven by a curvature field.

Budgeted pruning keeps the highest-scoring spans (mean weighted
curvature magnitude) under a token budget, optionally pulling in guard
neighbors so short bridging spans next to a pivot are not deleted.
Retrieval routing turns summed fan-out mass into a clipped retrieval
budget, cuts documents into curvature-aligned chunks, and extracts
anchor windows around the strongest fan-out slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InvalidInput
from .texture import CurvatureField

SENTENCE_PUNCTUATION = frozenset({".", "!", "?", ";"})
FALLBACK_BLOCK = 64


@dataclass(frozen=True)
class SpanPartition:
    """Ordered half-open token spans covering [0, n) without overlap."""

    spans: tuple[tuple[int, int], ...]
    kind: str

    def __post_init__(self):
        if self.kind not in ("sentence", "fixed_block"):
            raise InvalidInput(f"unknown partition kind {self.kind!r}")
        cursor = 0
        for start, end in self.spans:
            if start != cursor or start >= end:
                raise InvalidInput("spans must tile [0, n) contiguously with start < end")
            cursor = end

    @property
    def length(self) -> int:
        return self.spans[-1][1] if self.spans else 0


@dataclass(frozen=True)
class PrunePlan:
    """Outcome of budgeted span selection."""

    selected: tuple[int, ...]
    total_tokens: int
    scores: tuple[float, ...]


@dataclass(frozen=True)
class RoutePlan:
    """Outcome of retrieval routing."""

    fanout_mass: float
    k: int
    saturated: bool
    chunks: tuple[tuple[str, int, int], ...]
    anchors: tuple[tuple[int, int], ...]
    full_context: bool


def fixed_partition(length: int, block: int = FALLBACK_BLOCK) -> SpanPartition:
    """Blocks of ``block`` tokens; the last block may be shorter."""
    if length < 1 or block < 1:
        raise InvalidInput("length and block must be >= 1")
    spans = tuple((s, min(s + block, length)) for s in range(0, length, block))
    return SpanPartition(spans, "fixed_block")


def sentence_partition(
    tokens: Sequence[str],
    punctuation: frozenset[str] = SENTENCE_PUNCTUATION,
    fallback_block: int = FALLBACK_BLOCK,
) -> SpanPartition:
    """Split after sentence-final punctuation tokens.

    Stretches of more than 2 * fallback_block tokens without punctuation
    are cut into fixed blocks of ``fallback_block`` so pathological input
    still yields usable spans.
    """
    if not tokens:
        raise InvalidInput("cannot partition an empty token sequence")
    spans: list[tuple[int, int]] = []
    start = 0
    for i, tok in enumerate(tokens):
        if tok in punctuation:
            spans.append((start, i + 1))
            start = i + 1
    if start < len(tokens):
        spans.append((start, len(tokens)))
    final: list[tuple[int, int]] = []
    for s, e in spans:
        if e - s > 2 * fallback_block:
            final.extend((b, min(b + fallback_block, e)) for b in range(s, e, fallback_block))
        else:
            final.append((s, e))
    return SpanPartition(tuple(final), "sentence")


def span_score(
    field: CurvatureField,
    span: tuple[int, int],
    w_minus: float = 1.0,
    w_plus: float = 1.0,
) -> float:
    """Mean weighted curvature magnitude over a span, via prefix sums."""
    if w_minus < 0 or w_plus < 0:
        raise InvalidInput("span-score weights must be non-negative")
    start, end = span
    if start >= end:
        raise InvalidInput(f"empty span ({start}, {end})")
    if start < 0 or end > field.length:
        raise InvalidInput(f"span ({start}, {end}) outside field of length {field.length}")
    prefix = field.value_prefix_sums(w_minus, w_plus)
    return float(prefix[end] - prefix[start]) / (end - start)


def curv_prune(
    field: CurvatureField,
    partition: SpanPartition,
    budget: int,
    w_minus: float = 1.0,
    w_plus: float = 1.0,
    guard: int = 0,
) -> PrunePlan:
    """Greedy budgeted span selection with guard bands.

    Rule, exactly as executed: score every span; visit spans in
    descending score (ties broken toward the earlier span); a visited
    span is added iff it fits the remaining budget; immediately after
    adding a span, its guard neighbors within index distance <= guard
    are visited in ascending span-index order and each is added iff it
    individually fits (a neighbor that does not fit is skipped without
    rejecting anything else). Selected spans are reported in original
    order and never exceed the budget.
    """
    if budget < 0:
        raise InvalidInput(f"budget must be >= 0, got {budget}")
    if guard < 0:
        raise InvalidInput(f"guard must be >= 0, got {guard}")
    if partition.length > field.length:
        raise InvalidInput("partition extends past the curvature field")
    prefix = field.value_prefix_sums(w_minus, w_plus)
    scores = tuple(
        float(prefix[e] - prefix[s]) / (e - s) for s, e in partition.spans
    )
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    lengths = [e - s for s, e in partition.spans]

    selected: set[int] = set()
    total = 0
    for j in order:
        if j in selected or total + lengths[j] > budget:
            continue
        selected.add(j)
        total += lengths[j]
        for jj in range(max(j - guard, 0), min(j + guard, len(lengths) - 1) + 1):
            if jj == j or jj in selected:
                continue
            if total + lengths[jj] <= budget:
                selected.add(jj)
                total += lengths[jj]
    return PrunePlan(selected=tuple(sorted(selected)), total_tokens=total, scores=scores)


def fanout_mass(field: CurvatureField, eval_positions: Sequence[int]) -> float:
    """Summed positive part of -kappa over the evaluated positions."""
    if len(eval_positions) == 0:
        raise InvalidInput("fanout_mass needs at least one evaluated position")
    kappas = field.token_kappas()
    total = 0.0
    for p in eval_positions:
        if not (0 <= p < field.length):
            raise InvalidInput(f"position {p} outside field of length {field.length}")
        total += max(-float(kappas[p]), 0.0)
    return total


def routing_map(
    mass: float,
    k_min: int = 2,
    k_max: int = 10,
    alpha: float = 4.0,
) -> tuple[int, bool]:
    """Affine-clipped retrieval budget k = clip(round(k_min + alpha*mass)).

    Rounding is half-up (floor(x + 0.5)) so the map is monotone and
    reproducible across languages. ``saturated`` reports whether the
    rounded pre-clip value reached k_max.
    """
    if k_min > k_max:
        raise InvalidInput(f"k_min {k_min} exceeds k_max {k_max}")
    if alpha < 0:
        raise InvalidInput(f"alpha must be >= 0, got {alpha}")
    raw = k_min + alpha * mass
    if raw >= k_max:
        return k_max, True
    pre = int(math.floor(raw + 0.5))
    saturated = pre >= k_max
    return min(max(pre, k_min), k_max), saturated


def _pivot_indices(kappas, window: int) -> list[int]:
    n = len(kappas)
    mag = [abs(float(k)) for k in kappas]
    pivots: set[int] = set()
    for i in range(n):
        lo = max(i - window, 0)
        hi = min(i + window, n - 1)
        if all(mag[i] > mag[j] for j in range(lo, hi + 1) if j != i):
            pivots.add(i)
    for i in range(n - 1):
        if float(kappas[i]) * float(kappas[i + 1]) < 0:
            pivots.add(i + 1)
    return sorted(p for p in pivots if 0 < p < n)


def pivot_chunks(
    doc_field: CurvatureField,
    l_min: int = 32,
    l_max: int = 256,
    window: int = 3,
) -> list[tuple[int, int]]:
    """Cut a document at curvature pivots subject to length constraints.

    Pivots are strict local maxima of |kappa| within ``window`` plus the
    right index of every sign change. Scanning left to right: a pivot
    closer than l_min to the previous cut is dropped (merge); a gap over
    l_max is subdivided at stride l_max first. The chunks tile [0, n);
    only the final chunk may fall short of l_min.
    """
    if not (1 <= l_min <= l_max):
        raise InvalidInput(f"need 1 <= l_min <= l_max, got ({l_min}, {l_max})")
    if window < 1:
        raise InvalidInput(f"window must be >= 1, got {window}")
    n = doc_field.length
    kappas = doc_field.token_kappas()
    cuts = [0]
    for p in _pivot_indices(kappas, window):
        while p - cuts[-1] > l_max:
            cuts.append(cuts[-1] + l_max)
        if l_min <= p - cuts[-1]:
            cuts.append(p)
    while n - cuts[-1] > l_max:
        cuts.append(cuts[-1] + l_max)
    return [(cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)] + [(cuts[-1], n)]


def extract_anchors(
    z_field: CurvatureField,
    tokens: Sequence[str],
    m: int = 3,
    window: int = 3,
    punctuation: Iterable[str] = (),
) -> list[tuple[int, int]]:
    """Windows around the top-m fan-out slots, truncated at punctuation.

    Only slots with strictly positive fan-out ([-kappa]_+ > 0) qualify;
    with none, the result is empty. Each selected position p expands to
    [p - window, p + window + 1), clipped at the sequence ends and cut
    back to exclude the nearest punctuation token on either side.
    Overlapping ranges are merged.
    """
    if m < 1:
        raise InvalidInput(f"m must be >= 1, got {m}")
    if len(tokens) != z_field.length:
        raise InvalidInput("token sequence length does not match the field")
    if not z_field.positions:
        raise InvalidInput("field has no evaluated positions")
    punct = set(punctuation)
    kappas = z_field.token_kappas()
    fan = [(max(-float(kappas[p]), 0.0), p) for p in z_field.positions]
    ranked = sorted(((v, p) for v, p in fan if v > 0), key=lambda vp: (-vp[0], vp[1]))

    ranges: list[tuple[int, int]] = []
    for _, p in ranked[:m]:
        start = max(p - window, 0)
        end = min(p + window + 1, len(tokens))
        for q in range(p - 1, start - 1, -1):
            if tokens[q] in punct:
                start = q + 1
                break
        for q in range(p + 1, end):
            if tokens[q] in punct:
                end = q
                break
        ranges.append((start, end))

    ranges.sort()
    merged: list[tuple[int, int]] = []
    for start, end in ranges:
        if merged and start < merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged
