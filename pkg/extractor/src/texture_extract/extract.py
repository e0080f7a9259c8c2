"""Extraction pipeline: corpus slots -> canonical belief-field files.

For every sampled slot the oracle is queried over the full radius grid
of truncated contexts; supports are the union of the top-k candidates
from each one-sided boundary query plus the tail bucket, and residual
mass outside the candidates is pushed to the tail. Control conditions
(suffix-swap, local-shuffle) transform the right windows with seeded
permutations before any querying, so files for all conditions share
slot positions and ids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import load_corpus, sample_slots
from .oracles import HFMaskedOracle, QueryResult, build_oracle
from .transforms import derive_slot_seed, pair_slots, shuffle_window

TAIL = "<TAIL>"
CONDITIONS = ("real", "swap", "shuffle")
DEFAULT_GRID = (0, 1, 2, 4, 8)


@dataclass(frozen=True)
class ExtractionJob:
    """One deterministic extraction run."""

    corpus: str
    model: str = "counts"
    slots: int = 200
    grid: tuple[int, ...] = DEFAULT_GRID
    k: int = 20
    seed: int = 0
    condition: str = "real"

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise ValueError(f"condition must be one of {CONDITIONS}")
        if self.k < 1 or self.slots < 1:
            raise ValueError("k and slots must be >= 1")
        if tuple(sorted(set(self.grid))) != tuple(self.grid):
            raise ValueError("grid radii must be strictly increasing")


def _round_sig(x: float) -> float:
    return float(f"{x:.9g}")


def _cell_vector(dist: QueryResult, cand_ids: list[int]) -> list[float]:
    raw = [max(float(dist.probs[i]), 0.0) for i in cand_ids]
    tail = max(1.0 - sum(raw), 0.0)
    vec = raw + [tail]
    total = sum(vec)
    return [_round_sig(v / total) for v in vec]


def _slot_record(
    oracle,
    vocab_index: dict[str, int],
    position: int,
    left_full: list[str],
    right_full: list[str],
    grid: tuple[int, ...],
    k: int,
    condition: str,
) -> dict:
    left_dist = oracle.query(left_full, [])
    right_dist = oracle.query([], right_full)
    chosen: set[str] = set()
    for dist in (left_dist, right_dist):
        chosen.update(s for s, _ in dist.top_k(k) if s != TAIL)
    candidates = sorted(chosen)
    cand_ids = [vocab_index[s] for s in candidates]

    cells: dict[str, list[float]] = {}
    for lv in grid:
        left_ctx = left_full[len(left_full) - lv :] if lv else []
        for rv in grid:
            right_ctx = right_full[:rv]
            dist = oracle.query(left_ctx, right_ctx)
            cells[f"{lv},{rv}"] = _cell_vector(dist, cand_ids)

    top = max(grid)
    zero = min(grid)
    record = {
        "slot_id": f"pos{position:08d}",
        "position": position,
        "condition": condition,
        "states": candidates + [TAIL],
        "radii": list(grid),
        "grid": cells,
        "left_boundary": cells[f"{top},{zero}"],
        "right_boundary": cells[f"{zero},{top}"],
    }
    embeddings = oracle.embeddings(candidates)
    if embeddings:
        record["embeddings"] = {s: [float(x) for x in v] for s, v in embeddings.items()}
    return record


def extract(job: ExtractionJob) -> dict:
    """Run a job and return the belief-field document (schema_version 1)."""
    text = Path(job.corpus).read_text(encoding="utf-8")
    simple_tokens = load_corpus(job.corpus)
    oracle = build_oracle(job.model, simple_tokens)
    tokens = (
        oracle.tokenize_corpus(text) if isinstance(oracle, HFMaskedOracle) else simple_tokens
    )
    vocab_index = {w: i for i, w in enumerate(oracle.vocab)}

    max_radius = max(job.grid)
    positions = sample_slots(len(tokens), job.slots, max_radius, job.seed)

    real_right = {
        p: list(tokens[p + 1 : p + 1 + max_radius]) for p in positions
    }
    swap_map = pair_slots(positions, job.seed) if job.condition == "swap" else {}

    records = []
    for p in positions:
        slot_id = f"pos{p:08d}"
        left_full = list(tokens[p - max_radius : p])
        right_full = real_right[p]
        if job.condition == "shuffle":
            right_full = shuffle_window(right_full, derive_slot_seed(job.seed, slot_id))
        elif job.condition == "swap":
            right_full = real_right[swap_map[p]]
        records.append(
            _slot_record(
                oracle, vocab_index, p, left_full, right_full, job.grid, job.k,
                job.condition,
            )
        )
    return {"schema_version": 1, "slots": records}


def run_job(job: ExtractionJob, out_path: str | Path) -> int:
    doc = extract(job)
    Path(out_path).write_text(
        json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return len(doc["slots"])
