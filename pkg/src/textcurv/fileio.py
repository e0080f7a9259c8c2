"""Canonical file formats: belief fields, curvature fields, tokens, CSV.

Belief-field files are UTF-8 JSON (schema_version 1). Grid cells are
keyed by "L,R" strings over radius *values*; in memory the grid is keyed
by radius indices. Probabilities are decimal numbers; the loader checks
normalization at 1e-6 and then renormalizes exactly, so files rounded to
9 significant digits by producers load cleanly.
"""

from __future__ import annotations

import hashlib
import io
import json
import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .beliefs import Belief, BeliefField, SlotSupport
from .errors import SchemaError, ValidationError
from .texture import CurvatureField, SlotCurvature, estimate_field

SCHEMA_VERSION = 1
NORMALIZATION_TOL = 1e-6


def sha256_of_file(path: str | Path) -> str:
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return f"sha256:{digest}"


def fmt_float(x: float) -> str:
    """Fixed CSV float format: 9 significant digits."""
    return format(float(x), ".9g")


def _as_json(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected a JSON object at top level")
    return doc


def _prob_vector(raw, size: int, slot_id: str, path: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 1 or len(arr) != size:
        raise ValidationError(f"expected {size} probabilities", slot_id=slot_id, path=path)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValidationError(
            "probabilities must be finite and non-negative", slot_id=slot_id, path=path
        )
    total = float(arr.sum())
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ValidationError(
            f"probabilities sum to {total!r}, outside 1 +/- {NORMALIZATION_TOL}",
            slot_id=slot_id,
            path=path,
        )
    return arr / total


def _parse_slot(rec: dict, index: int) -> BeliefField:
    where = f"slots[{index}]"
    slot_id = rec.get("slot_id")
    if not isinstance(slot_id, str) or not slot_id:
        raise ValidationError("missing or empty slot_id", path=where)
    position = rec.get("position")
    if not isinstance(position, int) or position < 0:
        raise ValidationError("position must be a non-negative integer",
                              slot_id=slot_id, path=f"{where}.position")
    states = rec.get("states")
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        raise ValidationError("states must be a list of strings",
                              slot_id=slot_id, path=f"{where}.states")
    try:
        support = SlotSupport(tuple(states))
    except ValidationError as exc:
        raise ValidationError(str(exc), slot_id=slot_id, path=f"{where}.states") from None

    radii = rec.get("radii")
    if not isinstance(radii, list) or not all(isinstance(r, int) for r in radii):
        raise ValidationError("radii must be a list of integers",
                              slot_id=slot_id, path=f"{where}.radii")
    radii = tuple(radii)
    value_to_index = {r: i for i, r in enumerate(radii)}

    raw_grid = rec.get("grid")
    if not isinstance(raw_grid, dict):
        raise ValidationError("grid must be an object keyed by 'L,R' radius values",
                              slot_id=slot_id, path=f"{where}.grid")
    n = len(support)
    grid: dict[tuple[int, int], Belief] = {}
    for key, raw in raw_grid.items():
        parts = key.split(",")
        try:
            lv, rv = int(parts[0]), int(parts[1])
        except (ValueError, IndexError):
            raise ValidationError(f"bad grid key {key!r}", slot_id=slot_id,
                                  path=f"{where}.grid") from None
        if lv not in value_to_index or rv not in value_to_index:
            raise ValidationError(f"grid key {key!r} uses a radius not in radii",
                                  slot_id=slot_id, path=f"{where}.grid")
        probs = _prob_vector(raw, n, slot_id, f"{where}.grid[{key}]")
        grid[(value_to_index[lv], value_to_index[rv])] = Belief(support, probs)

    left = Belief(support, _prob_vector(rec.get("left_boundary"), n, slot_id,
                                        f"{where}.left_boundary"))
    right = Belief(support, _prob_vector(rec.get("right_boundary"), n, slot_id,
                                         f"{where}.right_boundary"))

    embeddings = None
    if rec.get("embeddings") is not None:
        raw_emb = rec["embeddings"]
        if not isinstance(raw_emb, dict):
            raise ValidationError("embeddings must be an object",
                                  slot_id=slot_id, path=f"{where}.embeddings")
        embeddings = {s: np.asarray(v, dtype=np.float64) for s, v in raw_emb.items()}

    condition = rec.get("condition", "real")
    if not isinstance(condition, str):
        raise ValidationError("condition must be a string",
                              slot_id=slot_id, path=f"{where}.condition")

    field = BeliefField(
        slot_id=slot_id,
        position=position,
        support=support,
        radii=radii,
        grid=grid,
        left_boundary=left,
        right_boundary=right,
        embeddings=embeddings,
        condition=condition,
    )
    field.validate()
    return field


def load_belief_field(path: str | Path) -> list[BeliefField]:
    """Load and validate a belief-field file."""
    doc = _as_json(path)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: unrecognized schema_version {doc.get('schema_version')!r}"
        )
    slots = doc.get("slots")
    if not isinstance(slots, list):
        raise SchemaError(f"{path}: 'slots' must be a list")
    fields = []
    seen: set[str] = set()
    for i, rec in enumerate(slots):
        if not isinstance(rec, dict):
            raise ValidationError("slot record must be an object", path=f"slots[{i}]")
        field = _parse_slot(rec, i)
        if field.slot_id in seen:
            raise ValidationError("duplicate slot_id", slot_id=field.slot_id)
        seen.add(field.slot_id)
        fields.append(field)
    return fields


def belief_field_record(field: BeliefField) -> dict:
    rec = {
        "slot_id": field.slot_id,
        "position": field.position,
        "condition": field.condition,
        "states": list(field.support.states),
        "radii": list(field.radii),
        "grid": {
            f"{field.radii[li]},{field.radii[ri]}": [float(p) for p in field.grid[(li, ri)].probs]
            for li in range(field.n_radii)
            for ri in range(field.n_radii)
        },
        "left_boundary": [float(p) for p in field.left_boundary.probs],
        "right_boundary": [float(p) for p in field.right_boundary.probs],
    }
    if field.embeddings is not None:
        rec["embeddings"] = {s: [float(x) for x in v] for s, v in field.embeddings.items()}
    return rec


def save_belief_field(fields: Sequence[BeliefField], path: str | Path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "slots": [belief_field_record(f) for f in fields],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def save_curvature_field(
    path: str | Path,
    slots: Sequence[SlotCurvature],
    length: int,
    interpolation: str,
    meta: Mapping | None = None,
    doc_id: str | None = None,
) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "curvature_field",
        "length": length,
        "interpolation": interpolation,
        "slots": [
            {
                "slot_id": s.slot_id,
                "position": s.position,
                "kappa": float(s.kappa),
                "gap": float(s.gap),
                "energy": float(s.energy),
                "low_energy": bool(s.low_energy),
                "iterations": int(s.iterations),
            }
            for s in sorted(slots, key=lambda s: s.position)
        ],
    }
    if doc_id is not None:
        doc["doc_id"] = doc_id
    if meta:
        doc.update(meta)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def load_curvature_field(path: str | Path) -> tuple[CurvatureField, dict]:
    doc = _as_json(path)
    if doc.get("schema_version") != SCHEMA_VERSION or doc.get("kind") != "curvature_field":
        raise SchemaError(f"{path}: not a curvature_field file")
    slots = [
        SlotCurvature(
            slot_id=rec.get("slot_id", ""),
            position=int(rec["position"]),
            kappa=float(rec["kappa"]),
            gap=float(rec.get("gap", 0.0)),
            energy=float(rec.get("energy", 0.0)),
            midpoint=None,
            low_energy=bool(rec.get("low_energy", False)),
            iterations=int(rec.get("iterations", 0)),
        )
        for rec in doc.get("slots", [])
    ]
    field = estimate_field(slots, int(doc["length"]), doc.get("interpolation", "nearest"))
    return field, doc


def load_tokens(path: str | Path) -> list[str]:
    """Token stream: .json files carry {"tokens": [...]}; others split on whitespace."""
    p = Path(path)
    if p.suffix == ".json":
        doc = _as_json(p)
        tokens = doc.get("tokens")
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise SchemaError(f"{path}: 'tokens' must be a list of strings")
        return tokens
    return p.read_text(encoding="utf-8").split()


def write_csv(
    path: str | Path,
    comments: Mapping[str, str],
    columns: Sequence[str],
    rows: Iterable[Sequence],
) -> None:
    """CSV with '#'-prefixed metadata lines, fixed columns, '\\n' endings."""
    buf = io.StringIO()
    for key, value in comments.items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path: str | Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Inverse of :func:`write_csv`: returns (comments, row dicts)."""
    comments: dict[str, str] = {}
    body: list[str] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            comments[key] = value
        else:
            body.append(line)
    reader = csv.DictReader(body)
    return comments, list(reader)
