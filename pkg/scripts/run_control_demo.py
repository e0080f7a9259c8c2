#!/usr/bin/env python3
"""Curvature-guided control demo.

Builds a belief-field file that mixes ordinary slots (embedding-derived
kernels) with conflict slots whose boundary beliefs sit in different
cost clusters (kernel supplied via the cost sidecar). The conflict slots
come out with negative curvature, so the routing controller raises the
retrieval budget and extracts anchors around them, while the pruning
controller keeps the highest-curvature sentence spans.

Usage: python scripts/run_control_demo.py [workdir]
"""

from __future__ import annotations

import dataclasses
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from textcurv import Belief, BeliefField, SlotSupport, SynthSpec, TAIL
from textcurv.cli import main
from textcurv.fileio import save_belief_field
from textcurv.synth import generate

TOKENS = [
    "the", "probe", "returned", "data", ".",
    "its", "orbit", "was", "unstable", ".",
    "engineers", "paused", "the", "detailed", "analysis", ".",
    "they", "requested", "more", "telemetry", "from", "the", "ground", ".",
]
CONFLICT_POSITIONS = (6, 8, 18)


def barbell_cost(cluster: int = 3, within: float = 0.05,
                 bridge: float = 1.0, across: float = 6.0) -> np.ndarray:
    """Two tight clusters joined only through the (low-mass) tail state."""
    n = 2 * cluster + 1
    c = np.full((n, n), across)
    c[:cluster, :cluster] = within
    c[cluster : 2 * cluster, cluster : 2 * cluster] = within
    c[n - 1, :] = bridge
    c[:, n - 1] = bridge
    np.fill_diagonal(c, 0.0)
    return c


def conflict_slot(slot_id: str, position: int, sharpness: float = 7.0) -> BeliefField:
    """Grid whose left side commits to cluster A and right side to cluster B."""
    support = SlotSupport(tuple(f"c{i}" for i in range(6)) + (TAIL,))
    n = len(support)
    radii = (0, 1, 2)
    m = len(radii)
    a = np.zeros(n)
    a[0] = sharpness
    b = np.zeros(n)
    b[3] = sharpness
    grid = {}
    for li in range(m):
        for ri in range(m):
            logits = (li / (m - 1)) * a + (ri / (m - 1)) * b
            p = np.exp(logits - logits.max())
            grid[(li, ri)] = Belief(support, p / p.sum())
    return BeliefField(
        slot_id=slot_id,
        position=position,
        support=support,
        radii=radii,
        grid=grid,
        left_boundary=grid[(m - 1, 0)],
        right_boundary=grid[(0, m - 1)],
    )


def build_inputs(workdir: Path) -> tuple[Path, Path, Path]:
    rng = np.random.default_rng(404)
    fields = []
    sidecar = {}
    conflict_iter = iter(CONFLICT_POSITIONS)
    for i in range(12):
        position = 2 * i
        if position in CONFLICT_POSITIONS:
            f = conflict_slot(f"demo:{i:02d}", position)
            sidecar[f.slot_id] = barbell_cost().tolist()
        else:
            f = generate(
                SynthSpec(kind="random_positive", support_size=5, grid=(0, 1, 2),
                          seed=900 + i),
                slot_id=f"demo:{i:02d}",
                position=position,
            )
            emb = {s: rng.normal(0.0, 1.0, 4) for s in f.support.candidates}
            f = dataclasses.replace(f, embeddings=emb)
        fields.append(f)
    beliefs_path = workdir / "beliefs.json"
    save_belief_field(fields, beliefs_path)

    costs_path = workdir / "costs.json"
    costs_path.write_text(json.dumps(sidecar))

    tokens_path = workdir / "tokens.json"
    tokens_path.write_text(json.dumps({"tokens": TOKENS}))
    return beliefs_path, costs_path, tokens_path


def run(workdir: Path) -> None:
    beliefs_path, costs_path, tokens_path = build_inputs(workdir)
    field_path = workdir / "curvature.json"
    main([
        "texture", "--input", str(beliefs_path),
        "--costs", str(costs_path),
        "--epsilon", "0.4",
        "--out", str(workdir / "texture.csv"),
        "--field-out", str(field_path),
        "--length", str(len(TOKENS)),
    ])

    plan_path = workdir / "prune.json"
    main([
        "prune", "--field", str(field_path), "--tokens", str(tokens_path),
        "--budget", "12", "--guard", "1", "--out", str(plan_path),
    ])
    plan = json.loads(plan_path.read_text())
    kept = [TOKENS[s:e] for s, e in plan["selected_spans"]]
    print("\npruned context:", " ".join(t for span in kept for t in span))

    route_path = workdir / "route.json"
    main([
        "route", "--field", str(field_path), "--tokens", str(tokens_path),
        "--doc-field", str(field_path), "--l-min", "4", "--l-max", "10",
        "--window", "2", "--out", str(route_path),
    ])
    route = json.loads(route_path.read_text())
    print(
        f"routing: fan-out mass {route['fanout_mass']:.3f} -> k={route['k']}"
        f" (saturated={route['saturated']})"
    )
    print("chunks:", [(c[1], c[2]) for c in route["chunks"]])
    print("anchors:", [" ".join(TOKENS[s:e]) for s, e in route["anchors"]])
    print(f"\nartifacts in: {workdir}")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        run(Path(sys.argv[1]))
    else:
        with tempfile.TemporaryDirectory(prefix="textcurv-demo-") as tmp:
            run(Path(tmp))
