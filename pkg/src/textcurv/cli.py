"""Command-line surface: certify, texture, prune, route, synth, validate.

Every run embeds its full configuration and the SHA-256 of each input
file into the output, and outputs are byte-deterministic: slot-level
work is parallelized over TEXTURE_THREADS threads but reduced in a fixed
order, so worker count never changes a byte.

Exit codes: 0 success, 2 validation problem, 3 convergence failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .beliefs import BeliefField, smooth
from .bridge import DEFAULT_MAX_ITER, DEFAULT_TOL
from .certificates import cei, derive_slot_seed, holonomy
from .control import (
    extract_anchors,
    curv_prune,
    fanout_mass,
    fixed_partition,
    pivot_chunks,
    routing_map,
    sentence_partition,
)
from .errors import (
    ConvergenceFailure,
    InvalidInput,
    SchemaError,
    TextcurvError,
    ValidationError,
)
from .fileio import (
    fmt_float,
    load_belief_field,
    load_curvature_field,
    load_tokens,
    save_belief_field,
    save_curvature_field,
    sha256_of_file,
    write_csv,
)
from .kernel import CostMatrix, build_kernel, cost_from_embeddings, default_epsilon, tail_geometry
from .synth import KINDS, SynthSpec, generate
from .texture import (
    DEFAULT_EPS0,
    INTERPOLATIONS,
    estimate_field,
    texture_slot,
)

DEFAULT_DELTA = 1e-6
DEFAULT_BOOTSTRAP = 1000


def _threads() -> int:
    raw = os.environ.get("TEXTURE_THREADS", "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        return 1


def _thread_map(fn, items):
    """Order-preserving map; TEXTURE_THREADS caps parallelism."""
    items = list(items)
    workers = _threads()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _config_json(args: argparse.Namespace, skip=("func",)) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return json.dumps(cfg, sort_keys=True, default=str)


def _maybe_smooth_field(field: BeliefField, delta: float) -> BeliefField:
    """Smooth a slot only when it actually contains zero probabilities."""
    cells = list(field.grid.values()) + [field.left_boundary, field.right_boundary]
    if any(float(b.probs.min()) == 0.0 for b in cells):
        return field.smoothed(delta)
    return field


def _maybe_smooth_belief(b, delta: float):
    return smooth(b, delta) if float(b.probs.min()) == 0.0 else b


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------


def _bootstrap_median_deltas(
    real: np.ndarray, ctrl: np.ndarray, n_resamples: int, seed: int, paired: bool
) -> tuple[float, float]:
    """95% bootstrap CI for median(real) - median(ctrl)."""
    rng = np.random.default_rng(seed)
    if paired:
        idx = rng.integers(0, len(real), size=(n_resamples, len(real)))
        deltas = np.median(real[idx], axis=1) - np.median(ctrl[idx], axis=1)
    else:
        ridx = rng.integers(0, len(real), size=(n_resamples, len(real)))
        cidx = rng.integers(0, len(ctrl), size=(n_resamples, len(ctrl)))
        deltas = np.median(real[ridx], axis=1) - np.median(ctrl[cidx], axis=1)
    lo, hi = np.percentile(deltas, [2.5, 97.5])
    return float(lo), float(hi)


def cmd_certify(args: argparse.Namespace) -> int:
    inputs: dict[str, str] = {}
    fields: list[BeliefField] = []
    for cond in ("real", "swap", "shuffle"):
        path = getattr(args, cond)
        if path is None:
            continue
        inputs[path] = sha256_of_file(path)
        for f in load_belief_field(path):
            fields.append(dataclasses.replace(f, condition=cond))
    for path in args.labeled or []:
        inputs[path] = sha256_of_file(path)
        fields.extend(load_belief_field(path))
    if not fields:
        raise InvalidInput("no input fields; pass --real/--swap/--shuffle or --labeled")

    by_condition: dict[str, list[BeliefField]] = {}
    for f in fields:
        by_condition.setdefault(f.condition, []).append(f)
    for cond, group in by_condition.items():
        if len(group) < 2:
            raise InvalidInput(f"condition {cond!r} has fewer than 2 slots")

    ref = None if args.ref_state == "auto" else args.ref_state

    def one(field: BeliefField):
        sm = _maybe_smooth_field(field, args.delta)
        h = holonomy(sm, ref_state=ref, weighted=not args.unweighted).h
        c = cei(sm).cei
        return (field.condition, field.slot_id, h, c)

    results = sorted(_thread_map(one, fields))

    values: dict[str, dict[str, tuple[float, float]]] = {}
    for cond, sid, h, c in results:
        values.setdefault(cond, {})[sid] = (h, c)

    rows: list[list[str]] = [
        ["slot", sid, cond, fmt_float(h), fmt_float(c)] for cond, sid, h, c in results
    ]
    medians = {}
    for cond in sorted(values):
        hs = np.array([hc[0] for hc in values[cond].values()])
        cs = np.array([hc[1] for hc in values[cond].values()])
        medians[cond] = (float(np.median(hs)), float(np.median(cs)))
        rows.append(["median", "", cond, fmt_float(medians[cond][0]), fmt_float(medians[cond][1])])

    if "real" in values:
        real_map = values["real"]
        for cond in sorted(values):
            if cond == "real":
                continue
            ctrl_map = values[cond]
            paired = set(real_map) == set(ctrl_map)
            if paired:
                keys = sorted(real_map)
                real_h = np.array([real_map[k][0] for k in keys])
                real_c = np.array([real_map[k][1] for k in keys])
                ctrl_h = np.array([ctrl_map[k][0] for k in keys])
                ctrl_c = np.array([ctrl_map[k][1] for k in keys])
            else:
                real_h = np.array(sorted(v[0] for v in real_map.values()))
                real_c = np.array(sorted(v[1] for v in real_map.values()))
                ctrl_h = np.array(sorted(v[0] for v in ctrl_map.values()))
                ctrl_c = np.array(sorted(v[1] for v in ctrl_map.values()))
            label = f"real-{cond}"
            dh = medians["real"][0] - medians[cond][0]
            dc = medians["real"][1] - medians[cond][1]
            rows.append(["delta", "", label, fmt_float(dh), fmt_float(dc)])
            lo_h, hi_h = _bootstrap_median_deltas(
                real_h, ctrl_h, args.bootstrap, args.bootstrap_seed, paired
            )
            lo_c, hi_c = _bootstrap_median_deltas(
                real_c, ctrl_c, args.bootstrap, args.bootstrap_seed + 1, paired
            )
            rows.append(["ci_low", "", label, fmt_float(lo_h), fmt_float(lo_c)])
            rows.append(["ci_high", "", label, fmt_float(hi_h), fmt_float(hi_c)])

    write_csv(
        args.out,
        {
            "schema": "textcurv-certify-csv v1",
            "config": _config_json(args),
            "inputs": json.dumps(inputs, sort_keys=True),
        },
        ["row", "slot_id", "condition", "h", "cei"],
        rows,
    )
    print(f"certify: {len(fields)} slots across {len(values)} conditions -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# texture
# ---------------------------------------------------------------------------


def _slot_cost(field: BeliefField, sidecar: dict | None) -> CostMatrix:
    n = len(field.support)
    if sidecar is not None and field.slot_id in sidecar:
        raw = np.asarray(sidecar[field.slot_id], dtype=np.float64)
        if raw.shape == (n, n):
            return CostMatrix(field.support, raw)
        if raw.shape == (n - 1, n - 1):
            full = np.zeros((n, n))
            full[: n - 1, : n - 1] = raw
            return tail_geometry(CostMatrix(field.support, full))
        raise InvalidInput(
            f"cost matrix for slot {field.slot_id!r} has shape {raw.shape}; "
            f"expected {n}x{n} or {n - 1}x{n - 1}"
        )
    if field.embeddings is not None:
        return cost_from_embeddings(field.support, field.embeddings)
    raise InvalidInput("no kernel source: slot has no embeddings and no cost sidecar entry")


def cmd_texture(args: argparse.Namespace) -> int:
    fields = load_belief_field(args.input)
    inputs = {args.input: sha256_of_file(args.input)}
    sidecar = None
    if args.costs:
        sidecar = json.loads(Path(args.costs).read_text(encoding="utf-8"))
        inputs[args.costs] = sha256_of_file(args.costs)

    def one(field: BeliefField):
        try:
            cost = _slot_cost(field, sidecar)
            eps = args.epsilon if args.epsilon is not None else default_epsilon(cost)
            kern = build_kernel(cost, eps, tau=args.tau)
            mu_l = _maybe_smooth_belief(field.left_boundary, args.delta)
            mu_r = _maybe_smooth_belief(field.right_boundary, args.delta)
            sc = texture_slot(
                mu_l,
                mu_r,
                kern,
                eps0=args.eps0,
                slot_id=field.slot_id,
                position=field.position,
                tol=args.tol,
                max_iter=args.max_iter,
            )
            return sc, ""
        except TextcurvError as exc:
            return None, type(exc).__name__

    outcomes = _thread_map(one, fields)
    paired = sorted(zip(fields, outcomes), key=lambda fo: fo[0].slot_id)
    rows = []
    ok_slots = []
    for field, (sc, err) in paired:
        if sc is None:
            rows.append([field.slot_id, str(field.position), "", "", "", "", "", err])
        else:
            ok_slots.append(sc)
            rows.append(
                [
                    sc.slot_id,
                    str(sc.position),
                    fmt_float(sc.kappa),
                    fmt_float(sc.gap),
                    fmt_float(sc.energy),
                    str(sc.iterations),
                    "1" if sc.low_energy else "0",
                    "",
                ]
            )
    write_csv(
        args.out,
        {
            "schema": "textcurv-texture-csv v1",
            "config": _config_json(args),
            "inputs": json.dumps(inputs, sort_keys=True),
        },
        ["slot_id", "position", "kappa", "gap", "energy", "iterations", "low_energy", "error"],
        rows,
    )
    n_err = sum(1 for _, (sc, _e) in paired if sc is None)
    print(f"texture: {len(ok_slots)} slots ok, {n_err} failed -> {args.out}")

    if args.field_out:
        if not ok_slots:
            raise InvalidInput("no successful slots; cannot emit a curvature field")
        length = args.length if args.length is not None else max(s.position for s in ok_slots) + 1
        estimate_field(ok_slots, length, args.interpolation)  # validates positions
        save_curvature_field(
            args.field_out,
            ok_slots,
            length,
            args.interpolation,
            meta={"config": json.loads(_config_json(args)), "inputs": inputs},
        )
        print(f"texture: curvature field -> {args.field_out}")
    return 0


# ---------------------------------------------------------------------------
# prune / route
# ---------------------------------------------------------------------------


def _punctuation_set(raw: str) -> frozenset[str]:
    return frozenset(raw.split()) if raw else frozenset()


def cmd_prune(args: argparse.Namespace) -> int:
    field, _doc = load_curvature_field(args.field)
    tokens = load_tokens(args.tokens)
    if len(tokens) != field.length:
        raise InvalidInput(
            f"token count {len(tokens)} does not match field length {field.length}"
        )
    if args.partition == "sentence":
        partition = sentence_partition(tokens, _punctuation_set(args.punctuation), args.block)
    else:
        partition = fixed_partition(len(tokens), args.block)
    plan = curv_prune(
        field,
        partition,
        args.budget,
        w_minus=args.w_minus,
        w_plus=args.w_plus,
        guard=args.guard,
    )
    doc = {
        "schema_version": 1,
        "kind": "prune_plan",
        "config": json.loads(_config_json(args)),
        "inputs": {
            args.field: sha256_of_file(args.field),
            args.tokens: sha256_of_file(args.tokens),
        },
        "partition": [list(s) for s in partition.spans],
        "scores": [float(s) for s in plan.scores],
        "selected": list(plan.selected),
        "selected_spans": [list(partition.spans[j]) for j in plan.selected],
        "total_tokens": plan.total_tokens,
    }
    Path(args.out).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    print(
        f"prune: kept {len(plan.selected)}/{len(partition.spans)} spans, "
        f"{plan.total_tokens}/{args.budget} tokens -> {args.out}"
    )
    return 0


def cmd_route(args: argparse.Namespace) -> int:
    z_field, _doc = load_curvature_field(args.field)
    tokens = load_tokens(args.tokens)
    if len(tokens) != z_field.length:
        raise InvalidInput(
            f"token count {len(tokens)} does not match field length {z_field.length}"
        )
    mass = fanout_mass(z_field, z_field.positions)
    k, saturated = routing_map(mass, k_min=args.k_min, k_max=args.k_max, alpha=args.alpha)

    inputs = {
        args.field: sha256_of_file(args.field),
        args.tokens: sha256_of_file(args.tokens),
    }
    chunks: list[tuple[str, int, int]] = []
    for path in args.doc_field or []:
        doc_field, doc_meta = load_curvature_field(path)
        inputs[path] = sha256_of_file(path)
        doc_id = doc_meta.get("doc_id") or Path(path).stem
        for start, end in pivot_chunks(doc_field, args.l_min, args.l_max, args.window):
            chunks.append((doc_id, start, end))

    anchors = extract_anchors(
        z_field,
        tokens,
        m=args.anchors,
        window=args.window,
        punctuation=_punctuation_set(args.punctuation),
    )
    doc = {
        "schema_version": 1,
        "kind": "route_plan",
        "config": json.loads(_config_json(args)),
        "inputs": inputs,
        "fanout_mass": float(mass),
        "k": int(k),
        "saturated": bool(saturated),
        "full_context": bool(saturated),
        "chunks": [[d, s, e] for d, s, e in chunks],
        "anchors": [list(a) for a in anchors],
    }
    Path(args.out).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    print(f"route: mass={fmt_float(mass)} k={k} saturated={saturated} -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# synth / validate
# ---------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    grid = tuple(int(r) for r in args.grid.split(","))
    params: dict = {"scale": args.scale}
    if args.kind == "separable" and args.bilinear:
        params["bilinear"] = args.bilinear
        params["bilinear_state"] = args.bilinear_state
    if args.kind == "ci_generative":
        params["obs_size"] = args.obs_size
        params["concentration"] = args.concentration
        params["dependence"] = args.dependence
    fields = []
    for i in range(args.slots):
        slot_id = f"{args.kind}-{i:06d}"
        spec = SynthSpec(
            kind=args.kind,
            support_size=args.support_size,
            grid=grid,
            seed=derive_slot_seed(args.seed, slot_id),
            parameters=params,
        )
        fields.append(generate(spec, slot_id=slot_id, condition=args.condition, position=i))
    save_belief_field(fields, args.out)
    print(f"synth: wrote {len(fields)} {args.kind} slots -> {args.out}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    fields = load_belief_field(args.input)
    if not args.quiet:
        for f in fields:
            print(f"ok {f.slot_id} ({len(f.support)} states, {f.n_radii}x{f.n_radii} grid)")
    print(f"validate: {len(fields)} slots, 0 warnings, schema_version 1 [{args.input}]")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textcurv",
        description="Curvature fields for two-sided text beliefs: certificates, "
        "the bridge-midpoint curvature operator, and curvature-guided controllers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="flatness certificates (holonomy, CEI) with bootstrap summary")
    p.add_argument("--real", help="belief-field file for the real condition")
    p.add_argument("--swap", help="belief-field file for the suffix-swap control")
    p.add_argument("--shuffle", help="belief-field file for the local-shuffle control")
    p.add_argument("--labeled", action="append", help="belief-field file whose slots carry their own condition")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="smoothing mix-in for slots containing zeros")
    p.add_argument("--ref-state", default="auto", help="log-odds reference state (default: argmax at (0,0))")
    p.add_argument("--unweighted", action="store_true", help="uniform state weights in h")
    p.add_argument("--bootstrap", type=int, default=DEFAULT_BOOTSTRAP, help="bootstrap resamples")
    p.add_argument("--bootstrap-seed", type=int, default=0, help="bootstrap RNG seed")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("texture", help="per-slot bridge curvature over a belief-field file")
    p.add_argument("--input", required=True, help="belief-field file")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--field-out", help="also write a curvature-field JSON")
    p.add_argument("--costs", help="JSON sidecar: slot_id -> cost matrix")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="boundary smoothing mix-in when zeros are present")
    p.add_argument("--eps0", type=float, default=DEFAULT_EPS0, help="curvature denominator guard")
    p.add_argument("--epsilon", type=float, default=None, help="kernel temperature (default: median off-diagonal cost)")
    p.add_argument("--tau", type=float, default=0.0, help="affinity floor")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="bridge marginal tolerance")
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER, help="bridge iteration cap")
    p.add_argument("--length", type=int, default=None, help="token count for the curvature field")
    p.add_argument("--interpolation", choices=INTERPOLATIONS, default="nearest")
    p.set_defaults(func=cmd_texture)

    p = sub.add_parser("prune", help="budgeted span selection from a curvature field")
    p.add_argument("--field", required=True, help="curvature-field JSON")
    p.add_argument("--tokens", required=True, help="token stream (.json with 'tokens' or whitespace text)")
    p.add_argument("--budget", type=int, required=True, help="token budget")
    p.add_argument("--w-minus", type=float, default=1.0, help="fan-out weight")
    p.add_argument("--w-plus", type=float, default=1.0, help="focus weight")
    p.add_argument("--guard", type=int, default=0, help="guard band radius in spans")
    p.add_argument("--partition", choices=("sentence", "fixed"), default="sentence")
    p.add_argument("--block", type=int, default=64, help="fixed/fallback block size")
    p.add_argument("--punctuation", default=". ! ? ;", help="sentence-final tokens, space-separated")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("route", help="retrieval routing from fan-out mass")
    p.add_argument("--field", required=True, help="curvature-field JSON for the evaluated sequence")
    p.add_argument("--tokens", required=True, help="token stream of the evaluated sequence")
    p.add_argument("--doc-field", action="append", help="curvature-field JSON of a document to chunk (repeatable)")
    p.add_argument("--k-min", type=int, default=2, help="minimum retrieval budget")
    p.add_argument("--k-max", type=int, default=10, help="maximum retrieval budget")
    p.add_argument("--alpha", type=float, default=4.0, help="affine routing slope")
    p.add_argument("--l-min", type=int, default=32, help="minimum chunk length")
    p.add_argument("--l-max", type=int, default=256, help="maximum chunk length")
    p.add_argument("--window", type=int, default=3, help="pivot/anchor window radius")
    p.add_argument("--anchors", type=int, default=3, help="number of fan-out anchors")
    p.add_argument("--punctuation", default=". ! ? ;", help="anchor-bounding tokens, space-separated")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("synth", help="generate synthetic belief-field files")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--slots", type=int, default=10, help="number of slots to generate")
    p.add_argument("--support-size", type=int, default=5, help="states per slot incl. tail")
    p.add_argument("--grid", default="0,1,2,4,8", help="comma-separated radius values")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--condition", default="real", help="condition label to stamp on slots")
    p.add_argument("--scale", type=float, default=1.5, help="logit scale")
    p.add_argument("--bilinear", type=float, default=0.0, help="separable only: bilinear break strength")
    p.add_argument("--bilinear-state", type=int, default=0, help="separable only: state index to break")
    p.add_argument("--obs-size", type=int, default=6, help="ci_generative only: observation alphabet")
    p.add_argument("--concentration", type=float, default=1.0, help="ci_generative only: Dirichlet concentration")
    p.add_argument("--dependence", type=float, default=0.0, help="ci_generative only: cross-side tilt")
    p.add_argument("--out", required=True, help="output belief-field JSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="validate a belief-field file")
    p.add_argument("--input", required=True, help="belief-field file")
    p.add_argument("--quiet", action="store_true", help="summary line only")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (SchemaError, ValidationError, TextcurvError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
