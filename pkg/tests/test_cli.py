"""End-to-end tests for the textcurv CLI."""

from __future__ import annotations

import dataclasses
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from textcurv import SynthSpec
from textcurv.cli import main
from textcurv.fileio import load_curvature_field, read_csv, save_belief_field
from textcurv.synth import generate

DATA = Path(__file__).parent / "data"


def embedded_fields(n_slots: int, seed: int, support_size: int = 4):
    """Random-positive fields with seeded candidate embeddings attached."""
    rng = np.random.default_rng(seed)
    fields = []
    for i in range(n_slots):
        f = generate(
            SynthSpec(kind="random_positive", support_size=support_size,
                      grid=(0, 1, 2), seed=seed + i),
            slot_id=f"s{i:03d}",
            position=2 * i,
        )
        emb = {s: rng.normal(0.0, 1.0, 3) for s in f.support.candidates}
        fields.append(dataclasses.replace(f, embeddings=emb))
    return fields


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


class TestValidate:
    def test_golden_ok(self, capsys):
        assert run_cli("validate", "--input", DATA / "golden_field.json") == 0
        out = capsys.readouterr().out
        assert "0 warnings" in out

    def test_broken_file_exits_2(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        doc = json.loads((DATA / "golden_field.json").read_text())
        doc["slots"][0]["grid"]["0,0"] = [0.9, 0.05, 0.0]
        p.write_text(json.dumps(doc))
        assert run_cli("validate", "--input", p) == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_file_exits_4(self, tmp_path):
        assert run_cli("validate", "--input", tmp_path / "nope.json") == 4


class TestSynth:
    def test_generates_loadable_files(self, tmp_path):
        out = tmp_path / "sep.json"
        assert run_cli("synth", "--kind", "separable", "--slots", 5,
                       "--support-size", 4, "--seed", 7, "--out", out) == 0
        assert run_cli("validate", "--input", out, "--quiet") == 0

    def test_deterministic_per_seed(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli("synth", "--kind", "ci_generative", "--slots", 3, "--seed", 1, "--out", a)
        run_cli("synth", "--kind", "ci_generative", "--slots", 3, "--seed", 1, "--out", b)
        assert a.read_bytes() == b.read_bytes()


class TestCertify:
    @pytest.fixture
    def condition_files(self, tmp_path):
        paths = {}
        for cond, kind, seed in (
            ("real", "random_positive", 0),
            ("swap", "separable", 1),
            ("shuffle", "separable", 2),
        ):
            p = tmp_path / f"{cond}.json"
            run_cli("synth", "--kind", kind, "--slots", 8, "--support-size", 4,
                    "--seed", seed, "--condition", cond, "--out", p)
            paths[cond] = p
        return paths

    def test_end_to_end(self, tmp_path, condition_files):
        out = tmp_path / "cert.csv"
        code = run_cli(
            "certify",
            "--real", condition_files["real"],
            "--swap", condition_files["swap"],
            "--shuffle", condition_files["shuffle"],
            "--out", out,
        )
        assert code == 0
        comments, rows = read_csv(out)
        assert "config" in comments and "inputs" in comments
        slot_rows = [r for r in rows if r["row"] == "slot"]
        assert len(slot_rows) == 24
        medians = {r["condition"]: float(r["h"]) for r in rows if r["row"] == "median"}
        # curved real fields vs flat controls
        assert medians["real"] > 1e-2
        assert medians["swap"] <= 1e-9
        deltas = [r for r in rows if r["row"] == "delta"]
        assert {d["condition"] for d in deltas} == {"real-swap", "real-shuffle"}
        ci_rows = [r for r in rows if r["row"].startswith("ci_")]
        assert len(ci_rows) == 4

    def test_requires_two_slots_per_condition(self, tmp_path):
        p = tmp_path / "one.json"
        run_cli("synth", "--kind", "separable", "--slots", 1, "--seed", 0, "--out", p)
        assert run_cli("certify", "--real", p, "--out", tmp_path / "c.csv") == 2


class TestTexture:
    def test_embeddings_pipeline(self, tmp_path):
        fields = embedded_fields(4, seed=11)
        src = tmp_path / "fields.json"
        save_belief_field(fields, src)
        out = tmp_path / "tex.csv"
        field_out = tmp_path / "tex_field.json"
        code = run_cli("texture", "--input", src, "--out", out,
                       "--field-out", field_out, "--length", 8)
        assert code == 0
        comments, rows = read_csv(out)
        assert len(rows) == 4
        assert all(r["error"] == "" for r in rows)
        kappas = [float(r["kappa"]) for r in rows]
        assert all(np.isfinite(kappas))
        cf, doc = load_curvature_field(field_out)
        assert cf.length == 8
        assert cf.positions == (0, 2, 4, 6)

    def test_cost_sidecar(self, tmp_path):
        fields = [
            dataclasses.replace(f, embeddings=None) for f in embedded_fields(2, seed=3)
        ]
        src = tmp_path / "fields.json"
        save_belief_field(fields, src)
        n = len(fields[0].support)
        costs = {}
        rng = np.random.default_rng(0)
        for f in fields:
            c = rng.uniform(0.1, 2.0, (n, n))
            c = ((c + c.T) / 2)
            np.fill_diagonal(c, 0.0)
            costs[f.slot_id] = c.tolist()
        sidecar = tmp_path / "costs.json"
        sidecar.write_text(json.dumps(costs))
        out = tmp_path / "tex.csv"
        assert run_cli("texture", "--input", src, "--out", out, "--costs", sidecar) == 0
        _, rows = read_csv(out)
        assert all(r["error"] == "" for r in rows)

    def test_slot_failures_recorded_not_fatal(self, tmp_path):
        fields = embedded_fields(2, seed=5)
        fields[1] = dataclasses.replace(fields[1], embeddings=None)
        src = tmp_path / "fields.json"
        save_belief_field(fields, src)
        out = tmp_path / "tex.csv"
        assert run_cli("texture", "--input", src, "--out", out) == 0
        _, rows = read_csv(out)
        by_id = {r["slot_id"]: r for r in rows}
        assert by_id["s000"]["error"] == ""
        assert by_id["s001"]["error"] == "InvalidInput"
        assert by_id["s001"]["kappa"] == ""


class TestPruneRoute:
    @pytest.fixture
    def artifacts(self, tmp_path):
        fields = embedded_fields(6, seed=21)
        src = tmp_path / "fields.json"
        save_belief_field(fields, src)
        field_out = tmp_path / "field.json"
        run_cli("texture", "--input", src, "--out", tmp_path / "tex.csv",
                "--field-out", field_out, "--length", 12)
        tokens = tmp_path / "tokens.json"
        tokens.write_text(json.dumps({"tokens":
            ["t0", "t1", "t2", ".", "t4", "t5", "t6", ".", "t8", "t9", "t10", "."]}))
        return field_out, tokens

    def test_prune(self, tmp_path, artifacts):
        field_out, tokens = artifacts
        out = tmp_path / "plan.json"
        assert run_cli("prune", "--field", field_out, "--tokens", tokens,
                       "--budget", 8, "--out", out) == 0
        plan = json.loads(out.read_text())
        assert plan["kind"] == "prune_plan"
        assert plan["total_tokens"] <= 8
        assert plan["selected"] == sorted(plan["selected"])
        assert "config" in plan and "inputs" in plan

    def test_prune_budget_covers_everything(self, tmp_path, artifacts):
        field_out, tokens = artifacts
        out = tmp_path / "plan.json"
        run_cli("prune", "--field", field_out, "--tokens", tokens,
                "--budget", 100, "--out", out)
        plan = json.loads(out.read_text())
        assert plan["total_tokens"] == 12
        assert len(plan["selected"]) == len(plan["partition"])

    def test_route(self, tmp_path, artifacts):
        field_out, tokens = artifacts
        out = tmp_path / "route.json"
        assert run_cli("route", "--field", field_out, "--tokens", tokens,
                       "--doc-field", field_out, "--l-min", 2, "--l-max", 6,
                       "--out", out) == 0
        plan = json.loads(out.read_text())
        assert plan["kind"] == "route_plan"
        assert plan["k"] >= 2
        chunks = plan["chunks"]
        assert chunks[0][1] == 0 and chunks[-1][2] == 12
        assert plan["saturated"] == plan["full_context"]

    def test_route_all_positive_field_hits_k_min(self, tmp_path):
        slots = [{"slot_id": f"p{i}", "position": i, "kappa": 0.5,
                  "gap": 0.1, "energy": 1.0, "low_energy": False, "iterations": 3}
                 for i in range(4)]
        fp = tmp_path / "pos.json"
        fp.write_text(json.dumps({"schema_version": 1, "kind": "curvature_field",
                                  "length": 4, "interpolation": "nearest",
                                  "slots": slots}))
        tokens = tmp_path / "toks.json"
        tokens.write_text(json.dumps({"tokens": ["a", "b", "c", "d"]}))
        out = tmp_path / "route.json"
        assert run_cli("route", "--field", fp, "--tokens", tokens, "--out", out) == 0
        plan = json.loads(out.read_text())
        assert plan["k"] == 2 and plan["saturated"] is False
        assert plan["fanout_mass"] == 0.0
        assert plan["anchors"] == []


class TestWorkedExamples:
    def test_three_span_prune_end_to_end(self, tmp_path):
        # Worked example: span scores (0.9, 0.1, 0.5), lengths 2 each,
        # budget 4 -> spans 0 and 2 in original order.
        slots = [
            {"slot_id": f"p{i}", "position": i, "kappa": k, "gap": 0.0,
             "energy": 1.0, "low_energy": False, "iterations": 1}
            for i, k in enumerate([0.9, 0.9, 0.1, 0.1, 0.5, 0.5])
        ]
        field = tmp_path / "field.json"
        field.write_text(json.dumps({
            "schema_version": 1, "kind": "curvature_field", "length": 6,
            "interpolation": "nearest", "slots": slots,
        }))
        tokens = tmp_path / "toks.json"
        tokens.write_text(json.dumps({"tokens": ["w"] * 6}))
        out = tmp_path / "plan.json"
        assert run_cli("prune", "--field", field, "--tokens", tokens,
                       "--budget", 4, "--partition", "fixed", "--block", 2,
                       "--out", out) == 0
        plan = json.loads(out.read_text())
        assert plan["selected"] == [0, 2]
        assert plan["selected_spans"] == [[0, 2], [4, 6]]
        assert plan["total_tokens"] == 4

    def _flat_embedding_fields(self, mu_l=None, mu_r=None):
        # identical embeddings -> zero candidate costs -> uniform kernel
        from textcurv import Belief, BeliefField, SlotSupport, TAIL

        support = SlotSupport(("a", "b", "c", TAIL))
        n = len(support)
        uniform = np.full(n, 1.0 / n)
        left = np.asarray(mu_l if mu_l is not None else uniform)
        right = np.asarray(mu_r if mu_r is not None else uniform)
        grid = {}
        for li in range(2):
            for ri in range(2):
                if (li, ri) == (1, 0):
                    probs = left
                elif (li, ri) == (0, 1):
                    probs = right
                else:
                    probs = uniform
                grid[(li, ri)] = Belief(support, probs)
        emb = {s: np.array([1.0, 0.0]) for s in support.candidates}
        return [BeliefField(
            slot_id="u0", position=0, support=support, radii=(0, 1), grid=grid,
            left_boundary=grid[(1, 0)], right_boundary=grid[(0, 1)],
            embeddings=emb,
        )]

    def test_stationary_boundaries_give_zero_kappa(self, tmp_path):
        src = tmp_path / "flat.json"
        save_belief_field(self._flat_embedding_fields(), src)
        out = tmp_path / "tex.csv"
        assert run_cli("texture", "--input", src, "--out", out) == 0
        _, rows = read_csv(out)
        assert float(rows[0]["kappa"]) == 0.0
        assert rows[0]["low_energy"] == "1"

    def test_uniform_kernel_closed_form_through_cli(self, tmp_path):
        from textcurv import kl, uniform as uniform_belief
        from textcurv.beliefs import Belief, SlotSupport, TAIL

        mu_l = np.array([0.7, 0.1, 0.1, 0.1])
        mu_r = np.array([0.1, 0.6, 0.2, 0.1])
        fields = self._flat_embedding_fields(mu_l, mu_r)
        src = tmp_path / "uk.json"
        save_belief_field(fields, src)
        out = tmp_path / "tex.csv"
        assert run_cli("texture", "--input", src, "--out", out) == 0
        _, rows = read_csv(out)
        support = fields[0].support
        flat = uniform_belief(support)
        energy = kl(Belief(support, mu_l), flat) + kl(Belief(support, mu_r), flat)
        expected = 4.0 * energy / (energy + 1e-8)
        assert abs(float(rows[0]["kappa"]) - expected) <= 1e-6


def _run_subprocess(args, threads: str):
    env = dict(os.environ, TEXTURE_THREADS=threads)
    return subprocess.run(
        [sys.executable, "-m", "textcurv.cli", *map(str, args)],
        capture_output=True,
        env=env,
        check=True,
    )


class TestDeterminism:
    def test_certify_bitwise_across_runs_and_threads(self, tmp_path):
        real = tmp_path / "real.json"
        swap = tmp_path / "swap.json"
        run_cli("synth", "--kind", "random_positive", "--slots", 6, "--seed", 4,
                "--condition", "real", "--out", real)
        run_cli("synth", "--kind", "separable", "--slots", 6, "--seed", 5,
                "--condition", "swap", "--out", swap)
        out = tmp_path / "cert.csv"
        blobs = []
        for threads in ("1", "4", "1"):
            _run_subprocess(
                ["certify", "--real", real, "--swap", swap, "--out", out], threads
            )
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1] == blobs[2]

    def test_texture_bitwise_across_runs_and_threads(self, tmp_path):
        fields = embedded_fields(6, seed=31)
        src = tmp_path / "fields.json"
        save_belief_field(fields, src)
        out = tmp_path / "tex.csv"
        field_out = tmp_path / "field.json"
        blobs = []
        for threads in ("1", "4"):
            _run_subprocess(
                ["texture", "--input", src, "--out", out,
                 "--field-out", field_out, "--length", 16],
                threads,
            )
            blobs.append(out.read_bytes() + field_out.read_bytes())
        assert blobs[0] == blobs[1]
