"""Acceptance suite: one test per release criterion, at stated tolerances.

Each test prints an ``ACCEPTANCE PASS`` line on success; run with
``pytest -v -s tests/test_acceptance.py`` to see one line per criterion.
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import time

import numpy as np

from textcurv import (
    Belief,
    CostMatrix,
    SynthSpec,
    build_kernel,
    cei,
    curv_prune,
    endpoint_reference,
    free_energy,
    gen_ci_field,
    gen_separable_field,
    holonomy,
    kl,
    log_odds,
    pivot_chunks,
    routing_map,
    sample_feasible_couplings,
    solve_bridge,
    texture_slot,
    uniform_kernel_closed_form,
)
from textcurv.bridge import bridge_energy
from textcurv.control import SpanPartition
from textcurv.fileio import save_belief_field
from textcurv.synth import generate
from textcurv.texture import DEFAULT_EPS0

from conftest import make_support, random_belief, random_cost
from test_cli import embedded_fields
from test_control import field_from_kappas, reference_greedy_with_guards

GRID5 = (0, 1, 2, 4, 8)


def _report(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


def test_holonomy_equivalence():
    """Separable fields certify flat; a bilinear break shows up exactly."""
    start = time.perf_counter()
    sizes = [3, 5, 8]
    for i in range(100):
        n = sizes[i % 3]
        f = gen_separable_field(
            SynthSpec(kind="separable", support_size=n, grid=GRID5, seed=1000 + i)
        )
        assert holonomy(f).h <= 1e-10

    for i in range(100):
        n = sizes[i % 3]
        spec = SynthSpec(
            kind="separable",
            support_size=n,
            grid=GRID5,
            seed=2000 + i,
            parameters={"bilinear": 0.1, "bilinear_state": 0},
        )
        f = generate(spec)
        bumped = f.support.states[0]
        rep = holonomy(f, ref_state=f.support.states[1])
        for li in range(4):
            for ri in range(4):
                assert abs(rep.per_cell[(bumped, li, ri)] - 0.1) <= 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"holonomy suite took {elapsed:.2f}s"
    _report(f"holonomy equivalence (200 fields, {elapsed:.2f}s)")


def test_discrete_stokes():
    """Rectangle holonomy telescopes into unit-square sums."""
    sizes = [3, 5, 8]
    for i in range(100):
        n = sizes[i % 3]
        f = generate(
            SynthSpec(kind="random_positive", support_size=n, grid=GRID5, seed=3000 + i)
        )
        ref = f.support.states[i % n]
        u = log_odds(f, ref)
        rep = holonomy(f, ref_state=ref)
        omega = np.zeros((n, 4, 4))
        for (s, li, ri), v in rep.per_cell.items():
            omega[f.support.index(s), li, ri] = v
        m = f.n_radii
        for L1 in range(m):
            for L2 in range(L1 + 1, m):
                for R1 in range(m):
                    for R2 in range(R1 + 1, m):
                        rect = u[:, L2, R2] - u[:, L2, R1] - u[:, L1, R2] + u[:, L1, R1]
                        cells = omega[:, L1:L2, R1:R2].sum(axis=(1, 2))
                        assert np.max(np.abs(rect - cells)) <= 1e-10
    _report("discrete Stokes (100 fields, all rectangles)")


def test_cei_null():
    """CI-generated fields have zero CEI; the variational identity holds."""
    rng = np.random.default_rng(7)
    for i in range(100):
        n = 3 + (i % 4)
        f = gen_ci_field(
            SynthSpec(kind="ci_generative", support_size=n, grid=GRID5, seed=4000 + i)
        )
        rep = cei(f)
        assert rep.cei <= 1e-10

        top = f.n_radii - 1
        left, right, base = f.grid[(top, 0)], f.grid[(0, top)], f.grid[(0, 0)]
        logZ = float(np.log(np.sum(left.probs * right.probs / base.probs)))
        for _ in range(20):
            q = Belief(f.support, rng.dirichlet(np.ones(n)))
            j_direct = kl(q, left) + kl(q, right) - kl(q, base)
            assert abs(j_direct - (kl(q, rep.poe) - logZ)) <= 1e-9
    _report("CEI null (100 fields, J-identity at 20 points each)")


def test_kernel_reversibility():
    """Detailed balance and stationarity for Gibbs kernels."""
    rng = np.random.default_rng(11)
    for i in range(100):
        n = int(rng.integers(2, 9))
        sup = make_support(n)
        k = build_kernel(random_cost(sup, rng, scale=4.0), epsilon=float(rng.uniform(0.2, 2.0)))
        assert k.detailed_balance_residual() <= 1e-12
        assert np.max(np.abs(k.pi.probs @ k.K - k.pi.probs)) <= 1e-10
    _report("kernel reversibility (100 kernels)")


def test_bridge_correctness():
    """Feasibility, structure, energy identities, optimality vs oracle."""
    start = time.perf_counter()
    rng = np.random.default_rng(13)
    count = 0
    for n in (2, 3, 4, 5, 6):
        sup = make_support(n)
        for j in range(10):
            count += 1
            k = build_kernel(random_cost(sup, rng), epsilon=float(rng.uniform(0.4, 1.5)))
            mu_l = random_belief(sup, rng)
            mu_r = random_belief(sup, rng)
            sol = solve_bridge(k, mu_l, mu_r, tol=1e-10)
            R02 = endpoint_reference(k)

            assert sol.marginal_error <= 1e-10
            assert sol.energy >= -1e-12
            assert abs(float(sol.midpoint.probs.sum()) - 1.0) <= 1e-10

            ratio = sol.gamma / R02
            sv = np.linalg.svd(ratio, compute_uv=False)
            assert sv[1] <= 1e-8 * sv[0]

            K = k.K
            M = K @ K
            P = np.einsum("ac,ab,bc->abc", sol.gamma / M, K, K)
            R = np.einsum("a,ab,bc->abc", k.pi.probs, K, K)
            assert abs(float(np.sum(P * np.log(P / R))) - sol.energy) <= 1e-8

            direct, dual = bridge_energy(sol, k, mu_l, mu_r)
            assert abs(direct - dual) <= 1e-8

            swapped = solve_bridge(k, mu_r, mu_l, tol=1e-10)
            assert abs(sol.energy - swapped.energy) <= 1e-8

            couplings = sample_feasible_couplings(mu_l, mu_r, 1000, seed=5000 + count)
            kls = np.sum(couplings * np.log(couplings / R02[None]), axis=(1, 2))
            assert float(kls.min()) >= sol.energy - 1e-9
    elapsed = time.perf_counter() - start
    assert count == 50
    assert elapsed < 60.0, f"bridge suite took {elapsed:.2f}s"
    _report(f"bridge correctness (50 instances x 1000 oracle couplings, {elapsed:.1f}s)")


def test_closed_form_oracle():
    """Uniform kernels match the analytic bridge and curvature."""
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        sup = make_support(n)
        k = build_kernel(CostMatrix(sup, np.zeros((n, n))), epsilon=1.0)
        mu_l = random_belief(sup, rng)
        mu_r = random_belief(sup, rng)
        gamma, midpoint, energy = uniform_kernel_closed_form(mu_l, mu_r)
        sol = solve_bridge(k, mu_l, mu_r)
        assert np.max(np.abs(sol.gamma - gamma)) <= 1e-8
        assert np.max(np.abs(sol.midpoint.probs - midpoint.probs)) <= 1e-8
        assert abs(sol.energy - (kl(mu_l, k.pi) + kl(mu_r, k.pi))) <= 1e-8
        sc = texture_slot(mu_l, mu_r, k)
        assert abs(sc.kappa - 4.0 * sc.energy / (sc.energy + DEFAULT_EPS0)) <= 1e-6
    _report("closed-form oracle (20 uniform-kernel instances)")


def test_midpoint_identity():
    """Reconstructing the midpoint free energy from kappa is exact."""
    rng = np.random.default_rng(19)
    checked = 0
    for _ in range(30):
        n = int(rng.integers(2, 7))
        sup = make_support(n)
        k = build_kernel(random_cost(sup, rng), epsilon=float(rng.uniform(0.3, 2.0)))
        mu_l = random_belief(sup, rng)
        mu_r = random_belief(sup, rng)
        sc = texture_slot(mu_l, mu_r, k)
        lhs = free_energy(sc.midpoint, k.pi)
        rhs = 0.5 * (free_energy(mu_l, k.pi) + free_energy(mu_r, k.pi)) - (
            sc.kappa / 8.0
        ) * (sc.energy + DEFAULT_EPS0)
        assert abs(lhs - rhs) <= 1e-12
        checked += 1
    assert checked == 30
    _report("midpoint identity (30 slots, exact to 1e-12)")


def test_stability():
    """Entrywise 1e-6 input perturbations move kappa by at most 1e-3."""
    rng = np.random.default_rng(23)
    for n in (2, 3, 4, 5, 6):
        sup = make_support(n)
        for _ in range(5):
            cm = random_cost(sup, rng)
            k = build_kernel(cm, epsilon=1.0)
            mu_l = random_belief(sup, rng, conc=3.0)
            mu_r = random_belief(sup, rng, conc=3.0)
            base = texture_slot(mu_l, mu_r, k)

            noise = rng.uniform(-1.0, 1.0, cm.c.shape) * 5e-7
            noise = (noise + noise.T) / 2
            np.fill_diagonal(noise, 0.0)
            c2 = np.clip(cm.c + noise, 0.0, None)
            np.fill_diagonal(c2, 0.0)
            k2 = build_kernel(CostMatrix(sup, c2), epsilon=1.0)
            assert np.max(np.abs(k2.K - k.K)) <= 1e-6

            def jitter(b):
                p = b.probs * (1.0 + rng.uniform(-1.0, 1.0, n) * 1e-6)
                return Belief(sup, p / p.sum())

            pert = texture_slot(jitter(mu_l), jitter(mu_r), k2)
            assert abs(pert.kappa - base.kappa) <= 1e-3
    _report("stability (25 perturbed slots, |S| <= 6)")


def test_controllers():
    """Pruning matches the independent reference; routing and chunking laws."""
    rng = np.random.default_rng(29)
    for _ in range(500):
        n_spans = int(rng.integers(1, 11))
        lengths = rng.integers(1, 7, size=n_spans)
        bounds = np.concatenate([[0], np.cumsum(lengths)])
        partition = SpanPartition(
            tuple((int(bounds[i]), int(bounds[i + 1])) for i in range(n_spans)),
            "fixed_block",
        )
        field = field_from_kappas(rng.normal(0, 1, int(bounds[-1])))
        budget = int(rng.integers(0, bounds[-1] + 3))
        guard = int(rng.integers(0, 3))
        w_minus = float(rng.uniform(0, 2))
        w_plus = float(rng.uniform(0, 2))
        plan = curv_prune(field, partition, budget, w_minus, w_plus, guard)
        ref_sel, ref_used = reference_greedy_with_guards(
            list(plan.scores), list(lengths), budget, guard
        )
        assert list(plan.selected) == ref_sel
        assert plan.total_tokens == ref_used <= budget

    masses = np.sort(rng.uniform(0, 4, 500))
    ks = [routing_map(float(m), 2, 10, 4.0)[0] for m in masses]
    assert all(a <= b for a, b in zip(ks, ks[1:]))
    assert all(2 <= k <= 10 for k in ks)

    for _ in range(100):
        n = int(rng.integers(1, 500))
        l_min = int(rng.integers(1, 20))
        l_max = l_min + int(rng.integers(0, 50))
        chunks = pivot_chunks(field_from_kappas(rng.normal(0, 1, n)), l_min, l_max)
        assert chunks[0][0] == 0 and chunks[-1][1] == n
        assert all(e1 == s2 for (_, e1), (s2, _) in zip(chunks, chunks[1:]))
        assert all(l_min <= e - s <= l_max for s, e in chunks[:-1])
        assert 0 < chunks[-1][1] - chunks[-1][0] <= l_max
    _report("controllers (500 prune instances, routing monotone, chunk tiling)")


def test_cli_determinism(tmp_path):
    """Byte-identical outputs across repeated runs and TEXTURE_THREADS."""

    def run(args, threads):
        env = dict(os.environ, TEXTURE_THREADS=threads)
        subprocess.run(
            [sys.executable, "-m", "textcurv.cli", *map(str, args)],
            capture_output=True,
            env=env,
            check=True,
        )

    real = tmp_path / "real.json"
    ctrl = tmp_path / "ctrl.json"
    run(["synth", "--kind", "random_positive", "--slots", "8", "--seed", "1",
         "--condition", "real", "--out", real], "1")
    run(["synth", "--kind", "separable", "--slots", "8", "--seed", "2",
         "--condition", "swap", "--out", ctrl], "1")

    save_belief_field(embedded_fields(8, seed=77), tmp_path / "emb.json")
    tokens = tmp_path / "toks.json"
    tokens.write_text(json.dumps({"tokens": ["w"] * 16}))

    cert = tmp_path / "cert.csv"
    tex = tmp_path / "tex.csv"
    tex_field = tmp_path / "texfield.json"
    plan = tmp_path / "plan.json"
    route = tmp_path / "route.json"

    def run_all(threads):
        run(["certify", "--real", real, "--swap", ctrl, "--out", cert], threads)
        run(["texture", "--input", tmp_path / "emb.json", "--out", tex,
             "--field-out", tex_field, "--length", "16"], threads)
        run(["prune", "--field", tex_field, "--tokens", tokens,
             "--budget", "10", "--partition", "fixed", "--block", "4",
             "--out", plan], threads)
        run(["route", "--field", tex_field, "--tokens", tokens,
             "--doc-field", tex_field, "--l-min", "2", "--l-max", "8",
             "--out", route], threads)
        return b"".join(p.read_bytes() for p in (cert, tex, tex_field, plan, route))

    first = run_all("1")
    second = run_all("4")
    third = run_all("1")
    assert first == second == third
    _report("CLI determinism (certify/texture/prune/route, threads 1 vs 4)")
