"""Synthetic belief-field generators and brute-force oracles for testing.

The generators realize the null models behind the flatness certificates:

* ``separable``   -- log-odds split additively into left and right parts,
                     so every unit-square holonomy is zero. An optional
                     bilinear term breaks separability by a known amount.
* ``poe_null``    -- the two-sided cell is defined as the exact
                     product-of-experts of its one-sided cells (CEI = 0).
* ``ci_generative`` -- beliefs are exact posteriors of a latent-state
                     model whose left and right observations are
                     conditionally independent given the slot state, so
                     the PoE identity holds by Bayes' rule.
* ``random_positive`` -- unstructured strictly positive fields.

The module also hosts solver-independent oracles: a feasible-coupling
sampler (for optimality checks against the bridge) and the closed form
of the uniform-kernel bridge.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .beliefs import TAIL, Belief, BeliefField, SlotSupport, kl, uniform
from .errors import ConvergenceFailure, InvalidInput

KINDS = ("separable", "poe_null", "ci_generative", "random_positive")

DEFAULT_GRID = (0, 1, 2, 4, 8)


@dataclass(frozen=True)
class SynthSpec:
    """Seeded recipe for one synthetic belief field."""

    kind: str
    support_size: int = 5
    grid: tuple[int, ...] = DEFAULT_GRID
    seed: int = 0
    parameters: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.support_size < 2:
            raise InvalidInput("support_size must be >= 2 (candidates plus tail)")
        if len(self.grid) < 1:
            raise InvalidInput("grid must have at least one radius")


def _support(n: int) -> SlotSupport:
    width = max(2, len(str(n - 2)))
    return SlotSupport(tuple(f"s{i:0{width}d}" for i in range(n - 1)) + (TAIL,))


def _field_from_logits(spec: SynthSpec, logits: np.ndarray, slot_id: str,
                       condition: str, position: int) -> BeliefField:
    """Normalize per-cell logits (state, L, R) into a BeliefField."""
    support = _support(spec.support_size)
    m = len(spec.grid)
    probs = np.exp(logits - logits.max(axis=0, keepdims=True))
    probs = probs / probs.sum(axis=0, keepdims=True)
    grid = {
        (li, ri): Belief(support, probs[:, li, ri])
        for li in range(m)
        for ri in range(m)
    }
    return BeliefField(
        slot_id=slot_id,
        position=position,
        support=support,
        radii=tuple(spec.grid),
        grid=grid,
        left_boundary=grid[(m - 1, 0)],
        right_boundary=grid[(0, m - 1)],
        condition=condition,
    )


def generate(spec: SynthSpec, slot_id: str | None = None, condition: str = "real",
             position: int = 0) -> BeliefField:
    """Generate one field of the requested kind, deterministically per seed."""
    if slot_id is None:
        slot_id = f"synth-{spec.kind}-{spec.seed}"
    rng = np.random.default_rng(spec.seed)
    n = spec.support_size
    m = len(spec.grid)
    scale = float(spec.parameters.get("scale", 1.5))

    if spec.kind == "separable":
        base = rng.normal(0.0, scale, n)
        alpha = rng.normal(0.0, scale, (n, m))
        beta = rng.normal(0.0, scale, (n, m))
        alpha[:, 0] = 0.0
        beta[:, 0] = 0.0
        logits = base[:, None, None] + alpha[:, :, None] + beta[:, None, :]
        gamma = float(spec.parameters.get("bilinear", 0.0))
        if gamma != 0.0:
            s = int(spec.parameters.get("bilinear_state", 0))
            idx = np.arange(m, dtype=np.float64)
            logits[s] += gamma * np.outer(idx, idx)
        return _field_from_logits(spec, logits, slot_id, condition, position)

    if spec.kind == "poe_null":
        z = rng.normal(0.0, scale, n)
        x = rng.normal(0.0, scale, (n, m))
        y = rng.normal(0.0, scale, (n, m))
        x[:, 0] = z
        y[:, 0] = z
        logits = x[:, :, None] + y[:, None, :] - z[:, None, None]
        return _field_from_logits(spec, logits, slot_id, condition, position)

    if spec.kind == "random_positive":
        logits = rng.normal(0.0, scale, (n, m, m))
        return _field_from_logits(spec, logits, slot_id, condition, position)

    # ci_generative: exact posteriors of a conditionally independent model.
    n_obs = int(spec.parameters.get("obs_size", 6))
    conc = float(spec.parameters.get("concentration", 1.0))
    dependence = float(spec.parameters.get("dependence", 0.0))
    prior = rng.dirichlet(np.full(n, conc))
    left_table = rng.dirichlet(np.full(n_obs, conc), size=n)
    right_table = rng.dirichlet(np.full(n_obs, conc), size=n)
    z_true = int(rng.choice(n, p=prior))
    max_radius = max(spec.grid)
    left_obs = rng.choice(n_obs, size=max_radius, p=left_table[z_true]) if max_radius else []
    right_obs = rng.choice(n_obs, size=max_radius, p=right_table[z_true]) if max_radius else []

    left_ll = np.zeros((n, m))
    right_ll = np.zeros((n, m))
    for gi, radius in enumerate(spec.grid):
        left_ll[:, gi] = np.log(left_table[:, left_obs[:radius]]).sum(axis=1) if radius else 0.0
        right_ll[:, gi] = np.log(right_table[:, right_obs[:radius]]).sum(axis=1) if radius else 0.0
    logits = np.log(prior)[:, None, None] + left_ll[:, :, None] + right_ll[:, None, :]
    if dependence > 0.0:
        tilt = rng.normal(0.0, 1.0, n)
        two_sided = np.outer(np.asarray(spec.grid) > 0, np.asarray(spec.grid) > 0)
        logits += dependence * tilt[:, None, None] * two_sided[None, :, :]
    return _field_from_logits(spec, logits, slot_id, condition, position)


def gen_separable_field(spec: SynthSpec) -> BeliefField:
    """Separable (zero-holonomy) field; see :func:`generate`."""
    if spec.kind != "separable":
        raise InvalidInput(f"expected kind 'separable', got {spec.kind!r}")
    return generate(spec)


def gen_ci_field(spec: SynthSpec) -> BeliefField:
    """Conditionally independent (zero-CEI) field; see :func:`generate`."""
    if spec.kind != "ci_generative":
        raise InvalidInput(f"expected kind 'ci_generative', got {spec.kind!r}")
    return generate(spec)


def sample_feasible_couplings(
    mu_l: Belief,
    mu_r: Belief,
    count: int,
    seed: int,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> np.ndarray:
    """Batch of strictly positive couplings with the given marginals.

    Each coupling is produced by proportionally fitting a seeded random
    positive matrix to the marginals. These are feasible points only;
    nothing about them is optimal, which is the point: they provide an
    oracle against which a claimed KL minimizer can be compared.
    """
    if np.any(mu_l.probs <= 0) or np.any(mu_r.probs <= 0):
        raise InvalidInput("marginals must be strictly positive")
    rng = np.random.default_rng(seed)
    n = len(mu_l.probs)
    base = rng.uniform(0.5, 1.5, size=(count, n, n))
    a = np.ones((count, n))
    b = np.ones((count, n))
    p = mu_l.probs[None, :]
    q = mu_r.probs[None, :]
    for _ in range(max_iter):
        a = p / np.einsum("bij,bj->bi", base, b)
        b = q / np.einsum("bij,bi->bj", base, a)
        gamma = a[:, :, None] * base * b[:, None, :]
        row_err = np.abs(gamma.sum(axis=2) - p).sum(axis=1)
        col_err = np.abs(gamma.sum(axis=1) - q).sum(axis=1)
        if max(row_err.max(), col_err.max()) <= tol:
            return gamma
    raise ConvergenceFailure(
        "feasible-coupling fitting stalled",
        residual=float(max(row_err.max(), col_err.max())),
        iterations=max_iter,
    )


def sample_feasible_coupling(mu_l: Belief, mu_r: Belief, seed: int) -> np.ndarray:
    """One feasible coupling; retries with derived seeds up to 5 times."""
    last: ConvergenceFailure | None = None
    for attempt in range(5):
        try:
            return sample_feasible_couplings(mu_l, mu_r, 1, seed + attempt)[0]
        except ConvergenceFailure as exc:
            last = exc
    raise last


def uniform_kernel_closed_form(
    mu_l: Belief, mu_r: Belief
) -> tuple[np.ndarray, Belief, float]:
    """Analytic bridge for a uniform kernel: product coupling, flat midpoint.

    With identical kernel rows the endpoint reference factorizes, so the
    optimal coupling is mu_l (x) mu_r, the midpoint is the (uniform)
    stationary law, and the energy splits into the two endpoint KLs.
    """
    if mu_l.support.states != mu_r.support.states:
        raise InvalidInput("marginals must share a support")
    flat = uniform(mu_l.support)
    gamma = np.outer(mu_l.probs, mu_r.probs)
    energy = kl(mu_l, flat) + kl(mu_r, flat)
    return gamma, flat, energy
