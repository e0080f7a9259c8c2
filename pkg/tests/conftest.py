"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from textcurv import Belief, BeliefField, CostMatrix, SlotSupport, TAIL, build_kernel


def make_support(n: int) -> SlotSupport:
    """Support with n states total: n-1 candidates plus the tail."""
    width = max(2, len(str(n)))
    return SlotSupport(tuple(f"s{i:0{width}d}" for i in range(n - 1)) + (TAIL,))


def field_from_tensor(support: SlotSupport, radii, tensor, slot_id: str = "t0") -> BeliefField:
    """Build a field from a (n_radii, n_radii, n_states) probability tensor."""
    m = len(radii)
    grid = {
        (li, ri): Belief(support, tensor[li, ri]) for li in range(m) for ri in range(m)
    }
    return BeliefField(
        slot_id=slot_id,
        position=0,
        support=support,
        radii=tuple(radii),
        grid=grid,
        left_boundary=grid[(m - 1, 0)],
        right_boundary=grid[(0, m - 1)],
    )


def random_belief(support: SlotSupport, rng: np.random.Generator, conc: float = 1.0) -> Belief:
    return Belief(support, rng.dirichlet(np.full(len(support), conc)))


def random_cost(support: SlotSupport, rng: np.random.Generator, scale: float = 2.0) -> CostMatrix:
    n = len(support)
    c = rng.uniform(0.0, scale, size=(n, n))
    c = (c + c.T) / 2.0
    np.fill_diagonal(c, 0.0)
    return CostMatrix(support, c)


def random_kernel(support: SlotSupport, rng: np.random.Generator, epsilon: float = 1.0):
    return build_kernel(random_cost(support, rng), epsilon)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
