"""Neutral semantic-motion kernels.

A kernel is built in three steps: a symmetric ground cost on the slot
support (from embeddings, or from fused graph affinities), a Gibbs
affinity G = exp(-c / epsilon) (optionally floored by a tiny tau), and
the row-normalized Markov kernel K with stationary distribution
pi(s) proportional to the affinity row sums. Because G is symmetric and
strictly positive, K is reversible with respect to pi, which is what
makes the downstream bridge treat left and right context symmetrically.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .beliefs import TAIL, Belief, SlotSupport
from .errors import InvalidInput, MissingEmbedding


def lower_median(values: Sequence[float]) -> float:
    """Median with the lower-middle element for even counts.

    Avoids averaging so the result is always one of the inputs, which
    keeps the rule reproducible across languages and float widths.
    """
    ordered = sorted(values)
    if not ordered:
        raise InvalidInput("median of empty sequence")
    return ordered[(len(ordered) - 1) // 2]


@dataclass(frozen=True)
class CostMatrix:
    """Symmetric non-negative ground cost with zero diagonal."""

    support: SlotSupport
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64)
        c.flags.writeable = False
        object.__setattr__(self, "c", c)
        n = len(self.support)
        if c.shape != (n, n):
            raise InvalidInput(f"cost matrix shape {c.shape} does not match support size {n}")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise InvalidInput("costs must be finite and non-negative")
        if np.any(c != c.T):
            raise InvalidInput("cost matrix must be exactly symmetric")
        if np.any(np.diag(c) != 0):
            raise InvalidInput("cost diagonal must be exactly zero")


@dataclass(frozen=True)
class NeutralKernel:
    """Reversible row-stochastic kernel with its affinity and stationary law."""

    support: SlotSupport
    G: np.ndarray
    K: np.ndarray
    pi: Belief
    epsilon: float

    def detailed_balance_residual(self) -> float:
        """max |pi(s) K(s,s') - pi(s') K(s',s)| over all pairs."""
        flow = self.pi.probs[:, None] * self.K
        return float(np.max(np.abs(flow - flow.T)))


def _kernel_from_affinity(support: SlotSupport, G: np.ndarray, epsilon: float) -> NeutralKernel:
    if np.any(G <= 0) or not np.all(np.isfinite(G)):
        raise InvalidInput("affinity must be strictly positive and finite")
    row_sums = G.sum(axis=1)
    K = G / row_sums[:, None]
    pi = row_sums / row_sums.sum()
    G = G.copy()
    K.flags.writeable = False
    G.flags.writeable = False
    return NeutralKernel(support=support, G=G, K=K, pi=Belief(support, pi), epsilon=epsilon)


def tail_geometry(c: CostMatrix) -> CostMatrix:
    """Fill the tail row/column from the candidate-candidate block.

    The tail-to-candidate cost is the lower median of the costs from the
    *other* candidates to that candidate, a conservative placement that
    keeps the tail neither an absorbing sink nor an unreachable outlier.
    A single-candidate support has no such costs; the tail cost degrades
    to 0 with a warning.
    """
    n = len(c.support)
    t = c.support.tail_index
    cand = [i for i in range(n) if i != t]
    out = np.array(c.c)
    if len(cand) == 1:
        warnings.warn("single-candidate support: degenerate tail cost 0", stacklevel=2)
        out[t, :] = 0.0
        out[:, t] = 0.0
    else:
        for j in cand:
            col = [out[u, j] for u in cand if u != j]
            m = lower_median(col)
            out[t, j] = m
            out[j, t] = m
    out[t, t] = 0.0
    return CostMatrix(c.support, out)


def cost_from_embeddings(
    support: SlotSupport, embeddings: Mapping[str, np.ndarray]
) -> CostMatrix:
    """Squared Euclidean costs between L2-normalized embeddings.

    Candidate-candidate costs come from the embeddings; the tail row is
    filled by :func:`tail_geometry`.
    """
    vecs = []
    for s in support.candidates:
        if s not in embeddings:
            raise MissingEmbedding(f"no embedding for candidate {s!r}")
        v = np.asarray(embeddings[s], dtype=np.float64)
        norm = np.linalg.norm(v)
        if not np.isfinite(norm) or norm == 0:
            raise InvalidInput(f"embedding for {s!r} has zero or non-finite norm")
        vecs.append(v / norm)
    E = np.stack(vecs)
    gram = E @ E.T
    c_cand = np.clip(2.0 - 2.0 * gram, 0.0, None)
    c_cand = (c_cand + c_cand.T) / 2.0
    np.fill_diagonal(c_cand, 0.0)

    n = len(support)
    full = np.zeros((n, n))
    full[: n - 1, : n - 1] = c_cand
    return tail_geometry(CostMatrix(support, full))


def default_epsilon(c: CostMatrix) -> float:
    """Scale-matched temperature: lower median of off-diagonal candidate costs."""
    t = c.support.tail_index
    cand = [i for i in range(len(c.support)) if i != t]
    off = [c.c[i, j] for i in cand for j in cand if i < j]
    if not off:
        return 1.0
    med = lower_median(off)
    return med if med > 0 else 1.0


def build_kernel(c: CostMatrix, epsilon: float, tau: float = 0.0) -> NeutralKernel:
    """Gibbs affinity exp(-c/epsilon) + tau, row-normalized to a kernel."""
    if epsilon <= 0:
        raise InvalidInput(f"epsilon must be positive, got {epsilon}")
    if tau < 0:
        raise InvalidInput(f"tau must be non-negative, got {tau}")
    G = np.exp(-c.c / epsilon) + tau
    return _kernel_from_affinity(c.support, G, epsilon)


def _synth_support(dim: int) -> SlotSupport:
    width = max(1, len(str(max(dim - 2, 0))))
    names = tuple(f"v{i:0{width}d}" for i in range(dim - 1))
    return SlotSupport(names + (TAIL,))


def fused_affinity(
    adjacencies: Sequence[np.ndarray],
    alphas: Sequence[float],
    anchor_edges: np.ndarray | None = None,
    tau: float = 1e-8,
    support: SlotSupport | None = None,
) -> NeutralKernel:
    """Kernel from a convex combination of graph adjacencies plus anchors.

    Each adjacency must be square, symmetric and non-negative on a shared
    node set (the last node is conventionally the tail bucket). The tau
    floor must be strictly positive: fused graphs can be disconnected, and
    positivity of the affinity is what guarantees a well-posed bridge.
    """
    if not adjacencies:
        raise InvalidInput("need at least one adjacency matrix")
    if len(alphas) != len(adjacencies):
        raise InvalidInput("one alpha weight per adjacency is required")
    alphas = [float(a) for a in alphas]
    if any(a < 0 for a in alphas) or abs(sum(alphas) - 1.0) > 1e-9:
        raise InvalidInput("alphas must be non-negative and sum to 1")
    if tau <= 0:
        raise InvalidInput("tau must be strictly positive for fused affinities")

    dim = np.asarray(adjacencies[0]).shape[0]
    fused = np.zeros((dim, dim))
    mats = list(adjacencies) + ([anchor_edges] if anchor_edges is not None else [])
    weights = alphas + ([1.0] if anchor_edges is not None else [])
    for W, a in zip(mats, weights):
        W = np.asarray(W, dtype=np.float64)
        if W.shape != (dim, dim):
            raise InvalidInput(f"matrix shape {W.shape} does not match {dim}x{dim}")
        if np.any(W != W.T):
            raise InvalidInput("adjacency/anchor matrices must be exactly symmetric")
        if np.any(W < 0) or not np.all(np.isfinite(W)):
            raise InvalidInput("adjacency/anchor entries must be finite and non-negative")
        fused += a * W
    G = fused + tau

    if support is None:
        support = _synth_support(dim)
    elif len(support) != dim:
        raise InvalidInput("support size does not match matrix dimension")
    return _kernel_from_affinity(support, G, epsilon=1.0)
