"""Two-step Schrodinger bridge between boundary beliefs.

The bridge problem reduces to a static KL projection onto the endpoint
reference coupling R02(s0, s2) = pi(s0) K^2(s0, s2): the optimizer has
the scaling form gamma*(s0, s2) = a(s0) R02(s0, s2) b(s2), solvable by
iterative proportional fitting. All scaling runs in the log domain
because tail-bucket probabilities can sit many orders of magnitude below
the candidates and linear-domain Sinkhorn underflows there.

The midpoint belief is recovered by message passing,
mu_mid(s1) = f(s1) g(s1) with f = (a . pi) K and g = K b, and the bridge
energy D^2 = KL(gamma* || R02) doubles as the KL of the full path
measure to the reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .beliefs import Belief
from .errors import ConvergenceFailure, InvalidInput
from .kernel import NeutralKernel

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10000


@dataclass(frozen=True)
class BridgeSolution:
    """Converged scaling solution for one slot.

    ``a``/``b`` are the endpoint scaling vectors in the canonical gauge
    (sum_s pi(s) log a(s) = 0); ``log_a``/``log_b`` are their log-domain
    representations as iterated. ``energy`` is KL(gamma || R02) in nats.
    """

    a: np.ndarray
    b: np.ndarray
    log_a: np.ndarray
    log_b: np.ndarray
    gamma: np.ndarray
    midpoint: Belief
    energy: float
    iterations: int
    marginal_error: float


def endpoint_reference(kernel: NeutralKernel) -> np.ndarray:
    """Endpoint reference coupling R02 = diag(pi) K^2 (unit total mass)."""
    M = kernel.K @ kernel.K
    return kernel.pi.probs[:, None] * M


def solve_bridge(
    kernel: NeutralKernel,
    mu_l: Belief,
    mu_r: Belief,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> BridgeSolution:
    """Log-domain IPF for the endpoint coupling, then midpoint and energy.

    Convergence is measured directly on feasibility: the maximum of the
    L1 errors of the row and column marginals of the current coupling
    against (mu_l, mu_r). Raises ConvergenceFailure (with the residual)
    if the tolerance is not met within ``max_iter`` sweeps.
    """
    states = kernel.support.states
    if mu_l.support.states != states or mu_r.support.states != states:
        raise InvalidInput("bridge endpoints must live on the kernel support")
    if np.any(mu_l.probs == 0) or np.any(mu_r.probs == 0):
        raise InvalidInput("bridge endpoints must be strictly positive (smooth them first)")
    if tol <= 0 or max_iter < 1:
        raise InvalidInput("tol must be positive and max_iter >= 1")

    R02 = endpoint_reference(kernel)
    if np.any(R02 <= 0):
        raise InvalidInput("endpoint reference must be strictly positive")
    log_Q = np.log(R02)
    log_mu_l = np.log(mu_l.probs)
    log_mu_r = np.log(mu_r.probs)

    log_a = np.zeros(len(states))
    log_b = np.zeros(len(states))
    err = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        log_a = log_mu_l - logsumexp(log_Q + log_b[None, :], axis=1)
        log_b = log_mu_r - logsumexp(log_Q.T + log_a[None, :], axis=1)
        log_gamma = log_a[:, None] + log_Q + log_b[None, :]
        row = np.exp(logsumexp(log_gamma, axis=1))
        col = np.exp(logsumexp(log_gamma, axis=0))
        err = max(
            float(np.abs(row - mu_l.probs).sum()),
            float(np.abs(col - mu_r.probs).sum()),
        )
        if err <= tol:
            break
    if err > tol:
        raise ConvergenceFailure(
            f"bridge scaling stalled at residual {err:.3e} after {iterations} sweeps",
            residual=err,
            iterations=iterations,
        )

    # Canonical gauge: sum_s pi(s) log a(s) = 0 makes (a, b) comparable
    # across runs; gamma and all derived quantities are gauge-invariant.
    shift = float(np.dot(kernel.pi.probs, log_a))
    log_a = log_a - shift
    log_b = log_b + shift

    gamma = np.exp(log_a[:, None] + log_Q + log_b[None, :])
    energy = float(np.sum(gamma * (log_a[:, None] + log_b[None, :])))

    log_pi = np.log(kernel.pi.probs)
    log_K = np.log(kernel.K)
    log_f = logsumexp(log_a[:, None] + log_pi[:, None] + log_K, axis=0)
    log_g = logsumexp(log_K + log_b[None, :], axis=1)
    midpoint = np.exp(log_f + log_g)
    midpoint = midpoint / midpoint.sum()

    return BridgeSolution(
        a=np.exp(log_a),
        b=np.exp(log_b),
        log_a=log_a,
        log_b=log_b,
        gamma=gamma,
        midpoint=Belief(kernel.support, midpoint),
        energy=energy,
        iterations=iterations,
        marginal_error=err,
    )


def bridge_energy(
    sol: BridgeSolution,
    kernel: NeutralKernel,
    mu_l: Belief,
    mu_r: Belief,
) -> tuple[float, float]:
    """Bridge energy in its two equivalent forms.

    ``direct`` evaluates KL(gamma || R02) entrywise; ``dual`` is the
    potential form sum(mu_l log a) + sum(mu_r log b), which is invariant
    to the scaling gauge. The two agree up to the marginal residual.
    """
    R02 = endpoint_reference(kernel)
    direct = float(np.sum(sol.gamma * np.log(sol.gamma / R02)))
    dual = float(np.dot(mu_l.probs, sol.log_a) + np.dot(mu_r.probs, sol.log_b))
    return direct, dual
