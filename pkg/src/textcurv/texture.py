"""Curvature readout: free energy, midpoint gap, kappa, and sparse fields.

Per slot, the signed curvature is

    kappa = 8 * gap / (energy + eps0),

where gap is the midpoint free-energy defect
0.5*(Phi(mu_L) + Phi(mu_R)) - Phi(mu_mid) with Phi(rho) = KL(rho || pi),
and energy is the bridge energy D^2. The factor 8 is the midpoint
normalization of lambda-convexity along a constant-speed path, so kappa
reads as the observed convexity constant. Positive kappa marks focus
(beliefs reconcile into a basin), negative marks fan-out.

Full curvature profiles are estimated sparsely: evaluate a subset of
slots and interpolate per token (nearest neighbor or linear).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .beliefs import Belief, kl
from .bridge import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_bridge
from .errors import InvalidInput
from .kernel import NeutralKernel

DEFAULT_EPS0 = 1e-8
LOW_ENERGY_FACTOR = 10.0
DEFAULT_STRIDE = 4

INTERPOLATIONS = ("nearest", "linear")


@dataclass(frozen=True)
class SlotCurvature:
    """Curvature readout for one slot."""

    slot_id: str
    position: int
    kappa: float
    gap: float
    energy: float
    midpoint: Belief | None
    low_energy: bool = False
    iterations: int = 0


def free_energy(rho: Belief, pi: Belief) -> float:
    """Free energy relative to the stationary law: KL(rho || pi) in nats."""
    return kl(rho, pi)


def texture_slot(
    mu_l: Belief,
    mu_r: Belief,
    kernel: NeutralKernel,
    eps0: float = DEFAULT_EPS0,
    slot_id: str = "",
    position: int = 0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SlotCurvature:
    """Bridge the two boundary beliefs and read off signed curvature.

    Slots with energy below ``LOW_ENERGY_FACTOR * eps0`` are flagged:
    kappa is ill-conditioned there and controllers may ignore them.
    """
    if eps0 <= 0:
        raise InvalidInput(f"eps0 must be positive, got {eps0}")
    sol = solve_bridge(kernel, mu_l, mu_r, tol=tol, max_iter=max_iter)
    phi_l = free_energy(mu_l, kernel.pi)
    phi_r = free_energy(mu_r, kernel.pi)
    phi_mid = free_energy(sol.midpoint, kernel.pi)
    gap = 0.5 * (phi_l + phi_r) - phi_mid
    kappa = 8.0 * gap / (sol.energy + eps0)
    return SlotCurvature(
        slot_id=slot_id,
        position=position,
        kappa=kappa,
        gap=gap,
        energy=sol.energy,
        midpoint=sol.midpoint,
        low_energy=sol.energy < LOW_ENERGY_FACTOR * eps0,
        iterations=sol.iterations,
    )


@dataclass(frozen=True)
class CurvatureField:
    """Sparse per-slot kappa values with a per-token interpolation rule."""

    positions: tuple[int, ...]
    kappas: tuple[float, ...]
    interpolation: str
    length: int

    def token_kappas(self) -> np.ndarray:
        """Interpolated kappa for every token index in [0, length)."""
        pos = np.asarray(self.positions, dtype=np.float64)
        kap = np.asarray(self.kappas, dtype=np.float64)
        t = np.arange(self.length, dtype=np.float64)
        if self.interpolation == "linear":
            return np.interp(t, pos, kap)
        # Nearest neighbor, equidistant ties resolved to the left slot.
        right = np.searchsorted(pos, t, side="left")
        right = np.clip(right, 0, len(pos) - 1)
        left = np.clip(right - 1, 0, len(pos) - 1)
        dist_left = np.abs(t - pos[left])
        dist_right = np.abs(pos[right] - t)
        pick = np.where(dist_left <= dist_right, left, right)
        return kap[pick]

    def kappa_at(self, index: int) -> float:
        if not (0 <= index < self.length):
            raise InvalidInput(f"token index {index} outside [0, {self.length})")
        return float(self.token_kappas()[index])

    def value_prefix_sums(self, w_minus: float, w_plus: float) -> np.ndarray:
        """Prefix sums of v_i = w_minus*[-kappa]_+ + w_plus*[kappa]_+.

        Weights live at the controller level, so the sums are computed on
        demand for whatever (w_minus, w_plus) the controller supplies.
        """
        k = self.token_kappas()
        v = w_minus * np.maximum(-k, 0.0) + w_plus * np.maximum(k, 0.0)
        out = np.zeros(self.length + 1)
        np.cumsum(v, out=out[1:])
        return out


def estimate_field(
    slot_results: Sequence[SlotCurvature],
    length: int,
    interpolation: str = "nearest",
) -> CurvatureField:
    """Assemble a per-token curvature field from sparse slot results."""
    if not slot_results:
        raise InvalidInput("estimate_field needs at least one slot result")
    if interpolation not in INTERPOLATIONS:
        raise InvalidInput(f"interpolation must be one of {INTERPOLATIONS}")
    ordered = sorted(slot_results, key=lambda r: r.position)
    positions = tuple(r.position for r in ordered)
    if len(set(positions)) != len(positions):
        raise InvalidInput("duplicate slot positions in curvature field")
    if positions[0] < 0 or positions[-1] >= length:
        raise InvalidInput("slot positions must lie within [0, length)")
    return CurvatureField(
        positions=positions,
        kappas=tuple(r.kappa for r in ordered),
        interpolation=interpolation,
        length=length,
    )


def select_positions(
    length: int,
    stride: int = DEFAULT_STRIDE,
    extra: Iterable[int] = (),
) -> list[int]:
    """Sparse evaluation grid: every ``stride`` tokens plus extra indices.

    The extra indices are typically sentence-final punctuation positions.
    """
    if stride < 1:
        raise InvalidInput(f"stride must be >= 1, got {stride}")
    chosen = set(range(0, length, stride))
    chosen.update(i for i in extra if 0 <= i < length)
    return sorted(chosen)
