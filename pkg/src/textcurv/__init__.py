"""Text-native curvature fields from two-sided belief distributions.

The library computes flatness certificates (holonomy and CEI) on
context-radius belief grids, the signed bridge-midpoint curvature of a
slot, and curvature-guided controllers for prompt pruning and retrieval
routing. Everything is decoupled from any language model through a
canonical belief-field file format; see the ``textcurv`` CLI.
"""

__version__ = "0.1.0"

from .beliefs import (
    TAIL,
    Belief,
    BeliefField,
    SlotSupport,
    build_support,
    kl,
    pushforward_tail,
    smooth,
    uniform,
)
from .bridge import BridgeSolution, bridge_energy, endpoint_reference, solve_bridge
from .certificates import (
    CeiReport,
    HolonomyReport,
    cei,
    default_ref_state,
    derive_slot_seed,
    holonomy,
    local_shuffle,
    log_odds,
    poe_reconstruct,
    suffix_swap,
)
from .control import (
    PrunePlan,
    RoutePlan,
    SpanPartition,
    curv_prune,
    extract_anchors,
    fanout_mass,
    fixed_partition,
    pivot_chunks,
    routing_map,
    sentence_partition,
    span_score,
)
from .errors import (
    ConvergenceFailure,
    DegenerateReference,
    DivergenceInfinite,
    ExtractionError,
    InvalidInput,
    MassOverflow,
    MissingEmbedding,
    SchemaError,
    TextcurvError,
    ValidationError,
)
from .kernel import (
    CostMatrix,
    NeutralKernel,
    build_kernel,
    cost_from_embeddings,
    default_epsilon,
    fused_affinity,
    tail_geometry,
)
from .synth import (
    SynthSpec,
    gen_ci_field,
    gen_separable_field,
    generate,
    sample_feasible_coupling,
    sample_feasible_couplings,
    uniform_kernel_closed_form,
)
from .texture import (
    CurvatureField,
    SlotCurvature,
    estimate_field,
    free_energy,
    select_positions,
    texture_slot,
)
