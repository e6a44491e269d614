"""Accumulator-aware post-training quantization with verified overflow
avoidance: greedy error-correcting weight quantization under strict per-dot-
product accumulator budgets (monolithic or tiled), plus an exact-integer
overflow oracle that certifies the result."""

from .bounds import (
    AccumulatorBudget,
    InfeasibleBudgetError,
    l1_budget,
    min_accumulator_bits,
    outer_accumulator_bits,
    strict_limits,
)
from .gpfq import (
    MemoryEfficientOperands,
    gpfq_axe_channel,
    gpfq_channel,
    gpfq_layer,
    gpfq_memory_efficient_precompute,
)
from .numeric import (
    AffineQuantizer,
    Alphabet,
    Rounding,
    calibrate_activations,
    compute_scale,
    weight_quantizers,
)
from .optq import FactorizationError, HessianFactor, optq_prepare, optq_quantize_layer
from .oracle import (
    ExtremeInputs,
    OverflowCertificate,
    UnitCheck,
    brute_force_min_bits,
    extreme_inputs,
    simulate_accumulate,
    verify,
)
from .pipeline import (
    LayerJob,
    LayerReport,
    QuantConfig,
    SweepRow,
    pareto_front,
    quantize_layer,
    reconstruction_error,
    sweep,
    write_sweep_csv,
)
from .projection import ProjectionResult, ep_init, l1_project, range_clip, soft_threshold
from .tensor_io import TensorFormatError, read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AccumulatorBudget",
    "AffineQuantizer",
    "Alphabet",
    "ExtremeInputs",
    "FactorizationError",
    "HessianFactor",
    "InfeasibleBudgetError",
    "LayerJob",
    "LayerReport",
    "MemoryEfficientOperands",
    "OverflowCertificate",
    "ProjectionResult",
    "QuantConfig",
    "Rounding",
    "SweepRow",
    "TensorFormatError",
    "UnitCheck",
    "brute_force_min_bits",
    "calibrate_activations",
    "compute_scale",
    "ep_init",
    "extreme_inputs",
    "gpfq_axe_channel",
    "gpfq_channel",
    "gpfq_layer",
    "gpfq_memory_efficient_precompute",
    "l1_budget",
    "l1_project",
    "min_accumulator_bits",
    "optq_prepare",
    "optq_quantize_layer",
    "outer_accumulator_bits",
    "pareto_front",
    "quantize_layer",
    "range_clip",
    "read_tensor",
    "reconstruction_error",
    "simulate_accumulate",
    "soft_threshold",
    "strict_limits",
    "sweep",
    "verify",
    "weight_quantizers",
    "write_tensor",
    "write_sweep_csv",
]
