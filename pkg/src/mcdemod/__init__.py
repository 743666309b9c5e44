"""Causal demodulation of signals carried by fast periodic carriers with slowly varying shapes.

The estimate filters ``y R^T`` and ``S R^T`` with a compensated iterated
moving-average kernel and solves the resulting small linear system; its
error is ``O(eps^k)`` for kernel order ``k``.
"""

from ._version import __version__
from .analysis import (
    SweepResult,
    check_appendix_identity,
    convergence_slope,
    kappa_trace,
    l2_error,
    run_sweep,
)
from .carriers import (
    Carrier,
    CarrierBasis,
    DisturbanceSupport,
    backward_difference,
    condition_number,
    masked_basis,
    mean_product,
    benchmark_carrier_basis,
    pwm_carrier,
    zero_mean_primitive,
)
from .config import ConfigError, RunConfig, bundled_config_path, parse_config
from .demod import DemodOutput, DemodSeries, DemodulatorState, demodulate_batch, estimate_mean_product, new_demodulator, push_sample
from .kernels import (
    CompensatedKernel,
    FirTaps,
    PiecewisePolyKernel,
    compensated_kernel,
    compensation_coefficients,
    discretize,
    iterated_kernel,
    kernel_moment,
    polynomial_reproduction_check,
    uniform_kernel,
)
from .siggen import (
    DisturbanceModel,
    EncodedSignals,
    SampledSignal,
    benchmark_disturbance_support,
    benchmark_encoded_signals,
    paper_disturbance_support,
    paper_encoded_signals,
    synthesize,
)
