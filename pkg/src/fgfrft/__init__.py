"""Fast graph fractional Fourier transform.

Fractional powers ``F^alpha`` of a unitary GFT matrix are approximated by
the truncated series ``sum_{|n|<=L} sinc(alpha - n) F^n`` over a cache of
integer powers, with closed-form derivatives in ``alpha`` for learning
transform orders and spectral filters by gradient descent.
"""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    DomainError,
    FgfrftError,
    MeasurementWarning,
    NumericalError,
    OptimizerError,
    ParameterError,
    ParseError,
    PhaseMarginWarning,
    ShapeError,
    SizeError,
)
from .graph import (
    GftMatrix,
    Graph,
    ShiftOperator,
    build_grid_graph,
    build_knn_graph,
    gft_from_shift,
    phase_margin,
    random_unitary,
    shift_operator,
    synthetic_unitary,
)
from .learn import (
    AdamState,
    CascadeConfig,
    DenoiseConfig,
    adam_step,
    denoise,
    learn_orders,
)
from .metrics import matrix_errors, psnr, ssim
from .transform import (
    FracOperator,
    PowerCache,
    apply_forward,
    apply_inverse,
    build_power_cache,
    eigendecompose_unitary,
    exact_gfrft,
    fgfrft_grad,
    fgfrft_matrix,
    fgfrft_with_grad,
    sinc_coeffs,
)
