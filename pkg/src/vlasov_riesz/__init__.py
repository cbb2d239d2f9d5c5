"""Spectral simulator and blow-up analysis toolkit for the
Vlasov-Riesz(-Fokker-Planck) equation on a truncated periodic phase space."""

__version__ = "0.1.0"

from .blowup import (
    BlowupReport,
    DeltaInfeasibleError,
    InitialFunctionals,
    c_delta,
    c_zero,
    check_mixed,
    check_sigma_positive,
    check_sigma_zero,
    entropy_bound_check,
    functionals_from_closed_form,
    functionals_from_record,
    gronwall_bound,
    gronwall_rate,
    predict_crossing,
)
from .config import ConfigError, RunConfig, load_config, parse_config, serialize_config
from .diagnostics import (
    DataQualityError,
    DiagnosticsRecord,
    compute_record,
    decay_check,
    sobolev_norm,
    support_radius,
)
from .generators import generate_initial
from .grid import DistributionField, GridShapeError, PhaseGrid, integrate_v
from .integrator import (
    IntegratorConfig,
    RunResult,
    run,
    step_acceleration,
    step_fokker_planck,
    step_transport,
)
from .kernels import (
    DivergentKernelError,
    KernelFormError,
    KernelSpec,
    QuadratureToleranceError,
    UnsupportedOrderError,
    force_field,
    interaction_energy,
    kernel_to_multiplier,
    multiplier_to_kernel,
    riesz_normalization,
    riesz_potential,
)
from .profiles import (
    RadialDensity,
    SeparablePhaseDensity,
    bump_profile,
    concentrated_data,
    gaussian_phase_density,
    gaussian_profile,
)

__all__ = [name for name in dir() if not name.startswith("_")]
