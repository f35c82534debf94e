"""Exponential-ansatz solutions of a four-compartment respiratory-epidemic model."""

from .errors import (
    DuplicateMu,
    EpiExactError,
    GuardViolation,
    HorizonOverflow,
    NoConvergence,
    NotARoot,
    NotEquilibriumParameterization,
    SingularDenominator,
    StepUnderflow,
    TrackingBreak,
    ZeroPolynomial,
)
from .integrate import (
    Trajectory,
    VerificationReport,
    default_horizon,
    integrate,
    transverse_growth,
    verify_modeset,
)
from .model import ModelParameters, State, f_of_state, rhs_original, rhs_reduced, to_original
from .search import SweepResult, solve_multi, sweep_constraint
from .solutions import (
    ConstraintReport,
    ModeSet,
    build_modes,
    consistency_check_K4,
    constraint_residuals,
    equilibrium,
    evaluate,
    h_of_t,
    weighted_amplitudes,
)
from .spectrum import (
    QuarticSpectrum,
    RatioVector,
    algebraic_residuals,
    quartic_coefficients,
    ratios_for_mu,
    sign_pattern,
    solve_quartic,
    spectrum_for,
)

__version__ = "0.1.0"
