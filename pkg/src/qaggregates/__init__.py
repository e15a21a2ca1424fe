"""Absorption spectra and excitation transfer of Holstein ring aggregates by
non-Markovian quantum state diffusion."""

from .bath import (
    BathKernel,
    CalibrationError,
    LorentzianMode,
    SpectralDensity,
    calibrate_delta,
    default_spectral_density,
    evaluate_spectral_density,
    huang_rhys_coupling,
    kernel_from_spectral_density,
)
from .grid import TimeGrid
from .model import (
    AggregateModel,
    InvalidSpecError,
    RingSpec,
    bright_state,
    build_ring,
    electronic_hamiltonian,
    site_state,
)
from .nmqsd import (
    AuxOperatorSet,
    PropagationError,
    StepSizeError,
    TrajectoryResult,
    aux_rhs,
    default_step,
    propagate_batch,
    propagate_linear,
    propagate_nonlinear,
    propagate_zero_noise,
    zofe_master_equation,
)
from .noise import NoiseTrajectory, empirical_covariance, generate_noise
from .observables import (
    AmbiguousPeakError,
    EnsembleFailure,
    EnsembleResult,
    Spectrum,
    absorption_spectrum,
    autocorrelation,
    convergence_probe,
    ensemble_transfer,
    frequency_grid,
    linear_ensemble,
    peak_width,
    spectrum_from_autocorrelation,
    spectrum_moments,
    transfer_fidelity,
)

__version__ = "0.1.0"
