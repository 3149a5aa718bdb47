"""Physics-based moving-dipole model of 12-lead EKGs.

The heavy lifting lives in the compiled extension; this package re-exports
the public surface: the forward model, MAP fitting, the PPCA baseline,
record I/O plus mask schemes, synthetic data generation, and held-out-RMSE
evaluation helpers.
"""

from ekgdipole._core import (
    ELECTRODE_NAMES,
    HELD_OUT,
    LEAD_NAMES,
    MISSING,
    OBSERVED,
    DegenerateGeometryError,
    EkgRecord,
    FitConfig,
    FitResult,
    InsufficientDataError,
    InvalidConfigError,
    MaskScheme,
    NoHeldOutDataError,
    NoObservedDataError,
    PpcaConfig,
    PpcaFit,
    SynthSpec,
    apply_mask_scheme,
    bootstrap_median,
    default_prior_mean_layout,
    dipole_potential,
    electrode_potentials,
    fit_dipole,
    generate,
    holdout_rmse,
    impute_dipole,
    lead_matrix,
    leads_from_dipole,
    log_joint,
    log_joint_gradient,
    ppca_fit,
    ppca_impute,
    precordial_prior_means,
    read_record,
    write_record,
)

__all__ = [
    "ELECTRODE_NAMES",
    "HELD_OUT",
    "LEAD_NAMES",
    "MISSING",
    "OBSERVED",
    "DegenerateGeometryError",
    "EkgRecord",
    "FitConfig",
    "FitResult",
    "InsufficientDataError",
    "InvalidConfigError",
    "MaskScheme",
    "NoHeldOutDataError",
    "NoObservedDataError",
    "PpcaConfig",
    "PpcaFit",
    "SynthSpec",
    "apply_mask_scheme",
    "bootstrap_median",
    "default_prior_mean_layout",
    "dipole_potential",
    "electrode_potentials",
    "fit_dipole",
    "generate",
    "holdout_rmse",
    "impute_dipole",
    "lead_matrix",
    "leads_from_dipole",
    "log_joint",
    "log_joint_gradient",
    "ppca_fit",
    "ppca_impute",
    "precordial_prior_means",
    "read_record",
    "write_record",
]

__version__ = "0.1.0"
