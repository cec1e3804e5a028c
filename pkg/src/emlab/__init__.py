"""Pseudo-spectral laboratory for a damped electron-fluid/Maxwell system.

The package provides a periodic-box pseudo-spectral solver for the
reformulated perturbation system, an exact per-mode analyzer for its
linearization (the quantitative decay-rate engine), energy/dissipation
monitors, decay-rate regression, and randomized oracles for the
interpolation inequalities the analysis rests on.
"""

from . import analysis, dynamics, energetics, inequalities, linear, model, spectral
from .analysis import (
    DecayFit,
    NormSeries,
    fit_decay,
    nonincreasing_within,
    prior_work_rates,
    s_of_p,
    theoretical_exponent,
)
from .dynamics import SolverConfig, cfl_dt, rhs, simulate, step
from .energetics import (
    acoustic_energy,
    cross_energy_ue,
    dissipation,
    energy,
    grad_norm,
    interactive,
    window_energy,
)
from .linear import (
    ModeSystem,
    QuadratureSpec,
    SpectralProfile,
    decay_report,
    evolve_mode,
    mode_matrix,
    weighted_norm_series,
)
from .model import (
    CompatibilityReport,
    PerturbationState,
    PhysicalConstants,
    density_closure,
    density_closure_inverse,
    from_perturbation,
    make_initial_data,
    to_perturbation,
    verify_compatibility,
)
from .spectral import (
    Field,
    GridSpec,
    LPFamily,
    besov_norm,
    curl,
    differentiate,
    divergence,
    fractional,
    gradient,
    homog_norm,
    l2_norm,
    laplacian,
    lp_block,
    lp_norm,
    neg_sobolev_norm,
    sobolev_norm,
)

__version__ = "0.1.0"
