"""Physical constants, the density closure, changes of variables, and initial data.

The solver evolves perturbation variables (n, u, E, B) measuring deviation
from the equilibrium (background density, zero velocity, zero electric field,
background magnetic field) after an enthalpy-type change of variables.  The
closure ``density_closure(n) = (1 + mu*n)^(1/mu) - 1`` equals the physical
density deviation, and the electrostatic constraint reads
``div E = -nu * closure(n)`` together with ``div B = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import brentq

from .errors import AmplitudeTooLarge, DensityNonpositive, OutOfRange
from .spectral import (
    Field,
    GridSpec,
    divergence,
    l2_norm,
    random_phase_field,
    resolved_part,
)

__all__ = [
    "PhysicalConstants",
    "PerturbationState",
    "CompatibilityReport",
    "density_closure",
    "density_closure_inverse",
    "closure_field",
    "to_perturbation",
    "from_perturbation",
    "make_initial_data",
    "verify_compatibility",
    "solve_gauss_longitudinal",
]


@dataclass(frozen=True)
class PhysicalConstants:
    """Model constants; the reformulated system assumes the starred ones are 1.

    gamma is the adiabatic exponent; pressure_const, relaxation, debye and
    light_speed_inv are carried for the record but must equal one for
    gamma > 1 (the reformulation below is derived in those units).
    n_infty is the background density and b_infty the background magnetic
    field of the equilibrium.
    """

    gamma: float = 5.0 / 3.0
    pressure_const: float = 1.0
    relaxation: float = 1.0
    debye: float = 1.0
    light_speed_inv: float = 1.0
    n_infty: float = 1.0
    b_infty: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.gamma < 1.0:
            raise ValueError("gamma must be >= 1")
        for name in ("pressure_const", "relaxation", "debye", "light_speed_inv", "n_infty"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "b_infty", tuple(float(b) for b in self.b_infty))

    @property
    def mu(self) -> float:
        return (self.gamma - 1.0) / 2.0

    @property
    def nu(self) -> float:
        return 1.0 / math.sqrt(self.gamma)

    def b_infty_vector(self) -> np.ndarray:
        return np.asarray(self.b_infty, dtype=float)

    @property
    def b_infty_is_zero(self) -> bool:
        return all(b == 0.0 for b in self.b_infty)

    def require_normalized(self):
        ones = {"pressure_const", "relaxation", "debye", "light_speed_inv", "n_infty"}
        if self.gamma == 1.0:
            ones -= {"pressure_const", "n_infty"}
        off = [n for n in ones if not math.isclose(getattr(self, n), 1.0)]
        if off:
            raise ValueError(
                f"the reformulated system assumes unit constants; non-unit: {off}"
            )


@dataclass(frozen=True)
class PerturbationState:
    """Perturbation variables at one instant of rescaled time."""

    n: Field
    u: Field
    E: Field
    B: Field
    time: float = 0.0

    def __post_init__(self):
        if self.n.is_vector:
            raise ValueError("n must be scalar")
        for name in ("u", "E", "B"):
            if not getattr(self, name).is_vector:
                raise ValueError(f"{name} must be a 3-vector field")

    @property
    def grid(self) -> GridSpec:
        return self.n.grid

    def fields(self) -> dict[str, Field]:
        return {"n": self.n, "u": self.u, "E": self.E, "B": self.B}


# -- the nonlinear closure -----------------------------------------------------


def density_closure(n, gamma: float):
    """(1 + mu*n)^(2/(gamma-1)) - 1 for gamma > 1; expm1(n) in the log variable
    at gamma = 1.  Strictly increasing with closure(0) = 0."""
    n = np.asarray(n, dtype=float)
    mu = (gamma - 1.0) / 2.0
    if gamma == 1.0:
        out = np.expm1(n)
    else:
        base = 1.0 + mu * n
        if np.any(base <= 0):
            raise DensityNonpositive("1 + mu*n must stay positive")
        if mu == 1.0:
            out = n.copy()  # gamma = 3 collapses the exponent exactly
        else:
            out = np.expm1(np.log1p(mu * n) / mu)
    return float(out) if out.ndim == 0 else out


def density_closure_inverse(y, gamma: float):
    """Closed-form inverse of the closure; requires 1 + y > 0."""
    y = np.asarray(y, dtype=float)
    if np.any(1.0 + y <= 0):
        raise OutOfRange("closure inverse requires 1 + y > 0")
    if gamma == 1.0:
        out = np.log1p(y)
    else:
        mu = (gamma - 1.0) / 2.0
        if mu == 1.0:
            out = y.copy()
        else:
            out = np.expm1(mu * np.log1p(y)) / mu
    return float(out) if out.ndim == 0 else out


def closure_field(n: Field, gamma: float) -> Field:
    """The closure applied pointwise in physical space."""
    return Field.from_physical(n.grid, density_closure(n.physical(), gamma))


# -- change of variables ---------------------------------------------------------


def to_perturbation(
    n_tilde: np.ndarray,
    u_tilde: np.ndarray,
    e_tilde: np.ndarray,
    b_tilde: np.ndarray,
    grid: GridSpec,
    constants: PhysicalConstants,
    time: float = 0.0,
) -> PerturbationState:
    """Map physical-variable samples at physical time t to perturbation variables.

    The rescaled time runs faster by sqrt(gamma); velocity and fields are
    scaled by 1/sqrt(gamma) and the background magnetic field is subtracted.
    """
    constants.require_normalized()
    n_tilde = np.asarray(n_tilde, dtype=float)
    if np.any(n_tilde <= 0):
        raise DensityNonpositive("physical density must be positive")
    ga = constants.gamma
    root = math.sqrt(ga)
    if ga == 1.0:
        n = math.sqrt(constants.pressure_const) * (np.log(n_tilde) - math.log(constants.n_infty))
    else:
        mu = constants.mu
        n = (n_tilde ** mu - 1.0) / mu
    u = np.asarray(u_tilde, dtype=float) / root
    e = np.asarray(e_tilde, dtype=float) / root
    b = np.asarray(b_tilde, dtype=float) / root - constants.b_infty_vector()[:, None, None, None]
    return PerturbationState(
        n=Field.from_physical(grid, n),
        u=Field.from_physical(grid, u),
        E=Field.from_physical(grid, e),
        B=Field.from_physical(grid, b),
        time=time * root,
    )


def from_perturbation(state: PerturbationState, constants: PhysicalConstants):
    """Inverse change of variables; returns physical samples and physical time."""
    constants.require_normalized()
    ga = constants.gamma
    root = math.sqrt(ga)
    n = state.n.physical()
    if ga == 1.0:
        n_tilde = constants.n_infty * np.exp(n / math.sqrt(constants.pressure_const))
    else:
        mu = constants.mu
        base = 1.0 + mu * n
        if np.any(base <= 0):
            raise DensityNonpositive("state violates 1 + mu*n > 0")
        n_tilde = base ** (1.0 / mu)
    u_tilde = state.u.physical() * root
    e_tilde = state.E.physical() * root
    b_tilde = (state.B.physical() + constants.b_infty_vector()[:, None, None, None]) * root
    return {
        "n": n_tilde,
        "u": u_tilde,
        "E": e_tilde,
        "B": b_tilde,
        "time": state.time / root,
    }


# -- initial data -----------------------------------------------------------------


def solve_gauss_longitudinal(source: Field, nu: float) -> np.ndarray:
    """Longitudinal field L with div L = -nu * source, solved per Fourier mode.

    Returns vector coefficients i*k*|k|^-2 * nu * source_hat; the zero mode is
    zero, so the source must have (numerically) zero mean for exact solvability.
    """
    g = source.grid
    k2 = np.where(g.k_squared > 0, g.k_squared, 1.0)
    out = np.empty((3,) + source.coeffs.shape, dtype=np.complex128)
    for a in range(3):
        out[a] = 1j * g.k_axis(a) / k2 * nu * source.coeffs
    out[:, 0, 0, 0] = 0.0
    return out


def _transverse_project(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Remove the longitudinal part: P = I - k k^T / |k|^2 per mode."""
    k2 = np.where(grid.k_squared > 0, grid.k_squared, 1.0)
    kdotv = sum(grid.k_axis(a) * coeffs[a] for a in range(3))
    out = coeffs.copy()
    for a in range(3):
        out[a] -= grid.k_axis(a) * kdotv / k2
    return out


def _shift_to_zero_closure_mean(n_phys: np.ndarray, gamma: float) -> np.ndarray:
    """Shift n by a constant so the pointwise closure has zero spatial mean.

    Needed because div E has zero mean on the torus; the closure is strictly
    increasing, so the shift is unique and small (O(amplitude^2))."""
    if not np.any(n_phys):
        return n_phys
    mu = (gamma - 1.0) / 2.0
    if mu > 0 and float(np.min(1.0 + mu * n_phys)) <= 0.0:
        raise AmplitudeTooLarge("perturbation drives 1 + mu*n nonpositive")
    span = 2.0 * float(np.max(np.abs(n_phys))) + 1e-12
    # shifts must keep 1 + mu*(n + c) positive
    c_floor = -math.inf if mu == 0 else 0.5 * (-(1.0 + mu * float(n_phys.min())) / mu)

    def mean_closure(c):
        return float(np.mean(density_closure(n_phys + c, gamma)))

    a, b = max(-span, c_floor), span
    fa, fb = mean_closure(a), mean_closure(b)
    for _ in range(60):
        if fa * fb <= 0:
            break
        a, b = max(a - span, c_floor), b + span
        fa, fb = mean_closure(a), mean_closure(b)
    c = brentq(mean_closure, a, b, xtol=1e-16, rtol=8.9e-16)
    return n_phys + c


def _envelope_flat_low(rolloff_width: float):
    def env(r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= 1.0, 1.0, np.exp(-(((r - 1.0) / rolloff_width) ** 2)))

    return env


def _envelope_low_freq(s: float, rolloff_k: float):
    a = s - 1.5  # borderline envelope of the decay class with index s

    def env(r):
        r = np.asarray(r, dtype=float)
        core = np.where(r > 0, np.minimum(1.0, np.where(r > 0, r, 1.0)) ** a, 0.0)
        return core * np.exp(-((r / rolloff_k) ** 2))

    return env


def _normalize_max(phys: np.ndarray, target: float) -> np.ndarray:
    m = float(np.max(np.abs(phys)))
    return phys * (target / m) if m > 0 else phys


def make_initial_data(
    kind: str,
    amplitude: float,
    seed: int,
    grid: GridSpec,
    constants: PhysicalConstants,
    s: float = 1.5,
    rolloff_width: float = 0.5,
    rolloff_k: float = 2.0,
    mode: tuple[int, int, int] = (1, 0, 0),
    bump_radius_fraction: float = 0.2,
    include_transverse_e: bool = False,
    normalization: str = "physical",
) -> PerturbationState:
    """Compatible initial data of the requested class.

    Kinds:
      * ``low_freq``: random phases under the borderline spectral envelope of
        the decay class with negative index ``s`` (flat corresponds to s=3/2).
      * ``flat_low``: constant modulus for |k| <= 1 with a Gaussian rolloff
        above; the L1-like endpoint class.
      * ``bump``: compactly supported physical bump, the L^p class.
      * ``single_mode``: one Fourier mode, for exactness tests.

    In every kind the magnetic perturbation is projected exactly transverse
    and the longitudinal electric part is solved from the electrostatic
    constraint; the transverse electric part defaults to zero.

    For the random kinds, ``normalization="physical"`` scales each component
    to max-abs amplitude (solver experiments), while ``"continuum"`` scales
    coefficients like a fixed whole-space datum (n^3/L^3 per unit envelope),
    making the negative-order class norms stable under box refinement.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    if amplitude == 0.0:
        return PerturbationState(
            n=Field.zeros(grid),
            u=Field.zeros(grid, vector=True),
            E=Field.zeros(grid, vector=True),
            B=Field.zeros(grid, vector=True),
        )
    rng = np.random.default_rng(seed)
    ga = constants.gamma

    if kind == "single_mode":
        x, y, z = grid.coordinates()
        kvec = 2.0 * math.pi / grid.box_length * np.asarray(mode, dtype=float)
        phase = kvec[0] * x + kvec[1] * y + kvec[2] * z
        n_phys = amplitude * np.cos(phase)
        # polarizations orthogonal to the mode for u and B
        khat = kvec / np.linalg.norm(kvec)
        trial = np.array([0.0, 0.0, 1.0]) if abs(khat[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        e1 = np.cross(khat, trial)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(khat, e1)
        u_phys = amplitude * (e1[:, None, None, None] * np.cos(phase) + khat[:, None, None, None] * np.sin(phase))
        b_phys = amplitude * e2[:, None, None, None] * np.cos(phase)
        n0 = Field.from_physical(grid, _shift_to_zero_closure_mean(n_phys, ga))
        u0 = Field.from_physical(grid, u_phys)
        b_coeffs = _transverse_project(Field.from_physical(grid, b_phys).coeffs, grid)
        e_t = np.zeros_like(b_coeffs)
    elif kind == "bump":
        x, y, z = grid.coordinates()
        L = grid.box_length
        R = bump_radius_fraction * L
        c = L / 2.0
        rho2 = ((x - c) ** 2 + (y - c) ** 2 + (z - c) ** 2) / R**2
        with np.errstate(divide="ignore", over="ignore"):
            b = np.where(rho2 < 1.0, np.exp(1.0 - 1.0 / np.maximum(1e-300, 1.0 - rho2)), 0.0)
        n0 = Field.from_physical(grid, _shift_to_zero_closure_mean(amplitude * b, ga))
        shifts = [np.roll(b, grid.n // 7 * (a + 1), axis=a) for a in range(3)]
        u0 = Field.from_physical(grid, amplitude * np.stack(shifts))
        braw = Field.from_physical(grid, amplitude * np.stack(shifts[::-1]))
        b_coeffs = _transverse_project(braw.coeffs, grid)
        if include_transverse_e:
            e_t = _transverse_project(
                Field.from_physical(grid, amplitude * np.stack([b, shifts[0], shifts[2]])).coeffs, grid
            )
        else:
            e_t = np.zeros_like(b_coeffs)
    elif kind in {"low_freq", "flat_low"}:
        if normalization not in {"physical", "continuum"}:
            raise ValueError("normalization must be 'physical' or 'continuum'")
        env = _envelope_flat_low(rolloff_width) if kind == "flat_low" else _envelope_low_freq(s, rolloff_k)
        coeff_scale = amplitude * grid.n**3 / grid.box_length**3
        n_f = random_phase_field(grid, rng, env)
        u_f = random_phase_field(grid, rng, env, vector=True)
        b_f = random_phase_field(grid, rng, env, vector=True)
        if normalization == "continuum":
            n0 = Field(grid, coeff_scale * n_f.coeffs)
            n0 = Field.from_physical(grid, _shift_to_zero_closure_mean(n0.physical(), ga))
            u0 = Field(grid, coeff_scale * u_f.coeffs)
            b_coeffs = coeff_scale * _transverse_project(b_f.coeffs, grid)
        else:
            n0 = Field.from_physical(grid, _shift_to_zero_closure_mean(_normalize_max(n_f.physical(), amplitude), ga))
            u0 = Field.from_physical(grid, _normalize_max(u_f.physical(), amplitude))
            b_coeffs = _transverse_project(b_f.coeffs, grid)
            scale = float(np.max(np.abs(Field(grid, b_coeffs).physical())))
            if scale > 0:
                b_coeffs = b_coeffs * (amplitude / scale)
        if include_transverse_e:
            e_t = _transverse_project(random_phase_field(grid, rng, env, vector=True).coeffs, grid)
            if normalization == "continuum":
                e_t = e_t * coeff_scale
            else:
                esc = float(np.max(np.abs(Field(grid, e_t).physical())))
                if esc > 0:
                    e_t = e_t * (amplitude / esc)
        else:
            e_t = np.zeros((3,) + n0.coeffs.shape, dtype=np.complex128)
    else:
        raise ValueError(f"unknown initial-data kind: {kind!r}")

    margin = float(np.min(1.0 + constants.mu * n0.physical()))
    if margin <= 0:
        raise AmplitudeTooLarge(
            f"amplitude {amplitude} drives 1 + mu*n to {margin:.3e}"
        )

    e_long = solve_gauss_longitudinal(closure_field(n0, ga), constants.nu)
    state = PerturbationState(
        n=n0,
        u=u0,
        E=Field(grid, e_t + e_long),
        B=Field(grid, b_coeffs),
    )
    return state


@dataclass(frozen=True)
class CompatibilityReport:
    gauss_residual: float
    divb_residual: float
    positivity_margin: float

    def ok(self, gauss_tol: float = 1e-8, divb_tol: float = 1e-10) -> bool:
        return (
            self.gauss_residual <= gauss_tol
            and self.divb_residual <= divb_tol
            and self.positivity_margin > 0
        )


def verify_compatibility(state: PerturbationState, constants: PhysicalConstants) -> CompatibilityReport:
    """Residuals of the electrostatic and solenoidal constraints, plus positivity.

    The electrostatic functional is evaluated on the resolved band (Nyquist
    planes excluded): the closure is computed pointwise, so it carries Nyquist
    content that no real longitudinal field can match.
    """
    ga = constants.gamma
    closure = resolved_part(closure_field(state.n, ga))
    gauss = l2_norm(divergence(state.E) + constants.nu * closure)
    divb = l2_norm(divergence(state.B))
    margin = float(np.min(1.0 + constants.mu * state.n.physical()))
    return CompatibilityReport(gauss, divb, margin)
