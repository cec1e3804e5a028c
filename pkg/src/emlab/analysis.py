"""Decay-rate regression and the table of theoretical exponents.

Fits are least squares of log(value) against log(1 + t), matching the
(1 + t)^(-rate) normalization of the targets.  Two verification regimes use
different pass tolerances: fits of the per-mode linear analyzer are sharp
(default 0.08), while nonlinear box runs carry truncation and nonlinear
corrections (default 0.25).  The full whole-space nonlinear rates are not
reproducible at desk scale; see NONREPRODUCIBILITY_STATEMENT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    InsufficientSamples,
    NonpositiveValue,
    POutOfRange,
    RequiresBInftyZero,
    SOutOfRange,
)

__all__ = [
    "NormSeries",
    "DecayFit",
    "fit_decay",
    "ExponentTarget",
    "theoretical_exponent",
    "s_of_p",
    "prior_work_rates",
    "nonincreasing_within",
    "LINEAR_FIT_TOLERANCE",
    "NONLINEAR_FIT_TOLERANCE",
    "NONREPRODUCIBILITY_STATEMENT",
]

LINEAR_FIT_TOLERANCE = 0.08
NONLINEAR_FIT_TOLERANCE = 0.25

NONREPRODUCIBILITY_STATEMENT = (
    "Whole-space algebraic decay of the full nonlinear system is not "
    "reproducible at desk scale: a periodic box self-interacts after one "
    "wraparound horizon (box_length/4 at unit wave speeds) and the discrete "
    "infrared spectrum cannot sustain the continuum low-frequency cascade. "
    "Decay exponents are verified sharply for the linearized per-mode flow "
    f"(tolerance {LINEAR_FIT_TOLERANCE}) and only qualitatively, inside the "
    f"horizon, for the nonlinear solver (tolerance {NONLINEAR_FIT_TOLERANCE})."
)


@dataclass(frozen=True)
class NormSeries:
    """A monitored norm over time with provenance metadata."""

    label: str
    times: np.ndarray
    values: np.ndarray
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.shape != t.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if len(t) >= 2 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        if np.any(v < 0):
            raise ValueError("values must be nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def restrict(self, window: tuple[float, float]) -> "NormSeries":
        lo, hi = window
        m = (self.times >= lo) & (self.times <= hi)
        return NormSeries(self.label, self.times[m], self.values[m], dict(self.metadata))


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    target: float | None = None
    verdict: str | None = None  # "pass" / "fail" when a target is given
    floor_contaminated: bool = False


def fit_decay(
    series: NormSeries,
    window: tuple[float, float] | None = None,
    target: float | None = None,
    tol: float = LINEAR_FIT_TOLERANCE,
    floor: float | None = None,
    min_samples: int = 8,
) -> DecayFit:
    """Least-squares slope of log(value) vs log(1 + t) inside the window.

    ``floor`` marks an additive noise floor: samples below 100x the floor
    contaminate the fit and are flagged.
    """
    if window is None:
        window = (float(series.times[0]), float(series.times[-1]))
    sub = series.restrict(window)
    if len(sub.times) < min_samples:
        raise InsufficientSamples(
            f"{len(sub.times)} samples in window {window}, need >= {min_samples}"
        )
    if np.any(sub.values <= 0.0):
        raise NonpositiveValue("log-log fit requires positive values")
    x = np.log1p(sub.times)
    y = np.log(sub.values)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    contaminated = bool(floor is not None and np.any(sub.values < 100.0 * floor))
    verdict = None
    if target is not None:
        verdict = "pass" if abs(slope - target) <= tol and not contaminated else "fail"
    return DecayFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(min(max(r2, 0.0), 1.0)),
        window=window,
        target=target,
        verdict=verdict,
        floor_contaminated=contaminated,
    )


@dataclass(frozen=True)
class ExponentTarget:
    exponent: float
    min_regularity: int


_ADMISSIBLE = {"full_state", "nuE", "n_only", "n_divu"}


def theoretical_exponent(
    quantity: str, k: int, s: float, b_infty_zero: bool = False
) -> ExponentTarget:
    """Theoretical decay exponent of (1+t) for the order-k norm, plus the
    minimum total regularity the statement requires.

    full_state: -(k+s)/2 at N >= 2k+2+s; nuE: -(k+1+s)/2 at N >= 2k+4+s;
    n_only: -(k+2+s)/2 at N >= 2k+6+s; n_divu: -(k/2+7/4+s) at N >= 2k+10+s,
    the last requiring a zero background magnetic field.
    """
    if quantity not in _ADMISSIBLE:
        raise ValueError(f"unknown quantity {quantity!r}; known: {sorted(_ADMISSIBLE)}")
    if not 0.0 <= s <= 1.5:
        raise SOutOfRange("s must lie in [0, 3/2]")
    if k < 0:
        raise ValueError("k must be nonnegative")
    if quantity == "n_divu" and not b_infty_zero:
        raise RequiresBInftyZero("n_divu rate requires zero background magnetic field")
    if quantity == "full_state":
        return ExponentTarget(-(k + s) / 2.0, math.ceil(2 * k + 2 + s))
    if quantity == "nuE":
        return ExponentTarget(-(k + 1 + s) / 2.0, math.ceil(2 * k + 4 + s))
    if quantity == "n_only":
        return ExponentTarget(-(k + 2 + s) / 2.0, math.ceil(2 * k + 6 + s))
    return ExponentTarget(-(k / 2.0 + 7.0 / 4.0 + s), math.ceil(2 * k + 10 + s))


def s_of_p(p: float) -> float:
    """Negative-regularity index equivalent to L^p data: 3(1/p - 1/2)."""
    if not 1.0 <= p <= 2.0:
        raise POutOfRange("p must lie in [1, 2]")
    return 3.0 * (1.0 / p - 0.5)


def prior_work_rates() -> dict[str, float]:
    """L2 decay rates from earlier small-L1-data analyses of the same system,
    against the improved density rate obtained here for p = 1."""
    return {
        "n": -11.0 / 4.0,
        "uE": -5.0 / 4.0,
        "B": -3.0 / 4.0,
        "this_work_n": -13.0 / 4.0,
    }


def nonincreasing_within(
    times: np.ndarray, values: np.ndarray, slack_per_time: float = 0.01
) -> bool:
    """True when each sample exceeds its successor up to relative slack
    accumulated per unit time (tolerates integrator and sampling wiggle)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    for i in range(len(values) - 1):
        allowed = values[i] * (1.0 + slack_per_time * (times[i + 1] - times[i]))
        if values[i + 1] > allowed + 1e-300:
            return False
    return True
