"""Weak-coupling (delta << omega) gauge-frame approximation.

For fast drives the diagonal part of the Hamiltonian can be absorbed into a
phase, leaving slow off-diagonal dynamics driven by Omega(t) = (delta/2) *
exp(i*Phi(t)) with the accumulated phase Phi.  The nonlinear feedback enters
frozen at its initial value, which turns the equations linear.  Over a full
drive cycle Phi advances by 2*pi*(eps0 + c)/omega, so populations build up
resonantly when (eps0 + c)/omega sits near an integer and cancel near a
half-integer; `interference_condition` scores that distance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, StepUnderflowError, WeakCouplingWarning
from .model import ModelParams, TunnelingClass

__all__ = [
    "DiracParams",
    "DiracTrajectory",
    "InterferenceVerdict",
    "PhaseCondition",
    "integrate_dirac",
    "interference_condition",
    "phi_phase",
]

# validity edge of the fast-drive picture; beyond it we warn, not fail
_SOFT_RATIO_LIMIT = 0.1

CONDITION_TOL = 0.05


@dataclass(frozen=True)
class DiracParams:
    """Gauge-frame parameters: a ModelParams plus the sign selector j.

    j = 1 tags the anti-phase case (delta2 < 0), j = 2 the in-phase case
    (delta2 > 0); the lower off-diagonal of the gauge-frame Hamiltonian
    carries the factor (-1)**j.
    """

    params: ModelParams
    j: int

    def __post_init__(self):
        if self.j not in (1, 2):
            raise ConfigError(f"DiracParams.j must be 1 or 2, got {self.j!r}")
        if self.params.delta1 <= 0.0:
            raise ConfigError("DiracParams assumes delta1 > 0")
        want = TunnelingClass.ANTI_PHASE if self.j == 1 else TunnelingClass.IN_PHASE
        if self.params.tunneling_class is not want:
            raise ConfigError(
                f"j={self.j} requires delta2 {'<' if self.j == 1 else '>'} 0, "
                f"got delta2={self.params.delta2}")

    @classmethod
    def from_params(cls, params: ModelParams) -> "DiracParams":
        """Derive j from the sign of delta2."""
        j = 1 if params.delta2 < 0.0 else 2
        return cls(params=params, j=j)

    @property
    def delta(self) -> float:
        return self.params.delta

    @property
    def k(self) -> float:
        return self.params.k

    @property
    def drive_period(self) -> float:
        return self.params.drive_period


def phi_phase(t, params: ModelParams):
    """Accumulated gauge phase Phi(t) = eps0*t - (amp/omega)*cos(omega*t) + c*t.

    The feedback term is frozen at its ground-launch value w = 1.  Accepts
    scalar or array t.
    """
    t = np.asarray(t, dtype=float)
    out = (params.eps0 * t
           - (params.amp / params.omega) * np.cos(params.omega * t)
           + params.c * t)
    return out if out.ndim else float(out)


class DiracTrajectory:
    """Sampled gauge-frame amplitude pair plus the frozen-feedback audit.

    alpha1/beta1 solve the right system, alpha2/beta2 the mirrored (adjoint)
    left system.  `feedback` is beta1*conj(beta2) - alpha1*conj(alpha2),
    constant in the exact dynamics and only approximately constant here;
    `feedback_drift` is its worst excursion from the initial value.
    """

    def __init__(self, dirac_params, times, alpha1, beta1, alpha2, beta2,
                 frozen_feedback):
        self.dirac_params = dirac_params
        self.times = times
        self.alpha1 = alpha1
        self.beta1 = beta1
        self.alpha2 = alpha2
        self.beta2 = beta2
        self.frozen_feedback = frozen_feedback

    def __len__(self) -> int:
        return len(self.times)

    @property
    def params(self) -> ModelParams:
        return self.dirac_params.params

    @property
    def pop_a1(self) -> np.ndarray:
        """|alpha1|^2; equals the raw upper population of the lab frame."""
        return np.abs(self.alpha1) ** 2

    @property
    def pop_b1(self) -> np.ndarray:
        return np.abs(self.beta1) ** 2

    @property
    def feedback(self) -> np.ndarray:
        return (self.beta1 * np.conj(self.beta2)
                - self.alpha1 * np.conj(self.alpha2))

    @property
    def feedback_drift(self) -> float:
        w = self.feedback
        return float(np.max(np.abs(w - w[0])))


def integrate_dirac(dp: DiracParams, init, t0: float, t1: float, *,
                    left_init=None, n_samples: int = 1001,
                    rtol: float = 1e-10, atol: float = 1e-12,
                    frozen_feedback=None) -> DiracTrajectory:
    """Integrate the gauge-frame pair of two-level systems on [t0, t1].

    init is the right-system amplitude pair (alpha1, beta1); left_init
    defaults to the same pair.  The feedback w is frozen at the value
    computed from the initial amplitudes (or at `frozen_feedback` if given),
    entering the phase as c*w*t.  The right system couples through
    kOmega and (-1)**j Omega/k with Omega = (delta/2) e^{i Phi}; the left
    system is its adjoint.  A soft warning fires when delta/omega > 0.1.
    """
    p = dp.params
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    init = np.asarray(init, dtype=complex)
    if init.shape != (2,) or not np.all(np.isfinite(init.view(float))):
        raise ValueError("init must be a finite 2-component complex vector")
    if left_init is None:
        left = init.copy()
    else:
        left = np.asarray(left_init, dtype=complex)
        if left.shape != (2,) or not np.all(np.isfinite(left.view(float))):
            raise ValueError("left_init must be a finite 2-component complex vector")

    if p.delta / p.omega > _SOFT_RATIO_LIMIT:
        warnings.warn(
            f"delta/omega = {p.delta / p.omega:.3g} exceeds {_SOFT_RATIO_LIMIT}; "
            "the weak-coupling picture degrades beyond this ratio",
            WeakCouplingWarning, stacklevel=2)

    if frozen_feedback is None:
        w0 = complex(left[1].conjugate() * init[1] - left[0].conjugate() * init[0])
    else:
        w0 = complex(frozen_feedback)

    half_d1 = 0.5 * p.delta1
    half_d2 = 0.5 * p.delta2
    eps_eff = p.eps0 + p.c * w0          # complex when w0 is
    a_over_w = p.amp / p.omega
    omega = p.omega

    def rhs(t, y):
        phi = eps_eff * t - a_over_w * math.cos(omega * t)
        ep = np.exp(1j * phi)
        em = np.exp(-1j * phi)
        # right pair, then left pair (adjoint system, conjugate phase)
        epl = np.exp(1j * np.conj(phi))
        eml = np.exp(-1j * np.conj(phi))
        return np.array([
            -1j * half_d1 * ep * y[1],
            -1j * half_d2 * em * y[0],
            -1j * half_d2 * epl * y[3],
            -1j * half_d1 * eml * y[2],
        ])

    ts = np.linspace(t0, t1, n_samples)
    y0 = np.array([init[0], init[1], left[0], left[1]], dtype=complex)
    sol = solve_ivp(rhs, (t0, t1), y0, method="RK45", t_eval=ts,
                    rtol=rtol, atol=atol, max_step=0.25 * p.drive_period)
    if not sol.success:
        raise StepUnderflowError(f"gauge-frame integration failed: {sol.message}")

    return DiracTrajectory(dp, sol.t, sol.y[0], sol.y[1], sol.y[2], sol.y[3],
                           frozen_feedback=w0)


class InterferenceVerdict(Enum):
    CONSTRUCTIVE = "constructive"
    DESTRUCTIVE = "destructive"
    NEITHER = "neither"


@dataclass(frozen=True)
class PhaseCondition:
    """Distance of (eps0 + c)/omega from the resonance comb."""

    verdict: InterferenceVerdict
    nearest_d: int
    residue: float


def interference_condition(params: ModelParams, *,
                           condition_tol: float = CONDITION_TOL) -> PhaseCondition:
    """Score the full-cycle phase advance against the resonance comb.

    x = (eps0 + c)/omega close to an integer d gives constructive buildup
    of the interference pattern, close to a half-integer destructive
    cancellation; anything else is NEITHER.
    """
    if not 0.0 < condition_tol < 0.25:
        raise ConfigError("condition_tol must lie in (0, 0.25)")
    x = (params.eps0 + params.c) / params.omega
    d = math.floor(x + 0.5)
    residue = abs(x - d)
    if residue < condition_tol:
        verdict = InterferenceVerdict.CONSTRUCTIVE
    elif residue > 0.5 - condition_tol:
        verdict = InterferenceVerdict.DESTRUCTIVE
    else:
        verdict = InterferenceVerdict.NEITHER
    return PhaseCondition(verdict=verdict, nearest_d=d, residue=residue)
