"""Mean-field model of a periodically driven nonreciprocal two-level system.

The system couples two amplitudes through independent tunneling strengths
delta1 (upper off-diagonal) and delta2 (lower off-diagonal); their imbalance
makes the Hamiltonian non-Hermitian even though both are real. A mean-field
interaction feeds the instantaneous coherence back into the bias, so the
effective Hamiltonian depends on the state:

    H(state, t) = [[(gamma(t) + c*w)/2,  delta1/2],
                   [delta2/2,  -(gamma(t) + c*w)/2]]

with drive gamma(t) = amp*sin(omega*t) + eps0 and feedback
w = beta1*conj(beta2) - alpha1*conj(alpha2) built from the right state
(alpha1, beta1) and its biorthogonal left partner (alpha2, beta2).

Conventions: hbar = 1, all parameters real, time in units of 1/energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, NonFiniteError


class TunnelingClass(Enum):
    """Sign class of the product delta1*delta2."""

    IN_PHASE = "in_phase"        # delta1*delta2 > 0
    ANTI_PHASE = "anti_phase"    # delta1*delta2 < 0
    DEGENERATE = "degenerate"    # delta1*delta2 == 0


@dataclass(frozen=True)
class ModelParams:
    """Model and drive parameters.

    delta2 = 0 is rejected: the nonreciprocity ratio k = sqrt(|delta1/delta2|)
    must stay defined, and every reported result is parameterized by it.
    """

    delta1: float           # upper tunneling amplitude
    delta2: float           # lower tunneling amplitude, nonzero
    c: float                # mean-field feedback strength
    amp: float              # drive amplitude A
    omega: float            # drive angular frequency, > 0
    eps0: float = 0.0       # static bias offset

    def __post_init__(self):
        for name in ("delta1", "delta2", "c", "amp", "omega", "eps0"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"ModelParams.{name} must be a finite real, got {v!r}")
        if self.delta2 == 0.0:
            raise ConfigError("ModelParams.delta2 must be nonzero (nonreciprocity ratio undefined)")
        if self.omega <= 0.0:
            raise ConfigError(f"ModelParams.omega must be positive, got {self.omega}")

    @property
    def delta(self) -> float:
        """Geometric-mean tunneling scale sqrt(|delta1*delta2|)."""
        return math.sqrt(abs(self.delta1 * self.delta2))

    @property
    def k(self) -> float:
        """Nonreciprocity ratio sqrt(|delta1/delta2|)."""
        return math.sqrt(abs(self.delta1 / self.delta2))

    @property
    def tunneling_class(self) -> TunnelingClass:
        prod = self.delta1 * self.delta2
        if prod > 0.0:
            return TunnelingClass.IN_PHASE
        if prod < 0.0:
            return TunnelingClass.ANTI_PHASE
        return TunnelingClass.DEGENERATE

    @property
    def drive_period(self) -> float:
        return 2.0 * math.pi / self.omega

    @classmethod
    def from_nonreciprocity(cls, delta: float, k: float, c: float, amp: float,
                            omega: float, eps0: float = 0.0,
                            anti_phase: bool = False) -> "ModelParams":
        """Build parameters from the scale delta and ratio k.

        delta1 = k*delta, delta2 = +/- delta/k, so that sqrt(|d1*d2|) = delta
        and sqrt(|d1/d2|) = k exactly. anti_phase selects delta2 < 0.
        """
        if delta < 0 or k <= 0:
            raise ConfigError("need delta >= 0 and k > 0")
        sign = -1.0 if anti_phase else 1.0
        return cls(delta1=k * delta, delta2=sign * delta / k,
                   c=c, amp=amp, omega=omega, eps0=eps0)


def drive_gamma(t, params: ModelParams):
    """Instantaneous bias gamma(t) = amp*sin(omega*t) + eps0.

    Accepts a scalar or ndarray of times.
    """
    return params.amp * np.sin(params.omega * np.asarray(t)) + params.eps0


@dataclass
class BiorthState:
    """Right state (alpha1, beta1), left state (alpha2, beta2), log scales.

    Stored amplitudes are the rescaled ones; the raw right state is
    exp(logscale_r) * (alpha1, beta1) and the raw left state is
    exp(logscale_l) * (alpha2, beta2). Joint rescaling keeps
    logscale_r + logscale_l = 0 along a trajectory, so stored bilinears
    (norm, feedback) track raw values without overflow.
    """

    alpha1: complex
    beta1: complex
    alpha2: complex
    beta2: complex
    logscale_r: float = 0.0
    logscale_l: float = 0.0
    t: float = 0.0

    @classmethod
    def down(cls, t: float = 0.0) -> "BiorthState":
        """Both states in the lower component: the canonical initial state."""
        return cls(0j, 1 + 0j, 0j, 1 + 0j, t=t)

    def right_vector(self) -> np.ndarray:
        return np.array([self.alpha1, self.beta1], dtype=complex)

    def left_vector(self) -> np.ndarray:
        return np.array([self.alpha2, self.beta2], dtype=complex)

    def is_finite(self) -> bool:
        vals = (self.alpha1, self.beta1, self.alpha2, self.beta2,
                self.logscale_r, self.logscale_l)
        return all(np.isfinite(v).all() for v in map(np.asarray, vals))


def biorthogonal_norm(state: BiorthState) -> complex:
    """Raw overlap <psi_l|psi_r> = conj(alpha2)*alpha1 + conj(beta2)*beta1.

    Conserved (equal to 1 for properly normalized states) under the coupled
    right/left evolution, including the non-Hermitian and nonlinear cases.
    """
    stored = (np.conj(state.alpha2) * state.alpha1
              + np.conj(state.beta2) * state.beta1)
    return complex(math.exp(state.logscale_r + state.logscale_l) * stored)


def nonlinear_feedback(state: BiorthState) -> complex:
    """Feedback coherence w = beta1*conj(beta2) - alpha1*conj(alpha2) (raw)."""
    stored = (state.beta1 * np.conj(state.beta2)
              - state.alpha1 * np.conj(state.alpha2))
    return complex(math.exp(state.logscale_r + state.logscale_l) * stored)


@dataclass(frozen=True)
class HamiltonianMatrix:
    """Evaluated mean-field Hamiltonian with the feedback that entered it."""

    matrix: np.ndarray      # 2x2 complex
    gamma: float            # drive value used
    feedback: complex       # w recorded for diagnostics

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))


def hamiltonian_at(state: BiorthState, params: ModelParams, t: float) -> HamiltonianMatrix:
    """Mean-field Hamiltonian at time t for the given biorthogonal state.

    For c = 0 the result is state independent. The left state evolves under
    the conjugate transpose of this matrix.
    """
    if not state.is_finite():
        raise NonFiniteError("biorthogonal state has non-finite amplitudes")
    w = nonlinear_feedback(state)
    if not np.isfinite([w.real, w.imag]).all():
        raise NonFiniteError("nonlinear feedback is non-finite")
    g = float(drive_gamma(t, params))
    diag = 0.5 * (g + params.c * w)
    mat = np.array([[diag, 0.5 * params.delta1],
                    [0.5 * params.delta2, -diag]], dtype=complex)
    return HamiltonianMatrix(matrix=mat, gamma=g, feedback=w)
