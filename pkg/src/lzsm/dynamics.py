"""Time evolution of the coupled right/left states and projective observables.

Raw amplitude evolution runs through the compiled adaptive kernel in
``_dp45``; the Bloch-angle integrators evolve the normalized projective
representation directly.  Angle extraction follows one convention
throughout: theta = 2*atan2(|a|, |b|), phi = arg(a) - arg(b) in (-pi, pi],
mu the log of the raw norm, nu the phase of the lower component continued
without wrapping along a trajectory.

The projective pair integrator closes the feedback through the conserved
biorthogonal overlap, so the norm exponents decouple from the angular
dynamics and divergence of the raw amplitudes never enters the right-hand
side.  Poles of the angle equations are removable in this Cartesian form;
no special-casing near theta = 0 or pi is required.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp

from . import _dp45
from .errors import (
    ConfigError,
    NonFiniteError,
    NotClosedError,
    StepUnderflowError,
    WindowTooShortError,
    ZeroStateError,
)
from .model import BiorthState, ModelParams, biorthogonal_norm, drive_gamma

__all__ = [
    "IntegratorOptions",
    "IntegratorStats",
    "ProjectiveState",
    "Trajectory",
    "BlochTrajectory",
    "BlochPairTrajectory",
    "TrappingClass",
    "TrappingReport",
    "integrate_biorthogonal",
    "project",
    "integrate_bloch_linear",
    "integrate_bloch_nonlinear",
    "asymptotic_circle_z",
    "trapping_metric",
    "geometric_phase",
]

_INIT_NORM_TOL = 1e-12


@dataclass(frozen=True)
class IntegratorOptions:
    """Tunables of the adaptive amplitude integrator.

    max_step_periods caps the step at a fraction of the drive period so the
    controller cannot alias a fast drive during quiet spectral segments.
    stop_at_singular aborts a run once raw |alpha1|^2 crosses singular_cap
    instead of integrating through the divergence (sweeps use this).
    """

    rtol: float = 1e-10
    atol: float = 1e-13
    rescale_threshold: float = 1e6
    singular_cap: float = 1e12
    max_step_periods: float = 0.25
    stop_at_singular: bool = False


@dataclass(frozen=True)
class IntegratorStats:
    steps: int
    rejected: int
    rescales: int
    max_norm_drift: float


def _wrap_angle(x):
    w = np.mod(np.asarray(x) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


@dataclass(frozen=True)
class ProjectiveState:
    """Point of the projective Hilbert space plus the stripped factors.

    The ray is (sin(theta/2)e^{i phi}, cos(theta/2)); mu and nu carry the
    norm exponent and global phase removed from the raw state.
    """

    theta: float
    phi: float
    mu: float = 0.0
    nu: float = 0.0
    t: float = 0.0

    @property
    def z(self) -> float:
        return math.cos(self.theta)

    def amplitudes(self) -> tuple[complex, complex]:
        """Raw (upper, lower) amplitudes e^{mu+i nu}(a~, b~)."""
        scale = np.exp(self.mu + 1j * self.nu)
        return (scale * math.sin(0.5 * self.theta) * np.exp(1j * self.phi),
                scale * math.cos(0.5 * self.theta))

    def ray(self) -> tuple[complex, complex]:
        """Unit-norm spinor including the global phase."""
        phase = np.exp(1j * self.nu)
        return (phase * math.sin(0.5 * self.theta) * np.exp(1j * self.phi),
                phase * math.cos(0.5 * self.theta))


def project(state: BiorthState, side: str = "right") -> ProjectiveState:
    """Decompose one side of a biorthogonal pair into projective angles.

    phi comes out in (-pi, pi] and nu as the principal value of arg(b);
    trajectory-level accessors continue nu across samples instead.
    """
    if side == "right":
        a, b, logscale = state.alpha1, state.beta1, state.logscale_r
    elif side == "left":
        a, b, logscale = state.alpha2, state.beta2, state.logscale_l
    else:
        raise ValueError(f"side must be 'right' or 'left', got {side!r}")
    norm = math.hypot(abs(a), abs(b))
    if norm == 0.0:
        raise ZeroStateError(f"{side} state vanishes, no projective image")
    theta = 2.0 * math.atan2(abs(a), abs(b))
    phi = 0.0 if a == 0 else float(_wrap_angle(np.angle(a) - np.angle(b)))
    return ProjectiveState(
        theta=theta,
        phi=phi,
        mu=math.log(norm) + logscale,
        nu=_wrap_angle(float(np.angle(b))),
        t=state.t,
    )


class Trajectory:
    """Sampled solution of the coupled amplitude equations.

    Stores the rescaled amplitudes with their logscales; raw values are
    e^{logscale} times stored ones.  Projective series for both sides are
    derived lazily with nu continued by unwrapping.
    """

    def __init__(self, params, times, a1, b1, a2, b2, logscale_r, logscale_l,
                 stats, singular_time, options):
        self.params = params
        self.times = times
        self.alpha1 = a1
        self.beta1 = b1
        self.alpha2 = a2
        self.beta2 = b2
        self.logscale_r = logscale_r
        self.logscale_l = logscale_l
        self.stats = stats
        self.singular_time = singular_time
        self.options = options

    def __len__(self) -> int:
        return len(self.times)

    @cached_property
    def norm(self) -> np.ndarray:
        """Biorthogonal bilinear at each sample (conserved at 1)."""
        return (np.conj(self.alpha2) * self.alpha1
                + np.conj(self.beta2) * self.beta1)

    @cached_property
    def norm_drift(self) -> np.ndarray:
        return np.abs(self.norm - 1.0)

    @cached_property
    def feedback(self) -> np.ndarray:
        """w(t), invariant under the joint rescale."""
        return (self.beta1 * np.conj(self.beta2)
                - self.alpha1 * np.conj(self.alpha2))

    @cached_property
    def z(self) -> np.ndarray:
        """Population imbalance cos(theta) of the right state."""
        pa = np.abs(self.alpha1) ** 2
        pb = np.abs(self.beta1) ** 2
        return (pb - pa) / (pb + pa)

    @cached_property
    def raw_pop_a1(self) -> np.ndarray:
        """|alpha1|^2 with the tracked scale restored; may overflow to inf."""
        with np.errstate(over="ignore"):
            return np.exp(2.0 * self.logscale_r) * np.abs(self.alpha1) ** 2

    def _angles(self, a, b, logscale):
        theta = 2.0 * np.arctan2(np.abs(a), np.abs(b))
        phi = _wrap_angle(np.angle(a) - np.angle(b))
        mu = 0.5 * np.log(np.abs(a) ** 2 + np.abs(b) ** 2) + logscale
        nu = np.unwrap(np.angle(b))
        return theta, phi, mu, nu

    @cached_property
    def _right_angles(self):
        return self._angles(self.alpha1, self.beta1, self.logscale_r)

    @cached_property
    def _left_angles(self):
        return self._angles(self.alpha2, self.beta2, self.logscale_l)

    @property
    def right_theta(self) -> np.ndarray:
        return self._right_angles[0]

    @property
    def right_phi(self) -> np.ndarray:
        return self._right_angles[1]

    @property
    def right_mu(self) -> np.ndarray:
        return self._right_angles[2]

    @property
    def right_nu(self) -> np.ndarray:
        return self._right_angles[3]

    @property
    def left_theta(self) -> np.ndarray:
        return self._left_angles[0]

    @property
    def left_phi(self) -> np.ndarray:
        return self._left_angles[1]

    @property
    def left_mu(self) -> np.ndarray:
        return self._left_angles[2]

    @property
    def left_nu(self) -> np.ndarray:
        return self._left_angles[3]

    # alias used by trapping duck-typing on either trajectory kind
    @property
    def theta(self) -> np.ndarray:
        return self.right_theta

    @property
    def phi(self) -> np.ndarray:
        return self.right_phi

    def state(self, i: int) -> BiorthState:
        return BiorthState(
            alpha1=complex(self.alpha1[i]), beta1=complex(self.beta1[i]),
            alpha2=complex(self.alpha2[i]), beta2=complex(self.beta2[i]),
            logscale_r=float(self.logscale_r[i]),
            logscale_l=float(self.logscale_l[i]),
            t=float(self.times[i]),
        )

    def _proj(self, i, angles):
        th, ph, mu, nu = angles
        return ProjectiveState(theta=float(th[i]), phi=float(ph[i]),
                               mu=float(mu[i]), nu=float(nu[i]),
                               t=float(self.times[i]))

    def right_projective(self, i: int) -> ProjectiveState:
        return self._proj(i, self._right_angles)

    def left_projective(self, i: int) -> ProjectiveState:
        return self._proj(i, self._left_angles)


def _balanced_initial(init: BiorthState):
    """Fold unbalanced logscales so that logscale_r + logscale_l = 0.

    The kernel computes the feedback from stored amplitudes, which equals
    the raw bilinear only in the balanced gauge.
    """
    half_sum = 0.5 * (init.logscale_r + init.logscale_l)
    half_diff = 0.5 * (init.logscale_r - init.logscale_l)
    s = math.exp(half_sum)
    y0 = np.array([
        (s * init.alpha1).real, (s * init.alpha1).imag,
        (s * init.beta1).real, (s * init.beta1).imag,
        (s * init.alpha2).real, (s * init.alpha2).imag,
        (s * init.beta2).real, (s * init.beta2).imag,
    ])
    return y0, np.array([half_diff, -half_diff])


def integrate_biorthogonal(params: ModelParams, init: BiorthState,
                           t0: float, t1: float, *,
                           n_samples: int = 1001,
                           sample_times=None,
                           options: IntegratorOptions | None = None,
                           ) -> Trajectory:
    """Evolve the coupled right/left pair from t0 to t1.

    Samples are taken on a uniform grid of n_samples points unless explicit
    sample_times inside [t0, t1] are given.  Divergence of the raw
    amplitudes is handled by joint rescaling and recorded through
    singular_time once raw |alpha1|^2 crosses the cap; it is data, not an
    error.  With stop_at_singular the run ends at that crossing and the
    trajectory is truncated to the samples actually reached.
    """
    opts = options or IntegratorOptions()
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    if not init.is_finite():
        raise ValueError("initial state has non-finite components")
    if abs(biorthogonal_norm(init) - 1.0) > _INIT_NORM_TOL:
        raise ValueError(
            "initial state is not biorthogonally normalized: "
            f"<l|r> = {biorthogonal_norm(init):.6g}")
    if sample_times is None:
        if n_samples < 2:
            raise ValueError("n_samples must be at least 2")
        ts = np.linspace(t0, t1, n_samples)
    else:
        ts = np.asarray(sample_times, dtype=float)
        if ts.ndim != 1 or len(ts) == 0:
            raise ValueError("sample_times must be a nonempty 1-d array")
        if np.any(np.diff(ts) < 0.0):
            raise ValueError("sample_times must be non-decreasing")
        if ts[0] < t0 or ts[-1] > t1:
            raise ValueError("sample_times must lie within [t0, t1]")

    y, ls = _balanced_initial(init)
    out = np.full((len(ts), 10), np.nan)
    scal = np.empty(9)
    code = _dp45.integrate_kernel(
        y, ls, float(t0), float(t1),
        params.delta1, params.delta2, params.c, params.amp, params.omega,
        params.eps0,
        opts.rtol, opts.atol,
        opts.max_step_periods * params.drive_period,
        opts.rescale_threshold, opts.singular_cap,
        opts.stop_at_singular,
        ts, out, 0.0, 0.0, scal)

    t_end = scal[_dp45.S_T_END]
    if code == _dp45.STEP_UNDERFLOW:
        raise StepUnderflowError(
            f"adaptive step fell below 1e-14*(t1-t0) at t = {t_end:.6g}")
    if code == _dp45.NON_FINITE:
        raise NonFiniteError(
            f"state left the representable range at t = {t_end:.6g}")

    keep = ts <= t_end + 1e-12 * max(abs(t_end), 1.0) if \
        code == _dp45.SINGULAR_STOP else np.ones(len(ts), dtype=bool)
    ts = ts[keep]
    out = out[keep]

    stats = IntegratorStats(
        steps=int(scal[_dp45.S_NSTEPS]),
        rejected=int(scal[_dp45.S_NREJECTED]),
        rescales=int(scal[_dp45.S_NRESCALE]),
        max_norm_drift=float(scal[_dp45.S_NORM_DRIFT]),
    )
    sing = scal[_dp45.S_SINGULAR_T]
    return Trajectory(
        params=params,
        times=ts,
        a1=out[:, 0] + 1j * out[:, 1],
        b1=out[:, 2] + 1j * out[:, 3],
        a2=out[:, 4] + 1j * out[:, 5],
        b2=out[:, 6] + 1j * out[:, 7],
        logscale_r=out[:, 8],
        logscale_l=out[:, 9],
        stats=stats,
        singular_time=None if math.isnan(sing) else float(sing),
        options=opts,
    )


class BlochTrajectory:
    """Projective-space solution sampled on a uniform grid."""

    def __init__(self, params, times, theta, phi, mu, nu):
        self.params = params
        self.times = times
        self.theta = theta
        self.phi = phi
        self.mu = mu
        self.nu = nu

    def __len__(self) -> int:
        return len(self.times)

    @property
    def z(self) -> np.ndarray:
        return np.cos(self.theta)

    def state(self, i: int) -> ProjectiveState:
        return ProjectiveState(theta=float(self.theta[i]),
                               phi=float(self.phi[i]),
                               mu=float(self.mu[i]), nu=float(self.nu[i]),
                               t=float(self.times[i]))


class BlochPairTrajectory:
    """Coupled right/left projective solutions plus the feedback series."""

    def __init__(self, right: BlochTrajectory, left: BlochTrajectory,
                 feedback: np.ndarray):
        self.right = right
        self.left = left
        self.feedback = feedback

    @property
    def times(self) -> np.ndarray:
        return self.right.times

    @property
    def z(self) -> np.ndarray:
        return self.right.z


def _chi_from_projective(state: ProjectiveState) -> np.ndarray:
    a, b = state.ray()
    return np.array([a.real, a.imag, b.real, b.imag, state.mu])


def _angles_from_chi(chi_a, chi_b, mu_carried):
    # theta/phi are norm-free; mu picks up the residual norm drift of chi
    theta = 2.0 * np.arctan2(np.abs(chi_a), np.abs(chi_b))
    phi = _wrap_angle(np.angle(chi_a) - np.angle(chi_b))
    mu = mu_carried + 0.5 * np.log(np.abs(chi_a) ** 2 + np.abs(chi_b) ** 2)
    nu = np.unwrap(np.angle(chi_b))
    return theta, phi, mu, nu


def integrate_bloch_linear(params: ModelParams, init: ProjectiveState,
                           t0: float, t1: float, *,
                           n_samples: int = 2001,
                           rtol: float = 1e-10, atol: float = 1e-13,
                           ) -> BlochTrajectory:
    """Angle-space evolution for the linear model (c = 0).

    Integrates the unit spinor chi with the norm-compensated right-hand
    side chi' = -iH chi - mu' chi, mu' = Im<chi|H|chi>, which reproduces
    the polar-angle equations wherever they are regular and stays finite
    at both poles.
    """
    if params.c != 0.0:
        raise ConfigError("integrate_bloch_linear requires c = 0")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    d1, d2 = params.delta1, params.delta2

    def rhs(t, u):
        ca = u[0] + 1j * u[1]
        cb = u[2] + 1j * u[3]
        g = params.amp * math.sin(params.omega * t) + params.eps0
        ha = 0.5 * g * ca + 0.5 * d1 * cb
        hb = 0.5 * d2 * ca - 0.5 * g * cb
        mudot = (np.conj(ca) * ha + np.conj(cb) * hb).imag
        da = -1j * ha - mudot * ca
        db = -1j * hb - mudot * cb
        return [da.real, da.imag, db.real, db.imag, mudot]

    times = np.linspace(t0, t1, n_samples)
    sol = solve_ivp(rhs, (t0, t1), _chi_from_projective(init),
                    t_eval=times, rtol=rtol, atol=atol, method="RK45",
                    max_step=0.25 * params.drive_period)
    if not sol.success:
        raise StepUnderflowError(f"angle-space integration failed: {sol.message}")
    chi_a = sol.y[0] + 1j * sol.y[1]
    chi_b = sol.y[2] + 1j * sol.y[3]
    theta, phi, mu, nu = _angles_from_chi(chi_a, chi_b, sol.y[4])
    return BlochTrajectory(params, times, theta, phi, mu, nu)


def integrate_bloch_nonlinear(params: ModelParams,
                              init_right: ProjectiveState,
                              init_left: ProjectiveState,
                              t0: float, t1: float, *,
                              n_samples: int = 2001,
                              rtol: float = 1e-10, atol: float = 1e-13,
                              ) -> BlochPairTrajectory:
    """Coupled right/left angle-space evolution with the mean-field term.

    The feedback is reconstructed through the conserved overlap,
    w = (b~r b~l* - a~r a~l*) / <chi_l|chi_r>, so the norm exponents feed
    forward only.  Where the overlap collapses the raw model diverges; the
    right-hand side then blows up and the run ends in STEP_UNDERFLOW,
    mirroring the amplitude integrator's singular behavior.
    """
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    d1, d2, c = params.delta1, params.delta2, params.c

    def rhs(t, u):
        car = u[0] + 1j * u[1]
        cbr = u[2] + 1j * u[3]
        cal = u[5] + 1j * u[6]
        cbl = u[7] + 1j * u[8]
        denom = np.conj(cal) * car + np.conj(cbl) * cbr
        if abs(denom) < 1e-300:
            denom = 1e-300
        w = (cbr * np.conj(cbl) - car * np.conj(cal)) / denom
        g = params.amp * math.sin(params.omega * t) + params.eps0
        f = 0.5 * (g + c * w)
        har = f * car + 0.5 * d1 * cbr
        hbr = 0.5 * d2 * car - f * cbr
        mur = (np.conj(car) * har + np.conj(cbr) * hbr).imag
        dar = -1j * har - mur * car
        dbr = -1j * hbr - mur * cbr
        fc = np.conj(f)
        hal = fc * cal + 0.5 * d2 * cbl
        hbl = 0.5 * d1 * cal - fc * cbl
        mul = (np.conj(cal) * hal + np.conj(cbl) * hbl).imag
        dal = -1j * hal - mul * cal
        dbl = -1j * hbl - mul * cbl
        return [dar.real, dar.imag, dbr.real, dbr.imag, mur,
                dal.real, dal.imag, dbl.real, dbl.imag, mul]

    u0 = np.concatenate([_chi_from_projective(init_right),
                         _chi_from_projective(init_left)])
    times = np.linspace(t0, t1, n_samples)
    sol = solve_ivp(rhs, (t0, t1), u0, t_eval=times, rtol=rtol, atol=atol,
                    method="RK45", max_step=0.25 * params.drive_period)
    if not sol.success:
        raise StepUnderflowError(f"angle-space integration failed: {sol.message}")
    car = sol.y[0] + 1j * sol.y[1]
    cbr = sol.y[2] + 1j * sol.y[3]
    cal = sol.y[5] + 1j * sol.y[6]
    cbl = sol.y[7] + 1j * sol.y[8]
    right = BlochTrajectory(params, times,
                            *_angles_from_chi(car, cbr, sol.y[4]))
    left = BlochTrajectory(params, times,
                           *_angles_from_chi(cal, cbl, sol.y[9]))
    overlap = np.conj(cal) * car + np.conj(cbl) * cbr
    feedback = (cbr * np.conj(cbl) - car * np.conj(cal)) / overlap
    return BlochPairTrajectory(right, left, feedback)


def asymptotic_circle_z(k: float) -> float:
    """Latitude z0 = (1-k^2)/(1+k^2) of the late-time circle."""
    if not (np.isfinite(k) and k > 0):
        raise ValueError("k must be a positive real number")
    return (1.0 - k * k) / (1.0 + k * k)


class TrappingClass(Enum):
    JOSEPHSON = -1
    BOUNDARY = 0
    SELF_TRAPPED = 1


@dataclass(frozen=True)
class TrappingReport:
    classification: TrappingClass
    min_z_over_window: float
    boundary_z: float
    window: tuple[float, float]


_TIE_MARGIN = 0.01


def classify_min_z(min_z: float, k: float,
                   tie_margin: float = _TIE_MARGIN) -> TrappingClass:
    """Place a minimum imbalance relative to the k-dependent circle."""
    z0 = asymptotic_circle_z(k)
    if min_z > z0 + tie_margin:
        return TrappingClass.SELF_TRAPPED
    if min_z < z0 - tie_margin:
        return TrappingClass.JOSEPHSON
    return TrappingClass.BOUNDARY


def trapping_metric(traj, k: float | None = None,
                    window: tuple[float, float] | None = None,
                    drive_period: float | None = None,
                    tie_margin: float = _TIE_MARGIN) -> TrappingReport:
    """Classify a trajectory against the self-trapping boundary circle.

    Works on any trajectory exposing times and z; k and the drive period
    default to the attached model parameters.  The window must span at
    least one drive period and be sampled at 100+ points per period.
    """
    times = np.asarray(traj.times, dtype=float)
    z = np.asarray(traj.z, dtype=float)
    params = getattr(traj, "params", None)
    if k is None:
        if params is None:
            raise ValueError("k must be given for trajectories without params")
        k = params.k
    if drive_period is None:
        if params is None:
            raise ValueError("drive_period must be given for trajectories "
                             "without params")
        drive_period = params.drive_period
    if window is None:
        window = (float(times[0]), float(times[-1]))
    t_lo, t_hi = window
    span = t_hi - t_lo
    if span < drive_period * (1.0 - 1e-12):
        raise WindowTooShortError(
            f"window spans {span:.6g}, shorter than one drive period "
            f"{drive_period:.6g}")
    mask = (times >= t_lo) & (times <= t_hi)
    npts = int(np.count_nonzero(mask))
    if npts / (span / drive_period) < 100.0 * (1.0 - 1e-12):
        raise ValueError("window is sampled at fewer than 100 points per "
                         "drive period")
    min_z = float(np.min(z[mask]))
    return TrappingReport(
        classification=classify_min_z(min_z, k, tie_margin),
        min_z_over_window=min_z,
        boundary_z=asymptotic_circle_z(k),
        window=(float(t_lo), float(t_hi)),
    )


def _loop_angles(traj):
    if hasattr(traj, "theta"):
        theta = np.asarray(traj.theta, dtype=float)
        phi = np.asarray(traj.phi, dtype=float)
    else:
        states = list(traj)
        theta = np.array([s.theta for s in states])
        phi = np.array([s.phi for s in states])
    return theta, phi


def geometric_phase(traj, closure_tol: float = 1e-6) -> float:
    """Geometric (Aharonov-Anandan) phase of a closed projective loop.

    Accumulates (1/2)(1 - cos theta) d(phi) along the samples and reduces
    modulo 2*pi.  Closure is checked with the great-circle distance of the
    endpoints, which stays meaningful at the poles where phi is gauge.
    """
    theta, phi = _loop_angles(traj)
    if len(theta) < 3:
        raise ValueError("need at least 3 samples to close a loop")
    gap = math.acos(np.clip(
        math.cos(theta[0]) * math.cos(theta[-1])
        + math.sin(theta[0]) * math.sin(theta[-1]) * math.cos(phi[-1] - phi[0]),
        -1.0, 1.0))
    if gap > closure_tol:
        raise NotClosedError(
            f"loop endpoints are {gap:.3g} apart on the sphere "
            f"(tolerance {closure_tol:.3g})")
    phi_u = np.unwrap(phi)
    val = np.trapezoid(0.5 * (1.0 - np.cos(theta)), phi_u)
    return float(np.mod(val, 2.0 * np.pi))
