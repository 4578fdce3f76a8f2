"""Exception types shared across the package.

Numerical failures raise subclasses of :class:`NumericalError`; bad user input
(parameter values, config files, CLI arguments) raises :class:`ConfigError`.
The CLI maps these onto distinct process exit codes.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid run configuration (unknown key, missing field, bad value)."""


class NumericalError(RuntimeError):
    """Base class for failures of the numerical routines."""


class NonFiniteError(NumericalError):
    """State or coefficient left the representable floating-point range."""


class NoConvergenceError(NumericalError):
    """An iterative refinement failed to reach its residual target."""


class BranchAmbiguityError(NumericalError):
    """Root continuation found two pairings with indistinguishable cost.

    Raised when two distinct assignments of new roots to existing branches
    match in total cost within 1e-12 while assigning genuinely different
    values. Refining the time grid resolves it.
    """


class SelfConsistencySingularError(NumericalError):
    """The self-consistent eigenstate reconstruction hit a singular point.

    The diagonal shift F = gamma*E / (2E + c) is undefined at 2E + c = 0,
    and a biorthogonal eigenpair cannot be normalized where left and right
    vectors are orthogonal (spectral coalescence).
    """


class StepUnderflowError(NumericalError):
    """Adaptive step size collapsed below 1e-14 of the integration span."""


class PoleStallError(NumericalError):
    """Angular dynamics pinned at a Bloch-sphere pole by a degenerate equilibrium.

    Defined for interface completeness: the production integrators evolve a
    normalized spinor rather than angles, so poles are regular points and
    this error is not raised by them.
    """


class ZeroStateError(NumericalError):
    """A zero amplitude vector has no projective representation."""


class NotClosedError(NumericalError):
    """Geometric-phase evaluation was given a trajectory that is not a loop."""


class WindowTooShortError(NumericalError):
    """Trapping classification window spans less than one drive period."""


class WeakCouplingWarning(UserWarning):
    """Parameters outside the validity range of the weak-coupling picture."""
