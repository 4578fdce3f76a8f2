"""Driven nonreciprocal two-level systems with mean-field feedback.

Library layout:

- model: parameters, drive, biorthogonal state, mean-field Hamiltonian
- spectrum: level quartic, root classification, regions, eigenstates
- dynamics: raw biorthogonal and projective (Bloch) integrators, trapping,
  geometric phase
- weakcoupling: slow-tunneling interference picture and resonance verdicts
- sweep: 2-d parameter sweeps with masking and deterministic parallelism
- cli: config-driven command line front end and canned figure runs
"""

__version__ = "0.1.0"

from .dynamics import (BlochPairTrajectory, BlochTrajectory, IntegratorOptions,
                       IntegratorStats, ProjectiveState, Trajectory,
                       TrappingClass, TrappingReport, asymptotic_circle_z,
                       geometric_phase, integrate_biorthogonal,
                       integrate_bloch_linear, integrate_bloch_nonlinear,
                       project, trapping_metric)
from .errors import (BranchAmbiguityError, ConfigError, NoConvergenceError,
                     NonFiniteError, NotClosedError, NumericalError,
                     PoleStallError, SelfConsistencySingularError,
                     StepUnderflowError, WeakCouplingWarning,
                     WindowTooShortError, ZeroStateError)
from .model import (BiorthState, HamiltonianMatrix, ModelParams,
                    TunnelingClass, biorthogonal_norm, drive_gamma,
                    hamiltonian_at, nonlinear_feedback)
from .output import (write_bloch_csv, write_grid_csv, write_grid_json,
                     write_grid_ppm, write_spectrum_csv, write_trajectory_csv,
                     write_weak_csv)
from .sweep import (AxisSpec, Observable, SweepGrid, SweepSpec, run_sweep,
                    run_trapping_sweep)
from .spectrum import (BiorthEigenpair, QuarticCoeffs, Region, SpectrumClass,
                       SpectrumPoint, SpectrumTrace, classify_point,
                       eigenpair_residual, eigenstate_for_root,
                       quartic_coeffs, region_classify, region_map,
                       solve_quartic, spectrum_vs_time)
from .weakcoupling import (DiracParams, DiracTrajectory, InterferenceVerdict,
                           PhaseCondition, integrate_dirac,
                           interference_condition, phi_phase)
