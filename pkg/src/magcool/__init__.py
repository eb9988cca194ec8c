"""Adaptive-measurement ground-state cooling of levitated magnets.

A binary magnetic sensor measures the position of a levitated particle
through shaped drive pulses; a grid-based Bayesian estimator and an
adaptive pulse heuristic squeeze both quadratures of an initially thermal
state down to coherent-state width, after which a single trap displacement
extracts the remaining energy.  A block phase-space simulator provides the
ground truth for validation.
"""

__version__ = "0.1.0"

from .physics import (PhysicalParams, ParameterError, coupling_strength,
                      damping_from_heating, echo_quantities, field_expansion,
                      heating_rate, preset, thermal_occupation,
                      transverse_detuning_ratio)
from .pulses import (BackactionCalibration, GaussianProfile, HardProfile,
                     InversionProfile, PulseCalibration, PulseSpec,
                     calibrate_backaction, calibrate_pulse_family,
                     gaussian_envelope, gaussian_pulse, inversion_profile,
                     square_profile_analytic, tls_propagator)
from .bayes import (GridDistribution, WidthEstimate, ImpossibleOutcomeError,
                    ThresholdTooHighError, effective_width,
                    gaussian_width_from_span, kl_to_gaussian, lambert_w_m1,
                    shannon_entropy, thermal_prior, update_imperfect,
                    update_perfect)
from .controller import (ControllerConfig, ControllerState,
                         DetuningUndefinedError, StepRecord, compute_threshold,
                         propose_pulse, register_outcome, should_stop)
from .wigner import (BlockWigner, StepPolicy, GridTooSmallError,
                     SupportOffGridError, displace, evolve_pulse, free_evolve,
                     gs_fidelity, hard_pi_flip, init_thermal,
                     position_marginal, quarter_rotation, readout_and_collapse,
                     reset_tls)
from .protocol import (ProtocolConfig, ProtocolError, QuadratureResult,
                       TrajectoryRecord, correction_sequence, run_protocol,
                       run_single_quadrature, squeeze_quadrature)
from .sweep import (SweepSpec, SweepResult, PointResult, aggregate_trajectories,
                    emit_report, run_sweep)
from .validate import OracleResult, run_validation
