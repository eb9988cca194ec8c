"""The full cooling protocol: squeeze, rotate, squeeze, displace.

Position measurements narrow the position distribution of an initially
thermal oscillator down to a target width; a quarter turn of phase space
then maps the (still thermal) momentum quadrature onto position, and the
measurement phase repeats.  The remaining state is close to a coherent
state whose center is known from the two belief modes and the booked
momentum kicks, so a final rigid displacement extracts all the remaining
energy.

Two execution modes share the controller and estimator code path:

* ``wigner``: measurement outcomes are sampled from a full phase-space
  simulation of the joint sensor-oscillator state (the expensive,
  validating path, which also yields ground-state fidelities);
* ``bayes``: outcomes are sampled from the belief's own predictive
  probabilities (the fast path used for parameter optimization, where no
  quantum state is propagated).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict, replace as dc_replace

import numpy as np

from . import bayes, wigner
from .bayes import GridDistribution
from .controller import (ControllerConfig, ControllerState, StepRecord,
                         compute_threshold, propose_pulse, register_outcome,
                         should_stop)
from .pulses import (GaussianProfile, PulseCalibration, PulseSpec,
                     calibrate_pulse_family)

__all__ = [
    "ProtocolConfig",
    "QuadratureResult",
    "TrajectoryRecord",
    "ProtocolError",
    "squeeze_quadrature",
    "correction_sequence",
    "run_protocol",
    "run_single_quadrature",
]


class ProtocolError(RuntimeError):
    """A protocol run failed (stop width unreached or belief divergence)."""


@dataclass(frozen=True)
class ProtocolConfig:
    """Physical and algorithmic parameters of one protocol run.

    All rates and times are dimensionless: the coupling is the unit of
    frequency, so ``heating_rate`` and ``trap_frequency`` are quoted in
    units of g and durations in units of 1/g.
    """

    nbar: float = 100.0
    readout_fidelity: float = 1.0
    heating_rate: float = 0.0
    trap_frequency: float = 1.0 / 300.0
    mode: str = "wigner"
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    seed: int = 0
    estimator_points: int = 4096
    sim_points: int = 512
    sim_margin: float = 10.0
    pulse_ratio: float = 10.0
    step_policy: wigner.StepPolicy = field(default_factory=wigner.StepPolicy)
    apply_final_displacement: bool = True
    # Track the simulation in a momentum frame that follows the booked
    # kicks: the kick total can exceed the grid margin over a long run, but
    # it is known to the controller, so removing it from the simulated state
    # is exact bookkeeping (the drive dynamics are translation invariant
    # along momentum; only the weak bath friction notices, at relative order
    # damping * offset * protocol time).
    recenter_momentum: bool = True

    def __post_init__(self):
        problems = []
        if self.mode not in ("wigner", "bayes"):
            problems.append(f"mode must be wigner or bayes, got {self.mode!r}")
        if self.nbar < 0:
            problems.append("nbar must be >= 0")
        if not 0.5 <= self.readout_fidelity <= 1.0:
            problems.append("readout_fidelity must lie in [0.5, 1]")
        if self.heating_rate < 0:
            problems.append("heating_rate must be >= 0")
        if self.trap_frequency <= 0:
            problems.append("trap_frequency must be > 0")
        if self.heating_rate > 0 and self.nbar == 0:
            problems.append("heating needs nbar > 0 (bath occupation)")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def damping(self) -> float:
        """Momentum damping rate gamma = Gamma / nbar of the bath."""
        return self.heating_rate / self.nbar if self.heating_rate > 0 else 0.0


@dataclass
class QuadratureResult:
    """Outcome of squeezing one quadrature.

    ``frame_offset`` is the part of the kick ledger already removed from the
    simulated state by momentum re-centering; ``kick_ledger - frame_offset``
    is the displacement still carried by the state.
    """

    quadrature: int
    records: list[StepRecord]
    belief: GridDistribution
    final_width: float
    final_mode: float
    kick_ledger: float
    duration: float
    initial_entropy_bits: float
    final_entropy_bits: float
    frame_offset: float = 0.0

    @property
    def measurement_count(self) -> int:
        return len(self.records)

    @property
    def residual_ledger(self) -> float:
        return self.kick_ledger - self.frame_offset


def correction_sequence(sim_state: wigner.BlockWigner, pulse: PulseSpec,
                        calibration: PulseCalibration,
                        dissipation: bool = False) -> wigner.BlockWigner:
    """Equalize the branch kicks after an ambiguous readout.

    Hard flip, then a drive-free wait of kick/g: the branch that carried the
    full kick now drifts backward and the clean branch forward, so both meet
    at half the kick.  The sensor is pumped back to down afterwards.
    """
    kick = calibration.backaction.displacement_for(pulse.duration)
    wait = kick / calibration.g
    out = wigner.hard_pi_flip(sim_state)
    out = wigner.free_evolve(out, wait, dissipation=dissipation)
    return wigner.reset_tls(out)


def squeeze_quadrature(sim_state: wigner.BlockWigner | None,
                       prior: GridDistribution,
                       initial_width: float,
                       config: ProtocolConfig,
                       calibration: PulseCalibration,
                       rng: np.random.Generator,
                       quadrature: int,
                       ) -> tuple[wigner.BlockWigner | None, QuadratureResult]:
    """Measure one quadrature down to its stop width.

    Repeats propose -> pulse -> readout -> (correction) -> reset -> belief
    update -> width re-estimate until the estimated width reaches the stop
    value for this quadrature.  In ``bayes`` mode ``sim_state`` is ignored
    and outcomes are drawn from the belief itself.
    """
    cfg = config.controller
    fidelity = config.readout_fidelity
    use_sim = config.mode == "wigner"
    heating = config.heating_rate > 0
    belief = prior
    state = ControllerState(width=initial_width, mode=belief.mode_location())
    duration = 0.0
    frame_offset = 0.0
    s_init = bayes.shannon_entropy(belief)

    stopped = False
    for _ in range(cfg.max_steps + 1):
        if should_stop(state, cfg, quadrature):
            stopped = True
            break
        width_used = state.width
        pulse = propose_pulse(state, cfg, calibration)
        profile = GaussianProfile(center=pulse.center, width=pulse.width)

        if use_sim:
            sim_state = wigner.evolve_pulse(sim_state, pulse,
                                            config.step_policy,
                                            dissipation=heating)
            observed, sim_state = wigner.readout_and_collapse(
                sim_state, fidelity, rng)
        else:
            p_one = bayes.predictive_observed_probability(belief, profile,
                                                          fidelity)
            observed = 1 if rng.random() < p_one else 0

        try:
            belief, p_obs = bayes.update_imperfect(belief, profile, observed,
                                                   fidelity)
        except bayes.ImpossibleOutcomeError as exc:
            raise ProtocolError(
                f"belief diverged from measurements at step {state.step} "
                f"of quadrature {quadrature}: {exc}") from exc

        ledger_before = state.kick_ledger
        correction = register_outcome(state, observed, pulse, calibration,
                                      fidelity)
        duration += pulse.duration
        if correction is not None:
            duration += correction
            if use_sim:
                sim_state = correction_sequence(sim_state, pulse, calibration,
                                                dissipation=heating)
        elif use_sim:
            sim_state = wigner.reset_tls(sim_state)
        if use_sim and config.recenter_momentum:
            booked = state.kick_ledger - ledger_before
            if booked != 0.0:
                sim_state = wigner.displace(sim_state, 0.0, -booked)
                frame_offset += booked

        threshold = compute_threshold(width_used, cfg.threshold_sigmas)
        estimate = bayes.effective_width(belief, threshold)
        belief, _ = bayes.maybe_regrid(belief, estimate,
                                       config.estimator_points)
        state.width = estimate.width
        state.mode = estimate.mode
        state.threshold = threshold

        state.records.append(StepRecord(
            step=state.step,
            pulse_center=pulse.center,
            pulse_width=pulse.width,
            envelope_sigma=pulse.envelope_sigma,
            duration=pulse.duration,
            observed=observed,
            outcome_prob=p_obs,
            belief_width=estimate.width,
            entropy_bits=bayes.shannon_entropy(belief),
            kl_nats=bayes.kl_to_gaussian(belief, estimate.mode,
                                         estimate.width),
            kick_ledger=state.kick_ledger,
        ))

    if not stopped:
        raise ProtocolError(
            f"quadrature {quadrature} did not reach its stop width within "
            f"{cfg.max_steps} measurements (width {state.width:.3g})")

    return sim_state, QuadratureResult(
        quadrature=quadrature,
        records=state.records,
        belief=belief,
        final_width=state.width,
        final_mode=state.mode,
        kick_ledger=state.kick_ledger,
        duration=duration,
        initial_entropy_bits=s_init,
        final_entropy_bits=bayes.shannon_entropy(belief),
        frame_offset=frame_offset,
    )


@dataclass
class TrajectoryRecord:
    """Complete, reproducible record of one protocol run."""

    config: dict
    seed: int
    quadrature_1: QuadratureResult
    quadrature_2: QuadratureResult
    rotation_duration: float
    displacement: tuple[float, float]
    total_time: float
    gs_fidelity: float | None = None
    quad1_marginal_std: float | None = None
    # final simulator variances per quadrature (displacement-invariant)
    final_variances: tuple[float, float] | None = None

    @property
    def entropy_drop_bits(self) -> float:
        """Belief entropy extracted across both quadratures."""
        q1, q2 = self.quadrature_1, self.quadrature_2
        return ((q1.initial_entropy_bits - q1.final_entropy_bits)
                + (q2.initial_entropy_bits - q2.final_entropy_bits))

    @property
    def final_entropy_rel_baseline(self) -> float:
        """Final belief entropy minus that of a width-1/2 Gaussian."""
        return (self.quadrature_2.final_entropy_bits
                - bayes.gaussian_entropy_bits(0.5))

    def step_rows(self) -> list[dict]:
        rows = []
        for result in (self.quadrature_1, self.quadrature_2):
            for rec in result.records:
                row = {"quadrature": result.quadrature}
                row.update(asdict(rec))
                rows.append(row)
        return rows

    def to_dict(self) -> dict:
        def quad(result: QuadratureResult) -> dict:
            return {
                "quadrature": result.quadrature,
                "measurement_count": result.measurement_count,
                "duration": result.duration,
                "final_width": result.final_width,
                "final_mode": result.final_mode,
                "kick_ledger": result.kick_ledger,
                "frame_offset": result.frame_offset,
                "initial_entropy_bits": result.initial_entropy_bits,
                "final_entropy_bits": result.final_entropy_bits,
                "steps": [asdict(r) for r in result.records],
            }

        return {
            "config": self.config,
            "seed": self.seed,
            "quadrature_1": quad(self.quadrature_1),
            "quadrature_2": quad(self.quadrature_2),
            "rotation_duration": self.rotation_duration,
            "displacement": list(self.displacement),
            "total_time": self.total_time,
            "gs_fidelity": self.gs_fidelity,
            "quad1_marginal_std": self.quad1_marginal_std,
            "final_variances": (list(self.final_variances)
                                if self.final_variances else None),
            "entropy_drop_bits": self.entropy_drop_bits,
            "final_entropy_rel_baseline": self.final_entropy_rel_baseline,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _config_echo(config: ProtocolConfig) -> dict:
    out = {
        "nbar": config.nbar,
        "readout_fidelity": config.readout_fidelity,
        "heating_rate": config.heating_rate,
        "trap_frequency": config.trap_frequency,
        "mode": config.mode,
        "seed": config.seed,
        "estimator_points": config.estimator_points,
        "sim_points": config.sim_points,
        "pulse_ratio": config.pulse_ratio,
        "controller": asdict(config.controller),
    }
    return out


def run_protocol(config: ProtocolConfig) -> TrajectoryRecord:
    """Run the three-part protocol for one trajectory.

    Part one squeezes position; a quarter rotation maps momentum onto
    position (with the bath acting through it when heating is on); part one
    repeats on the new position; finally the trap center shifts by the
    negative estimated means of both quadratures.  The displacement uses
    only estimator quantities (modes and booked kicks), never simulator
    truth.
    """
    rng = np.random.default_rng(config.seed)
    calibration = calibrate_pulse_family(g=1.0, ratio=config.pulse_ratio)
    sigma0 = math.sqrt(config.nbar + 0.5)
    use_sim = config.mode == "wigner"

    sim_state = None
    if use_sim:
        axis = wigner.make_axis(config.nbar, config.sim_points,
                                config.sim_margin)
        sim_state = wigner.init_thermal(config.nbar, axis=axis,
                                        damping=config.damping,
                                        bath_occupation=config.nbar)

    prior1 = bayes.thermal_prior(config.nbar,
                                 grid=bayes.default_grid(
                                     sigma0, 0.0, config.estimator_points))
    sim_state, quad1 = squeeze_quadrature(sim_state, prior1, sigma0, config,
                                          calibration, rng, quadrature=1)

    marginal_std = None
    if use_sim:
        marginal_std = math.sqrt(wigner.position_marginal(sim_state)
                                 .normalized().variance())

    rotation_duration = math.pi / (2 * config.trap_frequency)
    if use_sim:
        sim_state = wigner.quarter_rotation(
            sim_state, heating=config.heating_rate > 0,
            trap_frequency=config.trap_frequency)

    # the momentum mean is the booked kick total; in the re-centered frame
    # only the residual not yet removed from the state remains
    prior2_center = quad1.residual_ledger
    prior2 = bayes.thermal_prior(config.nbar,
                                 grid=bayes.default_grid(
                                     sigma0, prior2_center,
                                     config.estimator_points),
                                 center=prior2_center)
    sim_state, quad2 = squeeze_quadrature(sim_state, prior2, sigma0, config,
                                          calibration, rng, quadrature=2)

    d_mu = -quad2.final_mode
    d_nu = quad1.final_mode - quad2.residual_ledger
    fidelity = None
    variances = None
    if use_sim:
        if config.apply_final_displacement:
            sim_state = wigner.displace(sim_state, d_mu, d_nu)
        fidelity = wigner.gs_fidelity(sim_state)
        moments = sim_state.moments()
        variances = (moments["var_mu"], moments["var_nu"])

    total = quad1.duration + quad2.duration + rotation_duration
    return TrajectoryRecord(
        config=_config_echo(config),
        seed=config.seed,
        quadrature_1=quad1,
        quadrature_2=quad2,
        rotation_duration=rotation_duration,
        displacement=(d_mu, d_nu),
        total_time=total,
        gs_fidelity=fidelity,
        quad1_marginal_std=marginal_std,
        final_variances=variances,
    )


def run_single_quadrature(config: ProtocolConfig) -> QuadratureResult:
    """Squeeze the first quadrature only (the optimization workload).

    Runs in ``bayes`` mode regardless of ``config.mode``: this is the pure
    estimator recursion used for parameter sweeps and scaling studies.
    """
    rng = np.random.default_rng(config.seed)
    calibration = calibrate_pulse_family(g=1.0, ratio=config.pulse_ratio)
    sigma0 = math.sqrt(config.nbar + 0.5)
    prior = bayes.thermal_prior(config.nbar,
                                grid=bayes.default_grid(
                                    sigma0, 0.0, config.estimator_points))
    bayes_config = dc_replace(config, mode="bayes")
    _, result = squeeze_quadrature(None, prior, sigma0, bayes_config,
                                   calibration, rng, quadrature=1)
    return result
