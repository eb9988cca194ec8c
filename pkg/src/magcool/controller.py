"""Adaptive choice of pulse parameters from the current belief.

Each measurement uses a Gaussian flip-probability curve whose width is a
fixed multiple of the current belief width (width_factor) and whose center
is offset from the belief mode so that the flipped outcome occurs with a
fixed target probability.  Keeping that probability below one half and the
profile wider than the belief suppresses the secondary peak that the
unflipped outcome leaves at the tail of the distribution; alternating the
side of the offset after every unflipped outcome keeps the next profile
clear of that peak.

When readout is imperfect the momentum kick of the unflipped branch would
differ between the two (now ambiguous) outcomes; a hard flip followed by a
drive-free wait of kick/g equalizes the branch kicks at half the calibrated
value, so the controller books kick/2 unconditionally and schedules that
corrective wait after every measurement.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, asdict

from .pulses import PulseSpec, PulseCalibration, gaussian_pulse

__all__ = [
    "ControllerConfig",
    "ControllerState",
    "StepRecord",
    "DetuningUndefinedError",
    "compute_threshold",
    "propose_pulse",
    "register_outcome",
    "should_stop",
    "records_to_csv",
]


class DetuningUndefinedError(ValueError):
    """The target flip probability is unreachable for the chosen widths."""


@dataclass(frozen=True)
class ControllerConfig:
    """Fixed parameters of the adaptive heuristic."""

    width_factor: float = 1.9        # profile width / belief width
    target_up_prob: float = 0.4      # flip probability each pulse aims for
    threshold_sigmas: float = 2.75   # crossing level, in widths below peak
    stop_width_1: float = 0.5        # stop width, first quadrature
    stop_width_2: float = 1 / math.sqrt(2)  # stop width, second quadrature
    readout_fidelity: float = 1.0
    max_steps: int = 200

    def __post_init__(self):
        problems = []
        if not self.width_factor > 1:
            problems.append("width_factor must be > 1")
        if not 0 < self.target_up_prob < 1:
            problems.append("target_up_prob must lie in (0, 1)")
        w = self.width_factor
        if self.target_up_prob * math.sqrt(1 + w**2) / w >= 1:
            problems.append(
                "target_up_prob * sqrt(1 + width_factor^2) / width_factor "
                "must be < 1 for the profile offset to exist")
        if not 0.5 <= self.readout_fidelity <= 1.0:
            problems.append("readout_fidelity must lie in [0.5, 1]")
        if self.stop_width_1 <= 0 or self.stop_width_2 <= 0:
            problems.append("stop widths must be > 0")
        if self.threshold_sigmas < 0:
            problems.append("threshold_sigmas must be >= 0")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class StepRecord:
    """Everything the controller knew and did in one measurement step."""

    step: int
    pulse_center: float
    pulse_width: float
    envelope_sigma: float
    duration: float
    observed: int
    outcome_prob: float
    belief_width: float
    entropy_bits: float
    kl_nats: float
    kick_ledger: float


@dataclass
class ControllerState:
    """Running state of the heuristic for one quadrature."""

    width: float                 # current effective belief width
    mode: float                  # current belief mode location
    threshold: float = 0.0
    sign: float = 1.0            # which side of the mode the profile sits on
    kick_ledger: float = 0.0     # accumulated known momentum displacement
    step: int = 0
    records: list[StepRecord] = field(default_factory=list)


def compute_threshold(width_prev: float, threshold_sigmas: float) -> float:
    """Density level a Gaussian of the previous width has at the chosen offset.

    threshold = peak(width_prev) * exp(-threshold_sigmas^2 / 2).
    """
    if width_prev <= 0:
        raise ValueError("width_prev must be > 0")
    peak = 1.0 / math.sqrt(2 * math.pi * width_prev**2)
    return peak * math.exp(-threshold_sigmas**2 / 2)


def profile_offset(width: float, cfg: ControllerConfig) -> float:
    """Distance of the profile center from the belief mode.

    Solves p_target = integral N(z; mode, width^2) * G(z; center,
    profile_width) dz for the center, where G is the unit-peak Gaussian
    profile of width width_factor * width.
    """
    sigma_i = cfg.width_factor * width
    s2 = width**2 + sigma_i**2
    arg = cfg.target_up_prob * math.sqrt(s2 / sigma_i**2)
    if arg >= 1.0:
        raise DetuningUndefinedError(
            f"target probability {cfg.target_up_prob} is unreachable at "
            f"width_factor {cfg.width_factor} (log argument {arg:.4f} >= 1)")
    return math.sqrt(-2 * s2 * math.log(arg))


def propose_pulse(state: ControllerState, cfg: ControllerConfig,
                  calibration: PulseCalibration) -> PulseSpec:
    """Pulse for the next measurement, from the current belief summary.

    Profile width = width_factor * belief width; center offset from the mode
    by the closed-form detuning, on the side selected by the sign flag; the
    envelope width follows from the calibrated width relation and the
    duration keeps the calibrated ratio.
    """
    if state.width <= 0:
        raise ValueError("state.width must be > 0")
    sigma_i = cfg.width_factor * state.width
    offset = profile_offset(state.width, cfg)
    center = state.mode + state.sign * offset
    return gaussian_pulse(center=center, width=sigma_i, g=calibration.g,
                          alpha=calibration.alpha, ratio=calibration.ratio)


def register_outcome(state: ControllerState, observed: int, pulse: PulseSpec,
                     calibration: PulseCalibration,
                     fidelity: float | None = None) -> float | None:
    """Book the backaction of a finished measurement and steer the heuristic.

    With perfect readout the kick happens only on the unflipped outcome and
    the full calibrated value goes on the ledger.  With imperfect readout
    the equalizing correction (hard flip + wait) runs after every
    measurement, both branches end up displaced by half the calibrated kick,
    and the wait duration kick/g is returned so the caller can apply it to
    the simulation and the time budget.  The profile side flips after every
    observed unflipped outcome.
    """
    if fidelity is None:
        fidelity = 1.0
    kick = calibration.backaction.displacement_for(pulse.duration)
    correction = None
    if fidelity >= 1.0:
        if observed == 0:
            state.kick_ledger += kick
    else:
        state.kick_ledger += kick / 2.0
        correction = kick / calibration.g
    if observed == 0:
        state.sign = -state.sign
    state.step += 1
    return correction


def should_stop(state: ControllerState, cfg: ControllerConfig,
                quadrature: int) -> bool:
    """True once the belief width reached the stop width of this quadrature."""
    stop = cfg.stop_width_1 if quadrature == 1 else cfg.stop_width_2
    return state.width <= stop


def records_to_csv(records: list[StepRecord]) -> str:
    """Render step records as CSV (stable column order, round-trip floats)."""
    buf = io.StringIO()
    fields = ["step", "pulse_center", "pulse_width", "envelope_sigma",
              "duration", "observed", "outcome_prob", "belief_width",
              "entropy_bits", "kl_nats", "kick_ledger"]
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        row = asdict(rec)
        writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v)
                         for k, v in row.items()})
    return buf.getvalue()
