"""Physical parameters and closed-form conversions for the magnet-sensor setup.

A spherical magnetic particle (radius R, density rho, magnetization M) is
levitated in a harmonic trap of frequency omega_M.  A magnetically sensitive
two-level sensor sits on the trap axis at distance r0 from the trap center.
The dipole field at the sensor, expanded to first order in the particle
displacement, gives a static field B0 and a gradient G; the gradient couples
the sensor splitting to the particle position with strength
g = gamma * G * a0, where a0 = sqrt(hbar / (m * omega_M)) is the zero-point
length.

This module is the only SI-facing surface of the package.  Everything else
works in dimensionless oscillator units (hbar = a0 = 1, time in units of the
inverse coupling 1/g).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import constants

HBAR = constants.hbar
K_B = constants.k
MU_0 = constants.mu_0

# Gyromagnetic ratio of a single electron spin (NV-center-like sensor),
# rad / (s T).
ELECTRON_GYROMAGNETIC = 2 * math.pi * 28.024e9


class ParameterError(ValueError):
    """A physical parameter set violates its validity constraints."""


@dataclass(frozen=True)
class PhysicalParams:
    """SI description of one magnet-plus-sensor configuration.

    ``magnetization`` and ``quality_factor`` may be ``None`` when unknown;
    operations that need them raise :class:`ParameterError`.  ``coupling``
    overrides the dipole-gradient value of g when the magnetization needed
    to derive it is not available (measured couplings are entered here).
    """

    radius: float                      # m
    density: float                     # kg/m^3
    trap_frequency: float              # rad/s
    sensor_distance: float             # m, particle center to sensor
    magnetization: float | None = None  # A/m
    gyromagnetic_ratio: float = ELECTRON_GYROMAGNETIC  # rad/(s T)
    temperature: float = 4.0           # K
    quality_factor: float | None = None
    readout_fidelity: float = 1.0
    coupling: float | None = None      # rad/s, overrides derived g
    label: str = ""

    def __post_init__(self):
        problems = []
        if not self.radius > 0:
            problems.append("radius must be > 0")
        if not self.density > 0:
            problems.append("density must be > 0")
        if not self.trap_frequency > 0:
            problems.append("trap_frequency must be > 0")
        if not self.sensor_distance > self.radius:
            # the sensor must sit outside the particle
            problems.append("sensor_distance must exceed radius")
        if not 0.5 <= self.readout_fidelity <= 1.0:
            problems.append("readout_fidelity must lie in [0.5, 1]")
        if self.temperature < 0:
            problems.append("temperature must be >= 0")
        if self.quality_factor is not None and not self.quality_factor > 0:
            problems.append("quality_factor must be > 0")
        if problems:
            raise ParameterError("; ".join(problems))

    @property
    def mass(self) -> float:
        """Particle mass m = (4/3) pi R^3 rho, kg."""
        return 4.0 / 3.0 * math.pi * self.radius**3 * self.density

    @property
    def zero_point_length(self) -> float:
        """a0 = sqrt(hbar / (m omega_M)), m."""
        return math.sqrt(HBAR / (self.mass * self.trap_frequency))


def field_expansion(params: PhysicalParams) -> tuple[float, float]:
    """Static field and gradient of the dipole field at the sensor.

    Returns ``(B0, G)`` with B0 = 2 mu0 M R^3 / (3 r0^3) and
    G = -2 mu0 M R^3 / r0^4, both in SI units.  The static part only detunes
    the sensor (absorbed in its rotating frame); the gradient provides the
    position coupling.
    """
    if params.magnetization is None:
        raise ParameterError("magnetization is required for field_expansion")
    if params.sensor_distance <= 0:
        raise ParameterError("sensor_distance must be > 0")
    m3 = 2 * MU_0 * params.magnetization * params.radius**3
    b0 = m3 / (3 * params.sensor_distance**3)
    grad = -m3 / params.sensor_distance**4
    return b0, grad


def coupling_strength(params: PhysicalParams) -> float:
    """Position-sensor coupling magnitude g = |gamma G a0| in rad/s.

    Uses the override value when one is set; otherwise derives it from the
    dipole gradient.  The sign convention is handled by the dynamics, so the
    magnitude is returned.
    """
    if params.coupling is not None:
        return abs(params.coupling)
    if params.trap_frequency <= 0:
        raise ParameterError("trap_frequency must be > 0")
    _, grad = field_expansion(params)
    return abs(params.gyromagnetic_ratio * grad * params.zero_point_length)


def thermal_occupation(trap_frequency: float, temperature: float) -> float:
    """Bose occupation of a mode at ``trap_frequency`` (rad/s) and T (K).

    Evaluated as 1/expm1(hbar w / kB T), which stays accurate in the
    classical limit hbar w << kB T where the naive form loses all digits.
    """
    if trap_frequency <= 0:
        raise ParameterError("trap_frequency must be > 0")
    if temperature < 0:
        raise ParameterError("temperature must be >= 0")
    if temperature == 0:
        return 0.0
    x = HBAR * trap_frequency / (K_B * temperature)
    return 1.0 / math.expm1(x)


def heating_rate(temperature: float, quality_factor: float) -> float:
    """Phonon heating rate Gamma = kB T / (hbar Q) in rad/s."""
    if quality_factor <= 0:
        raise ParameterError("quality_factor must be > 0")
    if temperature < 0:
        raise ParameterError("temperature must be >= 0")
    return K_B * temperature / (HBAR * quality_factor)


def damping_from_heating(heating: float, occupation: float) -> float:
    """Momentum damping rate gamma = Gamma / nbar used by the dissipator."""
    if occupation <= 0:
        raise ParameterError("occupation must be > 0")
    return heating / occupation


def transverse_detuning_ratio(max_tilt: float, occupation_xy: float) -> float:
    """Worst-case sensor detuning from transverse modes, relative to g.

    A thermal rotation of the magnetization by at most ``max_tilt`` couples
    the sensor to the transverse center-of-mass modes; their thermal motion
    contributes at most (max_tilt / 2) * sqrt(nbar_xy + 1/2) of the axial
    coupling to the detuning.  Values well below 1 justify the single-mode
    model.
    """
    if max_tilt < 0 or occupation_xy < 0:
        raise ParameterError("max_tilt and occupation_xy must be >= 0")
    return max_tilt / 2.0 * math.sqrt(occupation_xy + 0.5)


# ---------------------------------------------------------------------------
# Named presets: two reference sensor regimes, a shallow-implant one
# (case A: 0.5 um particle, kHz trap) and a deep-implant one (case B: 5 um
# particle, 100 Hz trap).  The couplings are quoted values, not derivable
# from a magnetization, so they are stored as overrides; sensor distances
# are center-to-sensor.
# ---------------------------------------------------------------------------

PRESETS: dict[str, PhysicalParams] = {
    "case-a": PhysicalParams(
        radius=0.5e-6,
        density=7e3,
        trap_frequency=2 * math.pi * 1e3,
        sensor_distance=0.65e-6,
        coupling=2 * math.pi * 148e3,
        label="case-a",
    ),
    "case-b": PhysicalParams(
        radius=5e-6,
        density=7e3,
        trap_frequency=2 * math.pi * 0.1e3,
        sensor_distance=7e-6,
        coupling=2 * math.pi * 6e3,
        label="case-b",
    ),
}


def preset(name: str) -> PhysicalParams:
    """Look up a named parameter preset (``case-a`` or ``case-b``)."""
    try:
        return PRESETS[name]
    except KeyError:
        raise ParameterError(
            f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


def echo_quantities(params: PhysicalParams) -> dict:
    """All derived quantities of a parameter set, SI and dimensionless.

    The dimensionless block states everything in oscillator units
    (hbar = a0 = 1) with time measured in 1/g.
    """
    si: dict[str, float | str | None] = {
        "radius_m": params.radius,
        "density_kg_m3": params.density,
        "mass_kg": params.mass,
        "trap_frequency_rad_s": params.trap_frequency,
        "sensor_distance_m": params.sensor_distance,
        "zero_point_length_m": params.zero_point_length,
        "temperature_K": params.temperature,
    }
    g = None
    try:
        g = coupling_strength(params)
        si["coupling_rad_s"] = g
    except ParameterError:
        si["coupling_rad_s"] = None
    if params.magnetization is not None:
        b0, grad = field_expansion(params)
        si["field_at_sensor_T"] = b0
        si["field_gradient_T_m"] = grad
    nbar = thermal_occupation(params.trap_frequency, params.temperature)
    dimensionless: dict[str, float | None] = {
        "thermal_occupation": nbar,
        "readout_fidelity": params.readout_fidelity,
    }
    if g:
        dimensionless["trap_frequency_over_coupling"] = params.trap_frequency / g
    if params.quality_factor is not None:
        gam = heating_rate(params.temperature, params.quality_factor)
        si["heating_rate_rad_s"] = gam
        dimensionless["heating_over_trap_frequency"] = gam / params.trap_frequency
        if g:
            dimensionless["heating_over_coupling"] = gam / g
    return {"label": params.label, "si": si, "dimensionless": dimensionless}
