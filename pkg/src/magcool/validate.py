"""Fast self-check oracles for a built installation.

Each oracle checks one load-bearing identity against an independent route:
closed forms, analytic Gaussians, or defining equations.  The whole suite
runs in well under a minute and is wired to the ``validate`` CLI
subcommand; any failure is a red flag for the build, not a statistical
fluctuation.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import bayes, wigner
from .pulses import (GaussianProfile, PulseSpec, calibrate_pulse_family,
                     inversion_profile, square_profile_analytic,
                     tls_propagator)

__all__ = ["OracleResult", "run_validation"]


@dataclass
class OracleResult:
    name: str
    passed: bool
    error: float
    tolerance: float
    seconds: float
    detail: str = ""

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<34} error={self.error:.3e} "
                f"tol={self.tolerance:.1e} ({self.seconds:.2f}s) {self.detail}")


def _timed(fn):
    start = time.perf_counter()
    error, tolerance, detail = fn()
    return time.perf_counter() - start, error, tolerance, detail


def _oracle_square_pulse():
    amplitude = 1.0
    pulse = PulseSpec(center=0.0, envelope_sigma=1.0,
                      duration=math.pi / amplitude, kind="square")
    z = np.linspace(-5, 5, 101)
    u = tls_propagator(z, pulse, g=1.0)
    numeric = np.abs(u[0, 1]) ** 2
    closed = square_profile_analytic(amplitude, z, g=1.0)
    return float(np.max(np.abs(numeric - closed))), 1e-6, ""


def _oracle_profile_alpha(expected: float, tol: float):
    cal = calibrate_pulse_family(g=1.0, ratio=10.0)
    err = abs(cal.alpha - expected)
    return err, tol, f"alpha={cal.alpha:.4f} residual={cal.fit_residual:.4f}"


def _oracle_profile_residual():
    pulse = PulseSpec(center=0.0, envelope_sigma=1.0, duration=10.0)
    prof = inversion_profile(pulse, g=1.0)
    return prof.max_residual, 0.05, ""


def _oracle_gaussian_bayes():
    prior = bayes.thermal_prior(0.5, grid=(-10, 10, 4001))  # N(0, 1)
    profile = GaussianProfile(center=0.0, width=1.0)
    posterior, p_up = bayes.update_perfect(prior, profile, 1)
    expected = np.exp(-posterior.z**2) / math.sqrt(math.pi / 2) / math.sqrt(2)
    err_density = float(np.max(np.abs(posterior.density - expected)))
    err_prob = abs(p_up - 1 / math.sqrt(2))
    return max(err_density, err_prob), 1e-8, f"p_up={p_up:.10f}"


def _oracle_imperfect_limits():
    rng = np.random.default_rng(7)
    prior = bayes.thermal_prior(2.0, grid=(-25, 25, 2001))
    worst = 0.0
    for _ in range(5):
        profile = GaussianProfile(center=rng.normal(0, 1),
                                  width=rng.uniform(0.5, 3.0))
        for observed in (0, 1):
            perfect, pp = bayes.update_perfect(prior, profile, observed)
            limit, pl = bayes.update_imperfect(prior, profile, observed, 1.0)
            if not np.array_equal(perfect.density, limit.density) or pp != pl:
                worst = max(worst, float(np.max(np.abs(
                    perfect.density - limit.density))), abs(pp - pl))
            flat, pf = bayes.update_imperfect(prior, profile, observed, 0.5)
            worst = max(worst, float(np.max(np.abs(flat.density
                                                   - prior.density))))
            worst = max(worst, abs(pf - 0.5))
    return worst, 1e-12, ""


def _oracle_lambert_roundtrip():
    worst = 0.0
    for sigma in np.geomspace(1e-3, 1e3, 13):
        span = 3.0 * sigma
        theta = (math.exp(-(span / 2) ** 2 / (2 * sigma**2))
                 / math.sqrt(2 * math.pi * sigma**2))
        rec = bayes.gaussian_width_from_span(span, theta)
        worst = max(worst, abs(rec - sigma) / sigma)
    return worst, 1e-9, ""


def _oracle_fidelity_identities():
    worst = 0.0
    state = wigner.init_thermal(0.0, points=256)
    worst = max(worst, abs(wigner.gs_fidelity(state) - 1.0))
    state = wigner.init_thermal(1.0, points=256)
    worst = max(worst, abs(wigner.gs_fidelity(state) - 0.5))
    state = wigner.init_thermal(0.0, points=256)
    state = wigner.displace(state, 1.0, -0.5)
    expected = math.exp(-(1.0**2 + 0.5**2) / 2)
    worst = max(worst, abs(wigner.gs_fidelity(state) - expected))
    return worst, 1e-3, ""


def run_validation(alpha_expected: float = 1.15,
                   alpha_tol: float = 0.05) -> list[OracleResult]:
    """Run every oracle; returns one result row per oracle.

    ``alpha_expected`` exists so a fault can be injected on purpose (ask for
    alpha = 2.0 and the profile oracle must fail); production callers leave
    the default.
    """
    oracles = [
        ("square-pulse closed form", _oracle_square_pulse),
        ("profile width constant",
         lambda: _oracle_profile_alpha(alpha_expected, alpha_tol)),
        ("profile gaussian residual", _oracle_profile_residual),
        ("gaussian-product update", _oracle_gaussian_bayes),
        ("readout-fidelity limits", _oracle_imperfect_limits),
        ("width round trip", _oracle_lambert_roundtrip),
        ("fidelity identities", _oracle_fidelity_identities),
    ]
    results = []
    for name, fn in oracles:
        seconds, error, tolerance, detail = _timed(fn)
        results.append(OracleResult(name=name, passed=error <= tolerance,
                                    error=error, tolerance=tolerance,
                                    seconds=seconds, detail=detail))
    return results
