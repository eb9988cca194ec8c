import math

import numpy as np
import pytest

from magcool.pulses import (BackactionCalibration, PulseError, PulseSpec,
                            branch_momentum_displacement,
                            calibrate_backaction, calibrate_pulse_family,
                            displacement_during_pulse, envelope_area,
                            gaussian_envelope, gaussian_pulse,
                            inversion_profile, square_profile_analytic,
                            tls_propagator)


def unit_pulse(sp=1.0, ratio=10.0, center=0.0):
    return PulseSpec(center=center, envelope_sigma=sp, duration=ratio * sp)


class TestEnvelope:
    def test_area_is_pi(self):
        # truncation at 10 envelope widths loses < 1e-6 of the pi area
        t, omega = gaussian_envelope(1.0, 10.0, samples=20001)
        area = np.trapezoid(omega, t)
        assert area == pytest.approx(math.pi, rel=1e-6)
        assert envelope_area(1.0, 10.0) == pytest.approx(math.pi, rel=1e-6)

    def test_peak_value(self):
        _, omega = gaussian_envelope(2.0, 20.0, samples=20001)
        assert omega.max() == pytest.approx(
            math.pi / math.sqrt(2 * math.pi * 4.0), rel=1e-10)

    def test_symmetry(self):
        t, omega = gaussian_envelope(1.0, 10.0, samples=2001)
        np.testing.assert_allclose(omega, omega[::-1], rtol=0, atol=1e-15)

    def test_rejects_short_duration(self):
        with pytest.raises(PulseError, match="windows"):
            gaussian_envelope(1.0, 5.0)
        with pytest.raises(PulseError):
            PulseSpec(center=0.0, envelope_sigma=1.0, duration=5.0)


class TestPropagator:
    def test_free_evolution_phases(self):
        # no drive: U = diag(e^{-i g z tau / 2}, e^{+i g z tau / 2})
        pulse = PulseSpec(center=0.0, envelope_sigma=1.0, duration=3.0,
                          kind="square")
        z = np.array([0.5, -1.2, 2.0])

        class Silent(PulseSpec):
            pass

        silent = PulseSpec(center=0.0, envelope_sigma=1.0, duration=3.0,
                           kind="square")
        object.__setattr__(silent, "amplitude", lambda t: np.zeros_like(
            np.asarray(t, dtype=float)))
        object.__setattr__(silent, "amplitude_area", lambda t0, t1: 0.0)
        u = tls_propagator(z, silent, g=1.0)
        expected_up = np.exp(-1j * z * 3.0 / 2)
        np.testing.assert_allclose(u[0, 0], expected_up, atol=1e-9)
        np.testing.assert_allclose(u[1, 1], np.conj(expected_up), atol=1e-9)
        np.testing.assert_allclose(u[0, 1], 0.0, atol=1e-12)

    def test_resonant_pi_pulse_inverts(self):
        pulse = unit_pulse()
        u = tls_propagator(0.0, pulse, g=1.0)
        assert abs(u[0, 1]) ** 2 == pytest.approx(1.0, abs=1e-3)

    def test_unitarity_random(self):
        rng = np.random.default_rng(0)
        for _ in range(3):
            sp = rng.uniform(0.3, 2.0)
            pulse = unit_pulse(sp=sp, center=rng.normal(0, 1))
            z = rng.normal(0, 3, size=7)
            u = tls_propagator(z, pulse, g=1.0)
            for i in range(z.size):
                mat = u[:, :, i]
                defect = np.abs(mat.conj().T @ mat - np.eye(2)).max()
                assert defect < 1e-8

    def test_hard_pulse_is_exact_flip(self):
        pulse = PulseSpec(center=0.0, envelope_sigma=1.0, duration=1.0,
                          kind="hard")
        u = tls_propagator(np.array([0.0, 5.0]), pulse, g=1.0)
        np.testing.assert_allclose(np.abs(u[0, 1]), 1.0)
        np.testing.assert_allclose(np.abs(u[1, 0]), 1.0)


class TestSquareProfile:
    def test_resonance(self):
        assert square_profile_analytic(1.0, 0.0) == pytest.approx(1.0)

    def test_unit_detuning(self):
        # D = Om: I = 1/2 sin^2(pi / sqrt 2)
        expected = 0.5 * math.sin(math.pi / math.sqrt(2)) ** 2
        assert square_profile_analytic(1.0, 1.0, g=1.0) == pytest.approx(
            expected, rel=1e-12)
        assert expected == pytest.approx(0.3165, abs=2e-4)

    def test_far_detuned_bound(self):
        assert square_profile_analytic(1.0, 10.0) <= 1 / 101

    def test_matches_propagator(self):
        amplitude = 1.0
        pulse = PulseSpec(center=0.0, envelope_sigma=1.0,
                          duration=math.pi / amplitude, kind="square")
        z = np.linspace(-5, 5, 101)
        u = tls_propagator(z, pulse, g=1.0)
        numeric = np.abs(u[0, 1]) ** 2
        analytic = square_profile_analytic(amplitude, z, g=1.0)
        assert np.max(np.abs(numeric - analytic)) < 1e-6


class TestInversionProfile:
    def test_alpha_near_calibrated_value(self):
        prof = inversion_profile(unit_pulse(), g=1.0)
        assert prof.alpha == pytest.approx(1.15, abs=0.05)
        assert prof.max_residual < 0.05
        assert prof.gaussian_ok

    def test_complement_sums_to_one(self):
        prof = inversion_profile(unit_pulse(), g=1.0)
        down = 1.0 - prof.prob_up
        np.testing.assert_allclose(prof.prob_up + down, 1.0, rtol=0, atol=0)

    def test_symmetry_about_center(self):
        pulse = unit_pulse(center=1.5)
        prof = inversion_profile(pulse, g=1.0, exact=True)
        # grid is symmetric about the center by construction
        np.testing.assert_allclose(prof.prob_up, prof.prob_up[::-1], atol=1e-6)

    def test_rescaled_matches_exact(self):
        pulse = gaussian_pulse(center=0.7, width=2.0, g=1.0, alpha=1.1274)
        fast = inversion_profile(pulse, g=1.0)
        slow = inversion_profile(pulse, g=1.0, exact=True)
        np.testing.assert_allclose(fast.prob_up, slow.prob_up, atol=2e-4)

    def test_width_scaling_law(self):
        p1 = inversion_profile(unit_pulse(sp=0.7), g=1.0)
        p2 = inversion_profile(unit_pulse(sp=1.4), g=1.0)
        assert p1.fit_width / p2.fit_width == pytest.approx(2.0, rel=0.05)

    def test_square_envelope_flagged_not_gaussian(self):
        pulse = PulseSpec(center=0.0, envelope_sigma=0.3, duration=math.pi,
                          kind="square")
        z = np.linspace(-12, 12, 801)
        prof = inversion_profile(pulse, g=1.0, z_grid=z)
        assert not prof.gaussian_ok
        assert prof.max_residual > 0.05

    def test_grid_must_cover_profile(self):
        with pytest.raises(PulseError, match="span"):
            inversion_profile(unit_pulse(), g=1.0,
                              z_grid=np.linspace(-1, 1, 101))


class TestBackaction:
    def test_up_branch_is_clean_and_down_linear(self):
        cal = calibrate_backaction(unit_pulse(), g=1.0)
        assert np.max(np.abs(cal.up_displacements)) < 1e-4
        assert cal.r_squared > 0.99
        assert cal.slope > 0
        assert abs(cal.intercept) < 1e-3 * cal.down_displacements.max()

    def test_durations_span_a_decade(self):
        cal = calibrate_backaction(unit_pulse(), g=1.0)
        assert cal.durations.max() / cal.durations.min() == pytest.approx(
            10.0, rel=1e-9)

    def test_free_evolution_reference(self):
        # drive-free spin-down branch picks up g t / 2 of momentum
        silent = PulseSpec(center=0.0, envelope_sigma=1.0, duration=4.0,
                           kind="square")
        object.__setattr__(silent, "amplitude", lambda t: np.zeros_like(
            np.asarray(t, dtype=float)))
        object.__setattr__(silent, "amplitude_area", lambda t0, t1: 0.0)
        kick_up, kick_dn = branch_momentum_displacement(
            silent, g=1.0, test_center=0.5, test_width=0.4)
        assert kick_dn == pytest.approx(4.0 / 2, rel=1e-6)

    def test_time_resolved_tracks_reference_late(self):
        curve = displacement_during_pulse(unit_pulse(), g=1.0)
        # early on the down branch follows free evolution; the pulse bends it
        idx = np.searchsorted(curve["time"], 2.0)
        np.testing.assert_allclose(curve["down"][1:idx],
                                   curve["reference"][1:idx], rtol=0.02)
        assert curve["down"][-1] < curve["reference"][-1]

    def test_round_trip_serialization(self):
        cal = calibrate_backaction(unit_pulse(), g=1.0)
        again = BackactionCalibration.from_dict(cal.to_dict())
        assert again.slope == cal.slope
        np.testing.assert_array_equal(again.durations, cal.durations)

    def test_displacement_for_uses_fit(self):
        cal = calibrate_backaction(unit_pulse(), g=1.0)
        assert cal.displacement_for(7.0) == pytest.approx(cal.slope * 7.0)


class TestPulseFamilyCalibration:
    def test_cached_and_consistent(self):
        a = calibrate_pulse_family(g=1.0, ratio=10.0)
        b = calibrate_pulse_family(g=1.0, ratio=10.0)
        assert a is b
        assert a.alpha == pytest.approx(1.15, abs=0.05)
        assert a.backaction.r_squared > 0.99

    def test_gaussian_pulse_inverse_relation(self):
        cal = calibrate_pulse_family(g=1.0, ratio=10.0)
        pulse = gaussian_pulse(center=0.0, width=1.5, g=1.0, alpha=cal.alpha)
        assert pulse.envelope_sigma == pytest.approx(
            1.0 / math.sqrt(2 * cal.alpha * 1.5**2), rel=1e-12)
        assert pulse.duration == pytest.approx(10 * pulse.envelope_sigma)
        # the realized profile width should match the request
        prof = inversion_profile(pulse, g=1.0)
        assert prof.fit_width == pytest.approx(1.5, rel=0.02)

    def test_serialization_round_trip(self):
        from magcool.pulses import PulseCalibration

        cal = calibrate_pulse_family(g=1.0, ratio=10.0)
        again = PulseCalibration.from_dict(cal.to_dict())
        assert again.alpha == cal.alpha
        assert again.backaction.slope == cal.backaction.slope
