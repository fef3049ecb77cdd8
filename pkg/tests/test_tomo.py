import math

import numpy as np
import pytest

from oamtomo import tomo
from oamtomo.apparatus import DetectionConfig, InterferometerConfig, balanced_paths, measured_detection
from oamtomo.qubit import PureQubit, pure_to_stokes
from oamtomo.tomo import (
    ErrorBudget,
    FringeFit,
    InsufficientSpanError,
    MeasurementSchedule,
    ScheduleEntry,
    ScheduleError,
    SimulatedDevice,
    benchmark_device,
    calibrate,
    demo_preparation_errors,
    efficiency_budget,
    fidelity_bounds,
    fit_fringe,
    four_point_schedule,
    ideal_device,
    run_tomography,
    standard_efficiency_chain,
    standard_schedule,
)

DEG = math.pi / 180.0


def synthetic_fringe(theta, visibility=1.0, offset=1.0, n=48, noise=None, rng=None):
    alphas = np.arange(n) * (math.pi / n)
    values = offset * (1.0 - visibility * np.cos(2.0 * alphas - theta))
    if noise is not None:
        values = rng.normal(values, noise)
    return list(zip(alphas, values))


def test_fit_fringe_recovers_exact_model():
    fit = fit_fringe(synthetic_fringe(theta=0.0))
    assert fit.theta == pytest.approx(0.0, abs=0.5 * DEG) or fit.theta == pytest.approx(
        2.0 * math.pi, abs=0.5 * DEG
    )
    assert fit.visibility == pytest.approx(1.0, abs=1e-9)
    assert fit.residual < 1e-12


@pytest.mark.parametrize("theta_deg", [-0.1, 86.5, 176.1, 268.6])
def test_fit_fringe_recovers_reported_calibration_angles(theta_deg):
    fit = fit_fringe(synthetic_fringe(theta=theta_deg * DEG, visibility=0.93))
    expected = theta_deg % 360.0
    assert fit.theta / DEG == pytest.approx(expected, abs=1e-6)


def test_fit_fringe_visibility_under_counting_noise():
    rng = np.random.default_rng(21)
    # mean clicks ~ operating rates: 0.03/measurement, 25000 trials/bin
    noise = math.sqrt(0.03 / 25000.0)
    fit = fit_fringe(
        synthetic_fringe(theta=1.0, visibility=0.93, offset=0.03, n=120, noise=noise, rng=rng)
    )
    assert fit.visibility == pytest.approx(0.93, abs=0.02)


def test_fit_fringe_negative_visibility_reports_shifted_theta():
    alphas = np.arange(16) * (math.pi / 16.0)
    values = 1.0 + 0.5 * np.cos(2.0 * alphas)  # minimum at 2a = pi
    fit = fit_fringe(list(zip(alphas, values)))
    assert fit.visibility == pytest.approx(0.5, abs=1e-9)
    assert fit.theta == pytest.approx(math.pi, abs=1e-9)


def test_fit_fringe_span_and_count_validation():
    with pytest.raises(InsufficientSpanError):
        fit_fringe(synthetic_fringe(theta=0.0, n=6))
    alphas = np.linspace(0.0, 0.2 * math.pi, 12)  # less than half a period in 2a
    values = 1.0 - np.cos(2.0 * alphas)
    with pytest.raises(InsufficientSpanError):
        fit_fringe(list(zip(alphas, values)))


def test_calibrate_ideal_device_exact():
    device = SimulatedDevice(
        interferometer=InterferometerConfig(*balanced_paths(leakage=0.0), reference_tap=0.75)
    )
    det = DetectionConfig(mean_photons=1e-4, detector_efficiency=1.0, background_rate=0.0)
    report = calibrate(device, det, exact=True)
    assert report.mean_abs_deviation / DEG < 1e-6
    assert report.mean_visibility > 0.9999
    assert not report.misaligned


def test_calibrate_recovers_projection_angles_with_noise():
    device = benchmark_device(visibility=0.93, leakage=0.0)
    report = calibrate(device, measured_detection(), trials_per_point=25000, seed=7)
    for name, theory in report.theta_theory.items():
        dev = abs(report.deviations[name]) / DEG
        assert dev < 3.0, f"{name} deviates {dev:.2f} deg"
    assert report.mean_abs_deviation / DEG <= 2.2 + 1.6


def test_calibrate_demo_preset_matches_reported_deviation():
    device = benchmark_device(visibility=0.93, leakage=0.0)
    report = calibrate(
        device,
        measured_detection(),
        trials_per_point=25000,
        seed=7,
        preparation_errors=demo_preparation_errors(),
    )
    assert report.mean_abs_deviation / DEG == pytest.approx(2.2, abs=1.6)


def test_calibrate_detects_injected_global_offset():
    device = SimulatedDevice(
        interferometer=InterferometerConfig(*balanced_paths(leakage=0.0), reference_tap=0.75),
        reference_offset=5.0 * DEG,
    )
    det = DetectionConfig(mean_photons=1e-3, detector_efficiency=1.0, background_rate=0.0)
    report = calibrate(device, det, exact=True)
    assert report.mean_abs_deviation / DEG == pytest.approx(5.0, abs=0.1)
    assert report.cross_offset / DEG == pytest.approx(5.0, abs=0.1)


def test_calibrate_flags_low_visibility():
    device = benchmark_device(visibility=0.5, leakage=0.0)
    det = DetectionConfig(mean_photons=1e-3, detector_efficiency=1.0, background_rate=0.0)
    report = calibrate(device, det, exact=True)
    assert report.misaligned


def test_run_tomography_ideal_device_high_fidelity():
    schedule = four_point_schedule(trials_per_point=200000, blocked_trials=200000)
    det = DetectionConfig(mean_photons=0.05, detector_efficiency=1.0, background_rate=0.0)
    result = run_tomography(PureQubit.named("R"), schedule, ideal_device(), det, seed=1)
    assert result.fidelity >= 0.999
    result = run_tomography(PureQubit.named("D"), schedule, ideal_device(), det, seed=2)
    assert result.fidelity >= 0.999


def test_run_tomography_leakage_only_pole_fidelity():
    eps = 0.01
    device = SimulatedDevice(
        interferometer=InterferometerConfig(
            *balanced_paths(efficiency=0.65, leakage=eps), reference_tap=0.75
        )
    )
    det = DetectionConfig(mean_photons=0.6, detector_efficiency=0.5, background_rate=0.0)
    schedule = four_point_schedule(trials_per_point=500000, blocked_trials=10**6)
    result = run_tomography(PureQubit.named("R"), schedule, device, det, seed=3)
    assert result.fidelity == pytest.approx(1.0 - eps, abs=0.003)


def test_run_tomography_probabilities_are_normalized_pairs():
    schedule = four_point_schedule(trials_per_point=50000, blocked_trials=50000)
    result = run_tomography(
        PureQubit.named("H"), schedule, benchmark_device(), measured_detection(), seed=4
    )
    p = result.probabilities
    assert p["R"] + p["L"] == pytest.approx(1.0, abs=1e-12)
    assert p["H"] + p["V"] == pytest.approx(1.0, abs=1e-12)
    assert p["D"] + p["A"] == pytest.approx(1.0, abs=1e-12)


def test_run_tomography_reproducible():
    schedule = four_point_schedule(trials_per_point=20000, blocked_trials=20000)
    kwargs = dict(
        schedule=schedule, device=benchmark_device(), det=measured_detection(), seed=11
    )
    a = run_tomography(PureQubit.named("A"), **kwargs)
    b = run_tomography(PureQubit.named("A"), **kwargs)
    assert a.fidelity == b.fidelity
    assert [r.clicks for r in a.records] == [r.clicks for r in b.records]
    c = run_tomography(PureQubit.named("A"), **{**kwargs, "seed": 12})
    assert [r.clicks for r in c.records] != [r.clicks for r in a.records]


def test_run_tomography_fringe_theta_tracks_input_phase():
    # fringe minimum of the X-port scan sits at 2 alpha_d = phi_in (+ offset)
    device = SimulatedDevice(
        interferometer=InterferometerConfig(*balanced_paths(leakage=0.0), reference_tap=0.75),
        reference_offset=4.0 * DEG,
    )
    det = DetectionConfig(mean_photons=1e-3, detector_efficiency=1.0, background_rate=0.0)
    report = calibrate(device, det, probes=("D",), exact=True)
    expected = (90.0 + 4.0) % 360.0
    assert report.fits["D"].theta / DEG == pytest.approx(expected, abs=0.05)


def test_schedule_validation():
    with pytest.raises(ScheduleError):
        MeasurementSchedule((ScheduleEntry("blocked_L", 10),))
    with pytest.raises(ScheduleError):
        ScheduleEntry("phase", 10)  # missing camera phase
    with pytest.raises(ScheduleError):
        ScheduleEntry("phase", 0, camera_phase=0.0)  # no trials
    with pytest.raises(ScheduleError):
        standard_schedule(n_bins=30)  # misses the quadrature bins
    # minimal valid schedule passes
    four_point_schedule(trials_per_point=1, blocked_trials=1)


def test_fidelity_bounds_formulas_exact():
    bounds = fidelity_bounds(ErrorBudget(visibility=0.99))
    assert bounds.f_max_equatorial == pytest.approx(0.995, abs=1e-12)
    bounds = fidelity_bounds(ErrorBudget(leakage=0.003))
    assert bounds.f_max_poles == pytest.approx(0.997, abs=1e-12)
    offset = 5.0 * DEG
    bounds = fidelity_bounds(ErrorBudget(visibility=1.0, calibration_offset=offset))
    assert bounds.f_max_equatorial == pytest.approx(1.0 - offset**2, abs=1e-12)
    assert offset**2 == pytest.approx(0.0076, abs=2e-4)  # under a percent
    bounds = fidelity_bounds(ErrorBudget(visibility=0.99, coupling_imbalance=0.1))
    assert bounds.visibility_loss_from_imbalance == pytest.approx(0.005, abs=1e-12)
    assert bounds.f_max_equatorial == pytest.approx(0.5 * (1.0 + 0.985), abs=1e-12)


def test_efficiency_budget_examples():
    assert efficiency_budget([0.5, 0.8, 0.8, 0.75]) == pytest.approx(0.24, abs=1e-12)
    assert efficiency_budget([]) == 1.0
    assert efficiency_budget([0.64]) == pytest.approx(0.64, abs=1e-15)
    assert efficiency_budget([0.78]) == pytest.approx(0.78, abs=1e-15)
    assert efficiency_budget(standard_efficiency_chain()) == pytest.approx(0.24, abs=1e-12)
    with pytest.raises(ValueError):
        efficiency_budget([0.5, 1.3])


def test_reconstructed_fidelity_respects_bounds():
    device = benchmark_device()  # V = 0.99, leakage 10^-2.5
    det = measured_detection()
    schedule = four_point_schedule(trials_per_point=500000, blocked_trials=10**6)
    bounds = fidelity_bounds(
        ErrorBudget(visibility=0.99, leakage=10.0**-2.5, calibration_offset=0.0)
    )
    for name in ("R", "L", "H", "V", "D", "A"):
        result = run_tomography(
            PureQubit.named(name), schedule, device, det, seed=17, run_label=name
        )
        cap = bounds.f_max_poles if name in ("R", "L") else bounds.f_max_equatorial
        assert result.fidelity <= cap + 3.0 * result.fidelity_sigma


def test_stokes_sigma_scales_with_trials():
    device = benchmark_device()
    det = measured_detection()
    small = run_tomography(
        PureQubit.named("H"),
        four_point_schedule(trials_per_point=20000, blocked_trials=20000),
        device, det, seed=5,
    )
    large = run_tomography(
        PureQubit.named("H"),
        four_point_schedule(trials_per_point=2000000, blocked_trials=2000000),
        device, det, seed=5,
    )
    assert large.fidelity_sigma < small.fidelity_sigma / 5.0


def test_background_subtraction_flag():
    device = benchmark_device()
    det = measured_detection()
    schedule = four_point_schedule(trials_per_point=200000, blocked_trials=400000)
    raw = run_tomography(PureQubit.named("R"), schedule, device, det, seed=6)
    cleaned = run_tomography(
        PureQubit.named("R"), schedule, device, det, seed=6, subtract_background=True
    )
    assert cleaned.fidelity > raw.fidelity  # removing background sharpens the poles
    assert not raw.rho.physicalized


def test_physicality_projection_flag_recorded():
    device = benchmark_device()
    det = measured_detection()
    schedule = four_point_schedule(trials_per_point=50000, blocked_trials=50000)
    result = run_tomography(
        PureQubit.named("R"), schedule, device, det, seed=8, physicality_projection=True
    )
    assert result.rho.physicalized
    assert min(result.rho.eigenvalues()) >= -1e-10


def test_fringe_fit_validation():
    with pytest.raises(ValueError):
        FringeFit(offset=1.0, visibility=1.2, theta=0.0, residual=0.0)
