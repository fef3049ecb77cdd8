import math

import numpy as np
import pytest

from oamtomo import apparatus as ap
from oamtomo.apparatus import (
    CountRecord,
    DetectionConfig,
    InterferometerConfig,
    ProjectorPath,
    balanced_paths,
    click_probability,
    leakage_from_db,
    measured_detection,
    measured_paths,
    output_amplitudes,
    phase_sensitivity_dispersion,
    phase_sensitivity_geometric,
    port_intensities,
    read_count_csv,
    simulate_counts,
    write_count_csv,
)
from oamtomo.qubit import PureQubit

IDEAL = InterferometerConfig.ideal_device


def fringe_visibility(state, cfg, det=None, n=720):
    det = det or DetectionConfig(mean_photons=1e-3, detector_efficiency=1.0, background_rate=0.0)
    phases = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    p = click_probability(state, cfg, det, port="X", phase=phases)
    return (p.max() - p.min()) / (p.max() + p.min())


def test_h_input_at_zero_phase_exits_port_x():
    amp_x, amp_y = output_amplitudes(PureQubit.named("H"), IDEAL(phase=0.0))
    assert abs(amp_x) ** 2 == pytest.approx(1.0, abs=1e-12)
    assert abs(amp_y) ** 2 == pytest.approx(0.0, abs=1e-12)


def test_h_input_at_pi_exits_port_y():
    amp_x, amp_y = output_amplitudes(PureQubit.named("H"), IDEAL(phase=math.pi))
    assert abs(amp_x) ** 2 == pytest.approx(0.0, abs=1e-12)
    assert abs(amp_y) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_eigenstate_input_splits_evenly_for_every_phase():
    for phase in np.linspace(0.0, 2.0 * math.pi, 17):
        amp_x, amp_y = output_amplitudes(PureQubit.named("R"), IDEAL(phase=phase))
        assert abs(amp_x) == pytest.approx(abs(amp_y), abs=1e-12)


def test_projection_table_by_phase():
    # Output X captures H, A, V, D at device phases 0, pi/2, pi, 3pi/2.
    table = {0.0: "H", 0.5 * math.pi: "A", math.pi: "V", 1.5 * math.pi: "D"}
    for phase, name in table.items():
        amp_x, _ = output_amplitudes(PureQubit.named(name), IDEAL(phase=phase))
        assert abs(amp_x) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_energy_conservation_is_phase_independent():
    rng = np.random.default_rng(2)
    for _ in range(25):
        vec = rng.normal(size=2) + 1j * rng.normal(size=2)
        vec /= np.linalg.norm(vec)
        state = PureQubit(vec[0], vec[1])
        totals = []
        for phase in rng.uniform(0.0, 2.0 * math.pi, size=8):
            amp_x, amp_y = output_amplitudes(state, IDEAL(phase=phase))
            totals.append(abs(amp_x) ** 2 + abs(amp_y) ** 2)
        np.testing.assert_allclose(totals, 1.0, atol=1e-12)


def test_lossy_model_keeps_half_energy_and_quarter_scaling():
    cfg = InterferometerConfig(
        ProjectorPath(+1, efficiency=1.0),
        ProjectorPath(-1, efficiency=1.0),
        reference_tap=1.0,
    )
    amp_x, amp_y = output_amplitudes(PureQubit.named("H"), cfg)
    # the input splitter filters half the light whatever the mode
    assert abs(amp_x) ** 2 + abs(amp_y) ** 2 == pytest.approx(0.5, abs=1e-12)


def test_blocked_arm_equalizes_ports_for_every_input():
    for blocked in ("R", "L"):
        cfg = InterferometerConfig(*measured_paths(), blocked=blocked, phase=1.1)
        for name in ("R", "L", "H", "V", "D", "A"):
            i_x, i_y = port_intensities(PureQubit.named(name), cfg)
            assert i_x == pytest.approx(i_y, abs=1e-15)


def test_click_probability_normalized_fringe_maximum():
    det = DetectionConfig(mean_photons=1e-6, detector_efficiency=1.0, background_rate=0.0)
    p = click_probability(PureQubit.named("H"), IDEAL(phase=0.0), det, port="X")
    assert p / det.mean_photons == pytest.approx(1.0, rel=1e-5)


def test_spurious_fringe_visibility_of_leaky_eigenstate():
    for eps in (1e-3, 1e-2):
        cfg = InterferometerConfig(*balanced_paths(efficiency=0.65, leakage=eps))
        vis = fringe_visibility(PureQubit.named("R"), cfg)
        assert vis == pytest.approx(2.0 * math.sqrt(eps), rel=0.02)


def test_average_click_rate_at_operating_point():
    cfg = InterferometerConfig(*measured_paths())
    det = measured_detection()
    phases = np.linspace(0.0, 2.0 * math.pi, 360, endpoint=False)
    rate = float(np.mean(click_probability(PureQubit.named("H"), cfg, det, phase=phases)))
    assert 0.015 <= rate <= 0.045  # 0.03 clicks/measurement within +-50%


def test_full_visibility_for_equal_weight_inputs_ideal():
    cfg = InterferometerConfig(*balanced_paths(efficiency=0.65, leakage=0.0))
    assert fringe_visibility(PureQubit.named("H"), cfg) == pytest.approx(1.0, abs=1e-6)


def test_visibility_decreases_with_coupling_imbalance():
    last = 1.1
    for delta in (0.0, 0.1, 0.2, 0.3):
        cfg = InterferometerConfig(
            ProjectorPath(+1, efficiency=0.65),
            ProjectorPath(-1, efficiency=0.65 * (1.0 - delta)),
        )
        vis = fringe_visibility(PureQubit.named("H"), cfg)
        assert vis < last
        last = vis


def test_visibility_decreases_with_one_sided_leakage():
    last = 1.1
    for eps in (0.0, 0.01, 0.05, 0.1):
        cfg = InterferometerConfig(
            ProjectorPath(+1, efficiency=0.65, leakage={-1: eps}),
            ProjectorPath(-1, efficiency=0.65),
        )
        vis = fringe_visibility(PureQubit.named("H"), cfg)
        assert vis < last
        last = vis


def test_visibility_knob_scales_cross_term():
    cfg = InterferometerConfig(*balanced_paths(leakage=0.0), visibility=0.93)
    # weak-pulse nonlinearity compresses the observed contrast by O(mu_eff)
    assert fringe_visibility(PureQubit.named("H"), cfg) == pytest.approx(0.93, abs=2e-4)


def test_simulate_counts_degenerate_probabilities():
    det0 = DetectionConfig(mean_photons=0.0, detector_efficiency=1.0, background_rate=0.0, trials=1000)
    rec = simulate_counts(PureQubit.named("R"), IDEAL(), det0, seed=1)
    assert rec.clicks == 0
    det1 = DetectionConfig(mean_photons=1e9, detector_efficiency=1.0, background_rate=0.0, trials=100)
    rec = simulate_counts(PureQubit.named("H"), IDEAL(phase=0.0), det1, seed=1)
    assert rec.clicks == 100


def test_simulate_counts_matches_binomial_moments():
    # Oracle: binomial mean/variance at the analytic click probability.
    cfg = IDEAL(phase=0.4)
    state = PureQubit.named("H")
    det = DetectionConfig(mean_photons=0.03, detector_efficiency=1.0, background_rate=0.0, trials=10**6)
    p = click_probability(state, cfg, det, port="X")
    sigma = math.sqrt(det.trials * p * (1.0 - p))
    rec = simulate_counts(state, cfg, det, seed=123)
    assert abs(rec.clicks - det.trials * p) < 5.0 * sigma


def test_simulate_counts_empirical_convergence_over_seeds():
    cfg = IDEAL(phase=1.2)
    state = PureQubit.named("D")
    det = DetectionConfig(mean_photons=0.05, detector_efficiency=1.0, background_rate=1e-3, trials=10**5)
    p = click_probability(state, cfg, det, port="X")
    sigma = math.sqrt(det.trials * p * (1.0 - p))
    hits = sum(
        abs(simulate_counts(state, cfg, det, seed=s).clicks - det.trials * p) <= 5.0 * sigma
        for s in range(100)
    )
    assert hits >= 99


def test_simulate_counts_reproducible():
    cfg = InterferometerConfig(*measured_paths(), phase=0.7)
    det = measured_detection(trials=50000)
    a = simulate_counts(PureQubit.named("A"), cfg, det, seed=99)
    b = simulate_counts(PureQubit.named("A"), cfg, det, seed=99)
    assert a == b
    c = simulate_counts(PureQubit.named("A"), cfg, det, seed=100)
    assert c.clicks != a.clicks or c.seed != a.seed


def test_phase_drift_walks_the_fringe():
    cfg = InterferometerConfig(
        *balanced_paths(leakage=0.0), phase=0.0, phase_drift_rate=math.radians(2.0)
    )
    det = DetectionConfig(mean_photons=0.5, detector_efficiency=1.0, background_rate=0.0,
                          trials=20000, trial_period_s=10.0)
    rec = simulate_counts(PureQubit.named("H"), cfg, det, seed=5)
    # long drift washes the fringe toward the 50% average of its extremes
    frozen = simulate_counts(
        PureQubit.named("H"),
        InterferometerConfig(*balanced_paths(leakage=0.0), phase=0.0),
        det,
        seed=5,
    )
    assert rec.clicks < frozen.clicks


@pytest.mark.parametrize(
    "dl,dnu,expected",
    [(1.0, 1.0, 12.0), (0.0, 7.3, 0.0), (3.0, 0.5, 18.0)],
)
def test_phase_sensitivity_geometric(dl, dnu, expected):
    assert phase_sensitivity_geometric(dl, dnu) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize(
    "dl,dnu,expected",
    [(1.0, 1.0, -0.1), (0.0, 4.2, 0.0), (10.0, 2.0, -2.0)],
)
def test_phase_sensitivity_dispersion(dl, dnu, expected):
    assert phase_sensitivity_dispersion(dl, dnu) == pytest.approx(expected, abs=1e-12)


def test_leakage_from_db():
    assert leakage_from_db(25.0) == pytest.approx(10.0**-2.5, abs=1e-15)
    assert leakage_from_db(-25.0) == pytest.approx(10.0**-2.5, abs=1e-15)


def test_measured_paths_preset_values():
    r_path, l_path = measured_paths()
    assert r_path.efficiency == pytest.approx(0.8 * 0.823, abs=1e-12)
    assert r_path.relative_leakage(-1) == pytest.approx(0.005 / 0.823, abs=1e-12)
    assert r_path.relative_leakage(+2) == pytest.approx(0.057 / 0.823, abs=1e-12)
    assert l_path.efficiency == pytest.approx(0.8 * 0.778, abs=1e-12)
    assert l_path.relative_leakage(+1) == pytest.approx(0.0003 / 0.778, abs=1e-12)


def test_count_record_validation():
    with pytest.raises(ValueError):
        CountRecord("x", "X", 0.0, trials=10, clicks=11)


def test_count_csv_round_trip(tmp_path):
    records = [
        CountRecord("phase_000", "X", 0.0, 1000, 31, seed=7),
        CountRecord("blocked_L", "Y", 90.0, 500, 12, seed=None),
    ]
    path = tmp_path / "counts.csv"
    write_count_csv(path, records, comment="hash=beef")
    assert path.read_text().startswith("# hash=beef\n")
    loaded = read_count_csv(path)
    assert loaded == records


def test_config_validation():
    with pytest.raises(ValueError):
        ProjectorPath(+1, efficiency=1.2)
    with pytest.raises(ValueError):
        InterferometerConfig(blocked="Q")
    with pytest.raises(ValueError):
        DetectionConfig(mean_photons=-0.1)
    with pytest.raises(ValueError):
        DetectionConfig(background_rate=1.5)
