import numpy as np
import pytest

from parsim.acquisition import (
    ADC_MAX,
    ADC_MIN,
    DEFAULT_GAIN,
    DigitizerConfig,
    ScanPlan,
    Trace,
    bipolar_template,
    generate_trajectory,
    plan_scan,
    simulate_dataset,
    simulate_trace,
    simulate_traces,
)
from parsim.envelope import pars_amplitude
from parsim.errors import (
    AmbiguousPlanError,
    InvalidNoiseError,
    InvalidPlanError,
    MalformedTraceError,
    OutOfBoundsError,
)
from parsim.phantom import default_spectra, uniform_phantom

from oracles import linear_fit


# -- planning -----------------------------------------------------------------

def test_tunable_laser_plan():
    plan = plan_scan("mechanical", 1000, step_um=0.9, rep_rate_hz=1000)
    assert plan.shape == (1112, 1112)
    assert plan.pulses_per_wavelength == 1_236_544
    assert plan.duration_s == pytest.approx(1236.544)
    assert plan.duration_s / 60 == pytest.approx(22, rel=0.10)


def test_fast_laser_plan():
    plan = plan_scan("optical", 1000, step_um=0.9, rep_rate_hz=20_000)
    assert plan.duration_s == pytest.approx(61.8272)
    assert plan.duration_s < 90


def test_point_count_plan():
    plan = plan_scan("optical", 175, point_count=100_000, rep_rate_hz=20_000)
    assert plan.duration_s == 5.0
    assert plan.frame_rate_fps == pytest.approx(0.2)


def test_duration_is_plain_arithmetic():
    plan = plan_scan("optical", (30, 20), step_um=0.5, rep_rate_hz=3000, wavelengths_nm=(250, 420, 266))
    nx, ny = plan.shape
    assert plan.pulses_per_wavelength == nx * ny == 61 * 41
    assert plan.duration_s == plan.pulses_per_wavelength * 3 / 3000


def test_overhead_fraction():
    plan = plan_scan("mechanical", 1000, step_um=0.9, rep_rate_hz=1000, overhead_fraction=0.07)
    assert plan.duration_s == pytest.approx(1236.544 * 1.07)


def test_plan_errors():
    with pytest.raises(AmbiguousPlanError):
        plan_scan("optical", 100, step_um=1.0, point_count=10)
    with pytest.raises(InvalidPlanError):
        plan_scan("optical", 100)
    with pytest.raises(InvalidPlanError):
        plan_scan("optical", 100, step_um=1.0, rep_rate_hz=0)
    with pytest.raises(InvalidPlanError):
        plan_scan("optical", -5, step_um=1.0)
    with pytest.raises(InvalidPlanError):
        plan_scan("optical", 100, step_um=-1.0)
    with pytest.raises(InvalidPlanError):
        plan_scan("sideways", 100, step_um=1.0)


@pytest.mark.parametrize("energy", [0.5, 25.0])
def test_pulse_energy_bounds(energy):
    with pytest.raises(InvalidPlanError):
        plan_scan("optical", 100, step_um=1.0, pulse_energy_nj=energy)
    plan = plan_scan("optical", 100, step_um=1.0, pulse_energy_nj=energy, energy_bounds_nj=(0.1, 50))
    assert plan.pulse_energy_nj == energy


def test_plan_summary_formats():
    plan = plan_scan("mechanical", 1000, step_um=0.9, rep_rate_hz=1000)
    kv = dict(line.split("=", 1) for line in plan.format_kv().splitlines())
    assert kv["pulses"] == "1236544"
    assert kv["duration_s"] == "1236.5"
    table = plan.format_table().splitlines()
    assert len({line.index(line.split()[1]) for line in table}) == 1  # aligned value column


# -- trajectories -------------------------------------------------------------

def test_mechanical_lattice():
    plan = plan_scan("mechanical", 2, step_um=1.0)
    pts = generate_trajectory(plan)
    assert sorted(map(tuple, pts)) == [(float(x), float(y)) for x in range(3) for y in range(3)]
    # serpentine order
    assert pts.tolist() == [[0, 0], [1, 0], [2, 0], [2, 1], [1, 1], [0, 1], [0, 2], [1, 2], [2, 2]]


def test_mechanical_rows_equidistant():
    plan = plan_scan("mechanical", (17.3, 5), step_um=0.7)
    pts = generate_trajectory(plan)
    nx, ny = plan.shape
    rows = pts.reshape(ny, nx, 2)
    assert np.allclose(np.abs(np.diff(rows[..., 0], axis=1)), 0.7, rtol=0, atol=1e-12)
    assert np.all(np.diff(rows[..., 1], axis=1) == 0)


def test_optical_without_jitter_matches_mechanical():
    opt = plan_scan("optical", 10, step_um=0.9)
    mech = plan_scan("mechanical", 10, step_um=0.9)
    assert np.array_equal(generate_trajectory(opt, jitter_sigma_um=0), generate_trajectory(mech))


def test_jitter_statistics():
    plan = plan_scan("optical", 99, step_um=1.0)  # 100 x 100 targets
    pts = generate_trajectory(plan, seed=4)
    dev = pts - generate_trajectory(plan, jitter_sigma_um=0)
    assert len(pts) == 10_000
    sigma = 0.15
    assert np.abs(dev).max() <= 0.5
    for axis in (0, 1):
        assert dev[:, axis].std() == pytest.approx(sigma, rel=0.10)
        assert abs(dev[:, axis].mean()) < 0.01


def test_trajectory_deterministic():
    plan = plan_scan("optical", 20, step_um=0.9)
    assert np.array_equal(generate_trajectory(plan, seed=3), generate_trajectory(plan, seed=3))
    assert not np.array_equal(generate_trajectory(plan, seed=3), generate_trajectory(plan, seed=4))


def test_point_count_trajectory_length():
    plan = plan_scan("optical", (30, 10), point_count=250)
    assert len(generate_trajectory(plan)) == 250


# -- traces -------------------------------------------------------------------

def test_template_shape():
    w = bipolar_template(500e6)
    assert w.max() - w.min() == pytest.approx(1.0)
    assert w.max() > 0 > w.min()
    assert np.argmax(w) < np.argmin(w)  # positive lobe first
    # AC-coupled: lobe areas cancel up to sampling error
    assert abs(w.sum()) < 0.01 * np.abs(w).sum()
    assert len(w) / 500e6 == pytest.approx(42e-9, rel=0.1)


def test_zero_absorption_gives_flat_trace(point_plan):
    t = simulate_trace(uniform_phantom(20, 20, 0.5), None, 10, 10, 250, point_plan)
    assert not t.samples.any()
    assert t.samples.dtype == np.int16


def test_uniform_phantom_peak_to_trough(point_plan):
    a = 0.5
    t = simulate_trace(uniform_phantom(20, 20, 0.5, dna=a), None, 10, 10, 250, point_plan)
    m = DEFAULT_GAIN * point_plan.pulse_energy_nj * a
    assert np.ptp(t.samples) == m == 1000


def test_doubling_absorption_doubles_modulation(point_plan):
    lo = simulate_trace(uniform_phantom(20, 20, 0.5, dna=0.2), None, 10, 10, 250, point_plan)
    hi = simulate_trace(uniform_phantom(20, 20, 0.5, dna=0.4), None, 10, 10, 250, point_plan)
    assert np.ptp(hi.samples) == 2 * np.ptp(lo.samples)


def test_trigger_placement(point_plan):
    dig = DigitizerConfig()
    t = simulate_trace(uniform_phantom(20, 20, 0.5, dna=1), None, 10, 10, 250, point_plan)
    assert not t.samples[:dig.pre_trigger_samples + 1].any()
    assert t.samples[dig.pre_trigger_samples + 1] > 0


def test_quantization_clamps(point_plan):
    plan = plan_scan("mechanical", 20, step_um=1.0, wavelengths_nm=(250,), pulse_energy_nj=20.0)
    t = simulate_trace(uniform_phantom(20, 20, 0.5, dna=1), None, 10, 10, 250, plan,
                       noise_std=0, gain=5000.0)
    assert t.samples.max() == ADC_MAX and t.samples.min() == ADC_MIN


def test_noise_statistics_and_bounds(point_plan):
    ph = uniform_phantom(20, 20, 0.5)
    x = np.full(200, 10.0)
    s = simulate_traces(ph, default_spectra(), x, x, 250, point_plan, noise_std=30.0, seed=2)
    assert s.min() >= ADC_MIN and s.max() <= ADC_MAX
    assert s.std() == pytest.approx(30.0, rel=0.05)
    # pre-trigger segment is AC-coupled around zero
    assert abs(s[:, :32].mean()) < 3 * 30.0 / np.sqrt(s[:, :32].size)


def test_noise_keyed_on_pulse_index(point_plan):
    ph = uniform_phantom(20, 20, 0.5, dna=0.3)
    a = simulate_trace(ph, None, 10, 10, 250, point_plan, noise_std=10, seed=5, pulse_index=17)
    b = simulate_trace(ph, None, 10, 10, 250, point_plan, noise_std=10, seed=5, pulse_index=17)
    c = simulate_trace(ph, None, 10, 10, 250, point_plan, noise_std=10, seed=5, pulse_index=18)
    assert a == b and a != c


def test_trace_errors(point_plan):
    ph = uniform_phantom(20, 20, 0.5)
    with pytest.raises(InvalidNoiseError):
        simulate_trace(ph, None, 10, 10, 250, point_plan, noise_std=-1)
    with pytest.raises(OutOfBoundsError):
        simulate_trace(ph, None, 30, 10, 250, point_plan)
    with pytest.raises(MalformedTraceError):
        Trace(500e6, 32, np.zeros(39))


def test_forward_model_linear_in_energy_and_absorption(point_plan):
    amps, xs = [], []
    for energy in np.linspace(1, 20, 20):
        plan = plan_scan("mechanical", 20, step_um=1.0, wavelengths_nm=(250,), pulse_energy_nj=energy)
        t = simulate_trace(uniform_phantom(20, 20, 0.5, dna=0.6), None, 10, 10, 250, plan)
        amps.append(pars_amplitude(t))
        xs.append(energy * 0.6)
    slope, _, r2 = linear_fit(xs, amps)
    assert r2 > 0.999
    assert slope == pytest.approx(DEFAULT_GAIN, rel=0.01)


def test_simulate_dataset_layout():
    ph = uniform_phantom(10, 10, 0.5, dna=0.2)
    plan = plan_scan("optical", 10, step_um=1.0, wavelengths_nm=(250, 420))
    recs = simulate_dataset(ph, plan, seed=1, noise_std=2.0, chunk=50)
    n = plan.pulses_per_wavelength
    assert len(recs) == 2 * n
    assert [r.pulse_index for r in recs] == list(range(2 * n))
    assert {r.wavelength_nm for r in recs[:n]} == {250.0}
    pad = 0.5 * plan.pitch_um
    assert all(-pad <= r.x_um <= 10 + pad and -pad <= r.y_um <= 10 + pad for r in recs)
    again = simulate_dataset(ph, plan, seed=1, noise_std=2.0, chunk=7)
    assert all(a == b for a, b in zip(recs, again))


def test_scanplan_is_frozen():
    plan = plan_scan("optical", 10, step_um=1.0)
    assert isinstance(plan, ScanPlan)
    with pytest.raises(AttributeError):
        plan.step_um = 2.0
