"""Scan planning, trajectories and the photodiode forward model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._workers import parallel_map
from .errors import (
    AmbiguousPlanError,
    InvalidNoiseError,
    InvalidPlanError,
    MalformedTraceError,
    OutOfBoundsError,
)
from .phantom import AbsorptionSpectrum, ChromophorePhantom, default_spectra, psf_weighted_absorption

MODES = ("mechanical", "optical")

ADC_MIN = -8192
ADC_MAX = 8191

# Fixed bipolar transient: positive half-sine then a longer, shallower
# negative half-sine with equal area so the AC-coupled waveform has zero mean.
TEMPLATE_DURATION_S = 40e-9
TEMPLATE_POSITIVE_S = 16e-9
TEMPLATE_POSITIVE_PEAK = 0.6
TEMPLATE_NEGATIVE_PEAK = 0.4

# digitizer units per nJ per unit absorption
DEFAULT_GAIN = 200.0

MIN_TRACE_TAIL = 8


@dataclass(frozen=True)
class DigitizerConfig:
    sample_rate_hz: float = 500e6
    pre_trigger_samples: int = 32
    n_samples: int = 128

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise InvalidPlanError("sample_rate_hz must be positive")
        if self.pre_trigger_samples < 0:
            raise InvalidPlanError("pre_trigger_samples must be >= 0")
        need = self.pre_trigger_samples + len(bipolar_template(self.sample_rate_hz)) + MIN_TRACE_TAIL
        if self.n_samples < need:
            raise InvalidPlanError(f"n_samples must be at least {need} at this sample rate")


@dataclass(frozen=True)
class ScanPlan:
    mode: str
    fov_x_um: float
    fov_y_um: float
    rep_rate_hz: float
    wavelengths_nm: tuple = (266.0,)
    step_um: float | None = None
    point_count: int | None = None
    pulse_energy_nj: float = 10.0
    psf_fwhm_um: float = 2.5
    overhead_fraction: float = 0.0
    energy_bounds_nj: tuple = (0.9, 20.0)
    jitter_fraction: float = 0.15

    def __post_init__(self):
        object.__setattr__(self, "wavelengths_nm", tuple(float(w) for w in self.wavelengths_nm))
        if self.mode not in MODES:
            raise InvalidPlanError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.step_um is not None and self.point_count is not None:
            raise AmbiguousPlanError("give either step_um or point_count, not both")
        if self.step_um is None and self.point_count is None:
            raise InvalidPlanError("one of step_um or point_count is required")
        if not (self.rep_rate_hz > 0 and math.isfinite(self.rep_rate_hz)):
            raise InvalidPlanError("rep_rate_hz must be positive")
        if not (self.fov_x_um > 0 and self.fov_y_um > 0):
            raise InvalidPlanError("field of view must be positive")
        if self.step_um is not None and not self.step_um > 0:
            raise InvalidPlanError("step_um must be positive")
        if self.point_count is not None and int(self.point_count) < 1:
            raise InvalidPlanError("point_count must be >= 1")
        if not self.wavelengths_nm:
            raise InvalidPlanError("at least one wavelength is required")
        lo, hi = self.energy_bounds_nj
        if not lo <= self.pulse_energy_nj <= hi:
            raise InvalidPlanError(f"pulse_energy_nj {self.pulse_energy_nj} outside [{lo}, {hi}] nJ")
        if self.psf_fwhm_um < 0:
            raise InvalidPlanError("psf_fwhm_um must be >= 0")
        if self.overhead_fraction < 0:
            raise InvalidPlanError("overhead_fraction must be >= 0")
        if not 0 <= self.jitter_fraction:
            raise InvalidPlanError("jitter_fraction must be >= 0")

    @property
    def pitch_um(self):
        """Lateral spacing between neighbouring raster targets."""
        if self.step_um is not None:
            return float(self.step_um)
        return math.sqrt(self.fov_x_um * self.fov_y_um / self.point_count)

    @property
    def shape(self):
        """Raster node counts ``(nx, ny)``; targets include both FOV edges."""
        if self.step_um is not None:
            # small slack so exact multiples (2 um / 1 um) are not lost to rounding
            nx = int(math.floor(self.fov_x_um / self.step_um + 1e-9)) + 1
            ny = int(math.floor(self.fov_y_um / self.step_um + 1e-9)) + 1
            return nx, ny
        nx = max(1, int(round(self.fov_x_um / self.pitch_um)))
        nx = min(nx, self.point_count)
        return nx, int(math.ceil(self.point_count / nx))

    @property
    def pulses_per_wavelength(self):
        if self.point_count is not None:
            return int(self.point_count)
        nx, ny = self.shape
        return nx * ny

    @property
    def duration_per_wavelength_s(self):
        return self.pulses_per_wavelength / self.rep_rate_hz * (1.0 + self.overhead_fraction)

    @property
    def duration_s(self):
        return self.duration_per_wavelength_s * len(self.wavelengths_nm)

    @property
    def frame_rate_fps(self):
        return 1.0 / self.duration_s

    def summary(self):
        nx, ny = self.shape
        return {
            "mode": self.mode,
            "fov_um": f"{self.fov_x_um:g}x{self.fov_y_um:g}",
            "pitch_um": f"{self.pitch_um:.6g}",
            "grid": f"{nx}x{ny}",
            "pulses": str(self.pulses_per_wavelength),
            "wavelengths_nm": ",".join(f"{w:g}" for w in self.wavelengths_nm),
            "rep_rate_hz": f"{self.rep_rate_hz:g}",
            "duration_per_wavelength_s": f"{self.duration_per_wavelength_s:.1f}",
            "duration_s": f"{self.duration_s:.1f}",
            "duration_min": f"{self.duration_s / 60:.2f}",
            "frame_rate_fps": f"{self.frame_rate_fps:.3g}",
        }

    def format_table(self):
        rows = self.summary()
        width = max(map(len, rows))
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows.items())

    def format_kv(self):
        return "\n".join(f"{k}={v}" for k, v in self.summary().items())


def plan_scan(mode="optical", fov_um=(1000.0, 1000.0), *, step_um=None, point_count=None,
              rep_rate_hz=20_000.0, wavelengths_nm=(266.0,), **extra) -> ScanPlan:
    """Build and validate a scan plan; durations are derived properties.

    ``fov_um`` is an ``(x, y)`` pair or a single number for a square field.
    """
    if np.ndim(fov_um) == 0:
        fov_um = (fov_um, fov_um)
    fx, fy = (float(v) for v in fov_um)
    return ScanPlan(mode=mode, fov_x_um=fx, fov_y_um=fy, step_um=step_um,
                    point_count=None if point_count is None else int(point_count),
                    rep_rate_hz=float(rep_rate_hz), wavelengths_nm=tuple(wavelengths_nm), **extra)


def raster_targets(plan: ScanPlan):
    """Serpentine raster of target positions, shape ``(pulses, 2)``."""
    nx, ny = plan.shape
    p = plan.pitch_um
    cols = np.arange(nx)
    xs, ys = [], []
    for row in range(ny):
        c = cols if row % 2 == 0 else cols[::-1]
        xs.append(c * p)
        ys.append(np.full(nx, row * p))
    pts = np.column_stack([np.concatenate(xs), np.concatenate(ys)])
    return pts[: plan.pulses_per_wavelength]


def _truncated_normal(rng, sigma, bound, size):
    out = rng.normal(0.0, sigma, size)
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.normal(0.0, sigma, int(bad.sum()))
        bad = np.abs(out) > bound
    return out


def generate_trajectory(plan: ScanPlan, seed=0, jitter_sigma_um=None):
    """Interrogation positions in acquisition order, shape ``(pulses, 2)``.

    Mechanical plans return the exact serpentine lattice. Optical plans
    perturb each target by independent per-axis Gaussian jitter of
    ``jitter_sigma_um`` (default ``plan.jitter_fraction * pitch``)
    truncated at half a pitch.
    """
    pts = raster_targets(plan)
    if plan.mode == "mechanical":
        return pts
    p = plan.pitch_um
    sigma = plan.jitter_fraction * p if jitter_sigma_um is None else float(jitter_sigma_um)
    if sigma < 0:
        raise InvalidPlanError("jitter sigma must be >= 0")
    if sigma == 0:
        return pts
    rng = np.random.default_rng(seed)
    return pts + _truncated_normal(rng, sigma, 0.5 * p, pts.shape)


@lru_cache(maxsize=16)
def _template(sample_rate_hz):
    n = int(math.floor(TEMPLATE_DURATION_S * sample_rate_hz + 1e-9)) + 1
    t = np.arange(n) / sample_rate_hz
    t1 = TEMPLATE_POSITIVE_S
    t2 = TEMPLATE_DURATION_S - t1
    w = np.where(
        t <= t1,
        TEMPLATE_POSITIVE_PEAK * np.sin(np.pi * t / t1),
        -TEMPLATE_NEGATIVE_PEAK * np.sin(np.pi * (t - t1) / t2),
    )
    w = w / (w.max() - w.min())
    w.setflags(write=False)
    return w


def bipolar_template(sample_rate_hz=500e6):
    """The unit peak-to-trough transient sampled at ``sample_rate_hz``."""
    return _template(float(sample_rate_hz))


@dataclass(frozen=True, eq=False)
class Trace:
    sample_rate_hz: float
    pre_trigger_samples: int
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise MalformedTraceError("trace samples must be one-dimensional")
        if len(samples) < self.pre_trigger_samples + MIN_TRACE_TAIL:
            raise MalformedTraceError(
                f"trace has {len(samples)} samples; need at least "
                f"pre_trigger_samples + {MIN_TRACE_TAIL} = {self.pre_trigger_samples + MIN_TRACE_TAIL}"
            )
        if self.sample_rate_hz <= 0:
            raise MalformedTraceError("sample rate must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.sample_rate_hz == other.sample_rate_hz
                and self.pre_trigger_samples == other.pre_trigger_samples
                and np.array_equal(self.samples, other.samples))


@dataclass(frozen=True)
class InterrogationRecord:
    x_um: float
    y_um: float
    wavelength_nm: float
    pulse_index: int
    trace: Trace


def _pulse_rng(seed, pulse_index):
    return np.random.default_rng([int(seed), int(pulse_index)])


def quantize(values):
    return np.clip(np.rint(values), ADC_MIN, ADC_MAX).astype(np.int16)


def modulation_depth(phantom, spectra, x_um, y_um, wavelength_nm, plan, gain=DEFAULT_GAIN):
    """Peak-to-trough modulation ``gain * E * psf_weighted_absorption``."""
    a = psf_weighted_absorption(phantom, spectra, x_um, y_um, wavelength_nm, plan.psf_fwhm_um)
    return gain * plan.pulse_energy_nj * a


def _check_positions(phantom, plan, x, y):
    pad = 0.5 * plan.pitch_um
    ok = (x >= -pad) & (x <= phantom.width_um + pad) & (y >= -pad) & (y <= phantom.height_um + pad)
    if not np.all(ok):
        raise OutOfBoundsError("interrogation position outside the phantom extent")


def simulate_traces(phantom, spectra, x_um, y_um, wavelength_nm, plan, noise_std=0.0, seed=0,
                    pulse_indices=None, digitizer=None, gain=DEFAULT_GAIN):
    """Vectorized forward model; returns int16 samples of shape ``(n, n_samples)``.

    Each pulse draws its noise from a generator keyed on
    ``(seed, pulse_index)``, so chunks can be simulated in any order.
    """
    if noise_std < 0 or not math.isfinite(noise_std):
        raise InvalidNoiseError("noise std must be finite and >= 0")
    digitizer = digitizer or DigitizerConfig()
    x = np.atleast_1d(np.asarray(x_um, dtype=float))
    y = np.atleast_1d(np.asarray(y_um, dtype=float))
    _check_positions(phantom, plan, x, y)
    m = np.atleast_1d(modulation_depth(phantom, spectra, x, y, wavelength_nm, plan, gain))
    w = bipolar_template(digitizer.sample_rate_hz)
    t0 = digitizer.pre_trigger_samples
    clean = np.zeros((len(x), digitizer.n_samples))
    clean[:, t0:t0 + len(w)] = m[:, None] * w[None, :]
    if noise_std > 0:
        if pulse_indices is None:
            pulse_indices = np.arange(len(x))
        for row, k in enumerate(pulse_indices):
            clean[row] += _pulse_rng(seed, k).normal(0.0, noise_std, digitizer.n_samples)
    return quantize(clean)


def simulate_trace(phantom: ChromophorePhantom, spectra: AbsorptionSpectrum | None, x_um, y_um,
                   wavelength_nm, plan: ScanPlan, noise_std=0.0, seed=0, pulse_index=0,
                   digitizer=None, gain=DEFAULT_GAIN) -> Trace:
    """Photodiode trace for one excitation pulse at ``(x_um, y_um)``."""
    digitizer = digitizer or DigitizerConfig()
    samples = simulate_traces(phantom, spectra or default_spectra(), x_um, y_um, wavelength_nm,
                              plan, noise_std, seed, [pulse_index], digitizer, gain)
    return Trace(digitizer.sample_rate_hz, digitizer.pre_trigger_samples, samples[0])


def simulate_dataset(phantom, plan, spectra=None, noise_std=0.0, seed=0, digitizer=None,
                     gain=DEFAULT_GAIN, chunk=4096):
    """Simulate every pulse of ``plan`` over ``phantom``.

    Wavelengths are acquired one full pass after another; each optical pass
    draws its own jitter. ``pulse_index`` counts across the whole dataset.
    """
    spectra = spectra or default_spectra()
    digitizer = digitizer or DigitizerConfig()
    jobs = []
    base = 0
    for k, wl in enumerate(plan.wavelengths_nm):
        traj = generate_trajectory(plan, seed=[int(seed), k])
        for start in range(0, len(traj), chunk):
            part = traj[start:start + chunk]
            jobs.append((wl, part, base + start + np.arange(len(part))))
        base += len(traj)

    def run(job):
        wl, part, idx = job
        samples = simulate_traces(phantom, spectra, part[:, 0], part[:, 1], wl, plan,
                                  noise_std, seed, idx, digitizer, gain)
        return [
            InterrogationRecord(float(p[0]), float(p[1]), wl, int(i),
                                Trace(digitizer.sample_rate_hz, digitizer.pre_trigger_samples, s))
            for p, i, s in zip(part, idx, samples)
        ]

    records = []
    for block in parallel_map(run, jobs):
        records.extend(block)
    return records
