"""Fast deterministic self-checks behind ``parsim validate``."""

from __future__ import annotations

import numpy as np

from .acquisition import DEFAULT_GAIN, plan_scan, simulate_trace
from .colorize import StainProfile, stain_mix
from .envelope import pars_amplitude
from .formats import decode_dataset, encode_dataset
from .gridding import FILLED_DIRECT, MISSING, AmplitudeGrid, GridSpec, fit_to_grid, interpolate_gaps
from .phantom import default_spectra, uniform_phantom


def check_plan_arithmetic():
    slow = plan_scan("mechanical", 1000, step_um=0.9, rep_rate_hz=1000)
    fast = plan_scan("mechanical", 1000, step_um=0.9, rep_rate_hz=20_000)
    live = plan_scan("optical", 175, point_count=100_000, rep_rate_hz=20_000)
    ok = (slow.pulses_per_wavelength == 1_236_544
          and abs(slow.duration_s - 1236.544) < 1e-6
          and abs(slow.duration_s / 60 - 22) <= 0.1 * 22
          and fast.duration_s < 90
          and abs(live.duration_s - 5.0) < 1e-12
          and abs(live.frame_rate_fps - 0.2) < 1e-12)
    return ok, f"1 kHz {slow.duration_s:.1f} s, 20 kHz {fast.duration_s:.1f} s, live {live.frame_rate_fps:.2f} fps"


def check_linearity():
    plan = plan_scan("mechanical", 10, step_um=1.0, rep_rate_hz=1000, wavelengths_nm=(250,))
    levels = np.linspace(0.05, 1.0, 20)
    amps = [pars_amplitude(simulate_trace(uniform_phantom(10, 10, 0.5, dna=a), default_spectra(),
                                          5, 5, 250, plan)) for a in levels]
    slope, icpt = np.polyfit(levels, amps, 1)
    r2 = 1 - np.sum((amps - (slope * levels + icpt)) ** 2) / np.sum((amps - np.mean(amps)) ** 2)
    expected = DEFAULT_GAIN * plan.pulse_energy_nj
    return r2 > 0.999 and abs(slope / expected - 1) < 0.01, f"R2={r2:.6f} slope={slope:.2f}/{expected:.2f}"


def check_gridding(seed=0, instances=10):
    rng = np.random.default_rng(seed)
    for _ in range(instances):
        n = int(rng.integers(1, 300))
        nx, ny = (int(v) for v in rng.integers(1, 40, 2))
        pts = np.column_stack([rng.uniform(-1, nx, n), rng.uniform(-1, ny, n), rng.normal(size=n)])
        pts[:, :2] = np.round(pts[:, :2] * 2) / 2
        spec = GridSpec(0.0, 0.0, 1.0, nx, ny)
        grid = fit_to_grid(pts, spec, radius_um=1.5)
        xs, ys = spec.node_coordinates()
        gx, gy = np.meshgrid(xs, ys)
        d2 = (pts[None, :, 0] - gx.ravel()[:, None]) ** 2 + (pts[None, :, 1] - gy.ravel()[:, None]) ** 2
        best = np.argmin(d2, axis=1)
        hit = d2[np.arange(len(best)), best] <= 1.5 ** 2
        want = np.where(hit, pts[best, 2], 0.0).reshape(ny, nx)
        if not (np.array_equal(grid.state == FILLED_DIRECT, hit.reshape(ny, nx))
                and np.array_equal(grid.values, want)):
            return False, "mismatch against brute force"
    return True, f"{instances} instances match brute force"


def check_interpolation():
    rng = np.random.default_rng(1)
    ny, nx = 30, 40
    yy, xx = np.mgrid[0:ny, 0:nx]
    truth = 3.0 * xx + 2.0 * yy + 1.0
    state = np.where(rng.random((ny, nx)) < 0.3, FILLED_DIRECT, MISSING).astype(np.uint8)
    grid = AmplitudeGrid(0.0, 0.0, 1.0, np.where(state == FILLED_DIRECT, truth, 0.0), state)
    once = interpolate_gaps(grid)
    twice = interpolate_gaps(once)
    lo, hi = truth[state == FILLED_DIRECT].min(), truth[state == FILLED_DIRECT].max()
    ok = (np.array_equal(once.values, twice.values)
          and once.values.min() >= lo and once.values.max() <= hi
          and not (once.state == MISSING).any())
    return ok, "idempotent, complete and value-containing"


def check_hne():
    p = StainProfile()
    white = np.allclose(stain_mix(0.0, 0.0, p), 1.0)
    n = np.linspace(0, 1, 11)
    dark = np.all(np.diff(stain_mix(n, 0.3, p), axis=0) <= 0)
    h, e = stain_mix(1.0, 0.0, p), stain_mix(0.0, 1.0, p)
    order = h[2] > h[0] and e[0] > e[2]
    return bool(white and dark and order), "white identity, monotone darkening, channel order"


def check_format(seed=0):
    from .acquisition import InterrogationRecord, Trace

    rng = np.random.default_rng(seed)
    plan = plan_scan("optical", 50, step_um=1.0, rep_rate_hz=1000, wavelengths_nm=(250, 420))
    recs = [InterrogationRecord(float(rng.uniform(0, 50)), float(rng.uniform(0, 50)),
                                (250.0, 420.0)[k % 2], k,
                                Trace(500e6, 32, rng.integers(-8192, 8192, 64).astype(np.int16)))
            for k in range(25)]
    blob = encode_dataset(recs, plan)
    again = encode_dataset(*decode_dataset(blob))
    return blob == again, f"{len(blob)} bytes round-trip"


CHECKS = [
    ("plan arithmetic", check_plan_arithmetic),
    ("forward-model linearity", check_linearity),
    ("nearest-neighbour gridding", check_gridding),
    ("gap interpolation", check_interpolation),
    ("H&E mixing", check_hne),
    ("dataset round-trip", check_format),
]


def run_checks(out):
    all_ok = True
    for name, fn in CHECKS:
        ok, detail = fn()
        all_ok &= bool(ok)
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=out)
    return all_ok
