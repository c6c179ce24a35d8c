"""End-to-end glue: records to per-wavelength grids to rendered images."""

from __future__ import annotations

import numpy as np

from ._workers import parallel_map
from .colorize import StainProfile, apply_colormap, mix_hne, segment_tissue
from .envelope import record_amplitudes
from .gridding import fit_to_grid, grid_for_plan, grid_mechanical, interpolate_gaps


def split_by_wavelength(records, amplitudes=None):
    """``{wavelength: (xyA array, pulse order)}`` in acquisition order."""
    if amplitudes is None:
        amplitudes = record_amplitudes(records)
    out = {}
    for rec, amp in zip(records, amplitudes):
        out.setdefault(float(rec.wavelength_nm), []).append((rec.pulse_index, rec.x_um, rec.y_um, amp))
    result = {}
    for wl, rows in out.items():
        rows.sort()
        result[wl] = np.array([r[1:] for r in rows], dtype=float)
    return result


def reconstruct(records, plan, radius_um=None):
    """Amplitude grid for every wavelength present in ``records``.

    Optical scans are gridded by nearest-neighbour fitting followed by gap
    interpolation; mechanical scans are reshaped directly.
    """
    by_wl = split_by_wavelength(records)
    spec = grid_for_plan(plan)

    def one(item):
        wl, xya = item
        if plan.mode == "mechanical":
            return wl, grid_mechanical(xya, plan, wavelength_nm=wl)
        return wl, interpolate_gaps(fit_to_grid(xya, spec, radius_um, wavelength_nm=wl))

    return dict(parallel_map(one, sorted(by_wl.items())))


def render_hne(grid_nuclear, grid_cytoplasm, profile=None, window_um=25.0, threshold="otsu"):
    mask = segment_tissue(grid_nuclear, window_um, threshold)
    return mix_hne(grid_nuclear, grid_cytoplasm, mask, profile or StainProfile()), mask


def render_single(grid, cmap="magma"):
    return apply_colormap(grid, cmap)


def nuclear_wavelength(wavelengths):
    """Pick the DNA-contrast channel: the shortest wavelength."""
    return min(wavelengths)


def cytoplasm_wavelength(wavelengths):
    return max(wavelengths)
