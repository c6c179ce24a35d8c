"""Single-channel colormaps, tissue segmentation and virtual H&E mixing."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields

import numpy as np
from matplotlib import colormaps
from scipy import ndimage

from .errors import InvalidProfileError, InvalidWindowError, ShapeError
from .gridding import MISSING, AmplitudeGrid


@dataclass(frozen=True, eq=False)
class RgbImage:
    pixels: np.ndarray  # (ny, nx, 3), floats in [0, 1]

    def __post_init__(self):
        px = np.clip(np.asarray(self.pixels, dtype=float), 0.0, 1.0)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ShapeError("RGB pixels must have shape (ny, nx, 3)")
        object.__setattr__(self, "pixels", px)

    @property
    def ny(self):
        return self.pixels.shape[0]

    @property
    def nx(self):
        return self.pixels.shape[1]


def _filled_values(grid):
    vals = grid.values[grid.state != MISSING]
    return vals if vals.size else np.zeros(1)


def percentile_range(values, lo=1.0, hi=99.0):
    # "nearest" keeps a thin tail of outliers from dragging the upper bound
    return tuple(float(v) for v in np.percentile(values, [lo, hi], method="nearest"))


def normalize(values, vmin, vmax):
    if vmax <= vmin:
        return np.zeros_like(np.asarray(values, dtype=float))
    return np.clip((np.asarray(values, dtype=float) - vmin) / (vmax - vmin), 0.0, 1.0)


def apply_colormap(grid: AmplitudeGrid, cmap="magma", value_range=None, percentiles=(1.0, 99.0),
                   background=(0.0, 0.0, 0.0)) -> RgbImage:
    """Render a grid through a named matplotlib colormap.

    ``value_range=None`` stretches between the given percentiles of the
    filled nodes; an explicit ``(vmin, vmax)`` is used as is. Missing nodes
    take ``background``.
    """
    lut = colormaps[cmap]
    if value_range is None:
        vmin, vmax = percentile_range(_filled_values(grid), *percentiles)
    else:
        vmin, vmax = (float(v) for v in value_range)
    if vmax == vmin:
        warnings.warn("degenerate colormap range; rendering uniform mid colour", stacklevel=2)
        t = np.full(grid.values.shape, 0.5)
    else:
        t = normalize(grid.values, vmin, vmax)
    rgb = np.asarray(lut(t))[..., :3]
    rgb[grid.state == MISSING] = background
    return RgbImage(rgb)


def otsu_threshold_bin(values, bins=256):
    """Otsu split on a histogram of ``values`` scaled to ``[0, 1]``.

    Returns ``(bin_index, digitized)`` where the foreground is
    ``digitized > bin_index``; ``bin_index`` is ``bins - 1`` (nothing in
    the foreground) for constant input.
    """
    v = np.asarray(values, dtype=float).ravel()
    lo, hi = v.min(), v.max()
    if hi <= lo:
        return bins - 1, np.zeros(v.shape, dtype=np.intp)
    digitized = np.minimum(((v - lo) / (hi - lo) * bins).astype(np.intp), bins - 1)
    hist = np.bincount(digitized, minlength=bins).astype(float)
    p = hist / hist.sum()
    omega = np.cumsum(p)
    mu = np.cumsum(p * np.arange(bins))
    mu_t = mu[-1]
    denom = omega * (1.0 - omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        between = np.where(denom > 0, (mu_t * omega - mu) ** 2 / denom, -1.0)
    return int(np.argmax(between)), digitized


def otsu_threshold(values, bins=256):
    """Threshold value (upper edge of the background class) by Otsu's method."""
    v = np.asarray(values, dtype=float)
    t, _ = otsu_threshold_bin(v, bins)
    lo, hi = v.min(), v.max()
    return float(lo + (t + 1) * (hi - lo) / bins) if hi > lo else float(hi)


def _close(mask):
    padded = np.pad(mask, 1, mode="edge")
    closed = ndimage.binary_closing(padded, structure=np.ones((3, 3), dtype=bool))
    return closed[1:-1, 1:-1]


def nuclear_density(grid: AmplitudeGrid, window_um=25.0):
    if window_um < grid.pitch_um:
        raise InvalidWindowError(f"density window {window_um} um is smaller than the pitch {grid.pitch_um} um")
    size = int(round(window_um / grid.pitch_um))
    size += 1 - size % 2
    values = np.where(grid.state == MISSING, 0.0, grid.values)
    # scale first so the Otsu split cannot depend on the amplitude units
    peak = np.abs(values).max()
    if peak > 0:
        values = values / peak
    return ndimage.uniform_filter(values, size=size, mode="reflect")


def segment_tissue(nuclear_grid: AmplitudeGrid, window_um=25.0, threshold="otsu") -> np.ndarray:
    """Tissue mask from the local mean of the nuclear channel.

    ``threshold`` is ``"otsu"`` or an explicit amplitude. The mask is closed
    with a 3x3 structuring element (edges replicated, so the border is not
    eroded).
    """
    density = nuclear_density(nuclear_grid, window_um)
    if isinstance(threshold, str):
        if threshold != "otsu":
            raise ValueError(f"unknown threshold method {threshold!r}")
        t, digitized = otsu_threshold_bin(density)
        mask = digitized.reshape(density.shape) > t
    else:
        peak = np.abs(np.where(nuclear_grid.state == MISSING, 0.0, nuclear_grid.values)).max()
        mask = density * peak > float(threshold)
    return _close(mask)


def _rgb(value, name):
    arr = np.asarray(value, dtype=float).ravel()
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise InvalidProfileError(f"{name} must be three finite numbers")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class StainProfile:
    # standard colour-deconvolution stain vectors
    hematoxylin_absorbance: tuple = (0.65, 0.70, 0.29)
    eosin_absorbance: tuple = (0.07, 0.99, 0.11)
    k_h: float = 1.0
    k_e: float = 1.0
    background_color: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        for name in ("hematoxylin_absorbance", "eosin_absorbance", "background_color"):
            object.__setattr__(self, name, _rgb(getattr(self, name), name))
        a_h = np.array(self.hematoxylin_absorbance)
        a_e = np.array(self.eosin_absorbance)
        if np.any(a_h < 0) or np.any(a_e < 0):
            raise InvalidProfileError("stain absorbances must be >= 0")
        if not (a_h.any() and a_e.any()):
            raise InvalidProfileError("stain absorbances must be non-zero")
        if np.linalg.norm(np.cross(a_h, a_e)) <= 1e-9 * np.linalg.norm(a_h) * np.linalg.norm(a_e):
            raise InvalidProfileError("hematoxylin and eosin absorbances are parallel")
        if self.k_h < 0 or self.k_e < 0:
            raise InvalidProfileError("mixing gains must be >= 0")
        if not all(0.0 <= c <= 1.0 for c in self.background_color):
            raise InvalidProfileError("background colour channels must be in [0, 1]")

    @property
    def hematoxylin_color(self):
        return tuple(np.exp(-np.array(self.hematoxylin_absorbance)).tolist())

    @property
    def eosin_color(self):
        return tuple(np.exp(-np.array(self.eosin_absorbance)).tolist())

    @classmethod
    def from_mapping(cls, kv):
        kwargs = {}
        for key, raw in kv.items():
            if key in ("k_h", "k_e"):
                kwargs[key] = float(raw)
            elif key in ("hematoxylin_absorbance", "eosin_absorbance", "background_color"):
                kwargs[key] = tuple(float(p) for p in str(raw).split(","))
            else:
                raise InvalidProfileError(f"unknown stain profile key {key!r}")
        return cls(**kwargs)

    def to_mapping(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = ", ".join(f"{c:g}" for c in v) if isinstance(v, tuple) else f"{v:g}"
        return out


def stain_mix(nuclear, cytoplasm, profile: StainProfile | None = None):
    """Beer-Lambert mixing of normalized channels into RGB.

    ``rgb = exp(-(k_h * n * A_h + k_e * e * A_e))`` per colour channel.
    """
    profile = profile or StainProfile()
    n = np.asarray(nuclear, dtype=float)[..., None]
    e = np.asarray(cytoplasm, dtype=float)[..., None]
    od = profile.k_h * n * np.array(profile.hematoxylin_absorbance) \
        + profile.k_e * e * np.array(profile.eosin_absorbance)
    return np.exp(-od)


def mix_hne(grid_250: AmplitudeGrid, grid_420: AmplitudeGrid, mask, profile: StainProfile | None = None,
            percentiles=(1.0, 99.0)) -> RgbImage:
    """False-colour H&E from the nuclear (250 nm) and cytoplasm (420 nm) grids.

    Each channel is stretched to ``[0, 1]`` between the given percentiles of
    its in-mask values, then mixed with ``stain_mix``. Pixels outside the
    mask are painted ``profile.background_color``.
    """
    profile = profile or StainProfile()
    if not grid_250.same_geometry(grid_420):
        raise ShapeError("250 nm and 420 nm grids differ in geometry")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid_250.values.shape:
        raise ShapeError("mask shape does not match the grids")
    sel = mask if mask.any() else np.ones_like(mask)
    n = normalize(grid_250.values, *percentile_range(grid_250.values[sel], *percentiles))
    e = normalize(grid_420.values, *percentile_range(grid_420.values[sel], *percentiles))
    rgb = stain_mix(n, e, profile)
    rgb[~mask] = profile.background_color
    return RgbImage(rgb)


def hue_degrees(rgb):
    from matplotlib.colors import rgb_to_hsv

    return rgb_to_hsv(np.clip(np.asarray(rgb, dtype=float), 0, 1))[..., 0] * 360.0
