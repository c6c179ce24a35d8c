"""Synthetic chromophore phantoms and absorption spectra.

A phantom holds ground-truth DNA and cytochrome density maps sampled on a
regular lattice. Node ``(i, j)`` sits at ``x = j * resolution_um``,
``y = i * resolution_um`` so the lattice spans ``[0, width_um]`` by
``[0, height_um]`` inclusive, and positions between nodes are sampled
bilinearly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Mapping

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import ndimage

from .errors import InvalidSpecError, OutOfBoundsError, SpectrumRangeError

SPECIES = ("dna", "cytochrome")

FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


class AbsorptionSpectrum:
    """Relative absorption coefficients for DNA and cytochrome.

    Each species has its own table of ``(wavelength_nm, coefficient)``
    pairs; lookups between tabulated wavelengths interpolate linearly and
    lookups outside a table raise ``SpectrumRangeError``.
    """

    def __init__(self, entries: Mapping[str, list[tuple[float, float]]]):
        tables = {}
        for species in SPECIES:
            if species not in entries:
                raise InvalidSpecError(f"spectrum is missing species {species!r}")
            pairs = sorted(entries[species])
            wl = np.array([p[0] for p in pairs], dtype=float)
            coef = np.array([p[1] for p in pairs], dtype=float)
            if wl.size == 0:
                raise InvalidSpecError(f"empty spectrum table for {species}")
            if np.any(np.diff(wl) <= 0):
                raise InvalidSpecError(f"{species} wavelengths must be strictly increasing")
            if np.any(coef < 0) or not np.all(np.isfinite(coef)):
                raise InvalidSpecError(f"{species} coefficients must be finite and >= 0")
            tables[species] = (wl, coef)
        extra = set(entries) - set(SPECIES)
        if extra:
            raise InvalidSpecError(f"unknown species: {sorted(extra)}")
        self._tables = tables
        self._check_contrast()

    def _check_contrast(self):
        # Only checked when the tables reach every wavelength involved.
        try:
            d250, d266, d420 = (self.coefficient("dna", w) for w in (250, 266, 420))
            c250, c420 = (self.coefficient("cytochrome", w) for w in (250, 420))
        except SpectrumRangeError:
            return
        if not (d250 > d420 and d266 > d420):
            raise InvalidSpecError("DNA must absorb more at 250/266 nm than at 420 nm")
        if not c420 > c250:
            raise InvalidSpecError("cytochrome must absorb more at 420 nm than at 250 nm")

    def table(self, species):
        wl, coef = self._tables[species]
        return list(zip(wl.tolist(), coef.tolist()))

    def wavelength_range(self, species=None):
        """Wavelength interval covered by every requested table."""
        names = SPECIES if species is None else (species,)
        lo = max(self._tables[s][0][0] for s in names)
        hi = min(self._tables[s][0][-1] for s in names)
        return float(lo), float(hi)

    def coefficient(self, species, wavelength_nm):
        try:
            wl, coef = self._tables[species]
        except KeyError:
            raise InvalidSpecError(f"unknown species {species!r}") from None
        w = float(wavelength_nm)
        if not (wl[0] <= w <= wl[-1]):
            raise SpectrumRangeError(
                f"{w} nm is outside the {species} table [{wl[0]}, {wl[-1]}] nm"
            )
        return float(np.interp(w, wl, coef))

    @classmethod
    def from_mapping(cls, kv: Mapping[str, str]):
        """Build from ``species.wavelength = coefficient`` entries."""
        entries: dict[str, list] = {}
        for key, value in kv.items():
            species, _, wl = key.partition(".")
            if not wl:
                raise InvalidSpecError(f"bad spectrum key {key!r}; expected species.wavelength")
            entries.setdefault(species.strip().lower(), []).append((float(wl), float(value)))
        return cls(entries)

    def to_mapping(self):
        out = {}
        for species in SPECIES:
            for wl, coef in self.table(species):
                out[f"{species}.{wl:g}"] = f"{coef:g}"
        return out

    def __eq__(self, other):
        if not isinstance(other, AbsorptionSpectrum):
            return NotImplemented
        return all(self.table(s) == other.table(s) for s in SPECIES)

    def __repr__(self):
        return f"AbsorptionSpectrum(dna={self.table('dna')}, cytochrome={self.table('cytochrome')})"


def default_spectra() -> AbsorptionSpectrum:
    """Stand-in relative spectra; only the contrast ordering is meaningful."""
    return AbsorptionSpectrum(
        {
            "dna": [(250.0, 1.0), (266.0, 0.9), (420.0, 0.02)],
            "cytochrome": [(250.0, 0.1), (266.0, 0.1), (420.0, 1.0)],
        }
    )


@dataclass(frozen=True)
class PhantomSpec:
    width_um: float = 200.0
    height_um: float = 200.0
    resolution_um: float = 0.5
    nucleus_count: int = 50
    nucleus_radius_min_um: float = 3.0
    nucleus_radius_max_um: float = 5.0
    # width of the cosine taper straddling each nucleus rim; 0 gives hard disks
    edge_width_um: float = 0.0
    tissue_radius_fraction: float = 0.4
    cytochrome_level: float = 0.5
    cytochrome_variation: float = 0.15
    nuclear_cytochrome_factor: float = 0.2
    vessel: bool = False
    necrosis: bool = False
    seed: int = 0

    def validate(self):
        if not (self.width_um > 0 and self.height_um > 0 and self.resolution_um > 0):
            raise InvalidSpecError("phantom extent and resolution must be positive")
        if self.resolution_um > min(self.width_um, self.height_um):
            raise InvalidSpecError("resolution must not exceed the phantom extent")
        if self.nucleus_count < 0:
            raise InvalidSpecError("nucleus_count must be >= 0")
        if not (0 < self.nucleus_radius_min_um <= self.nucleus_radius_max_um):
            raise InvalidSpecError("need 0 < nucleus_radius_min_um <= nucleus_radius_max_um")
        if self.edge_width_um < 0:
            raise InvalidSpecError("edge_width_um must be >= 0")
        if not 0 < self.tissue_radius_fraction <= 0.5:
            raise InvalidSpecError("tissue_radius_fraction must be in (0, 0.5]")
        for name in ("cytochrome_level", "nuclear_cytochrome_factor"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidSpecError(f"{name} must be in [0, 1]")
        if self.cytochrome_variation < 0:
            raise InvalidSpecError("cytochrome_variation must be >= 0")

    @classmethod
    def from_mapping(cls, kv: Mapping[str, str]):
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in kv.items():
            if key not in known:
                raise InvalidSpecError(f"unknown phantom parameter {key!r}")
            default = known[key].default
            if isinstance(default, bool):
                kwargs[key] = str(raw).strip().lower() in ("1", "true", "yes", "on")
            elif isinstance(default, int):
                kwargs[key] = int(raw)
            else:
                kwargs[key] = float(raw)
        return cls(**kwargs)

    def to_mapping(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = str(value).lower() if isinstance(value, bool) else repr(value)
        return out


@dataclass(frozen=True, eq=False)
class ChromophorePhantom:
    width_um: float
    height_um: float
    resolution_um: float
    dna_density: np.ndarray
    cytochrome_density: np.ndarray
    background_reflectance: np.ndarray
    tissue_mask: np.ndarray
    seed: int | None = None
    # (x_um, y_um, radius_um) of every placed nucleus
    nuclei: tuple = field(default=(), repr=False)

    def __post_init__(self):
        for name in ("dna_density", "cytochrome_density", "background_reflectance", "tissue_mask"):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        shape = self.dna_density.shape
        if any(getattr(self, n).shape != shape for n in
               ("cytochrome_density", "background_reflectance", "tissue_mask")):
            raise InvalidSpecError("phantom fields must share one shape")

    @property
    def shape(self):
        return self.dna_density.shape

    def node_coordinates(self):
        ny, nx = self.shape
        return np.arange(nx) * self.resolution_um, np.arange(ny) * self.resolution_um

    def contains(self, x_um, y_um):
        x = np.asarray(x_um, dtype=float)
        y = np.asarray(y_um, dtype=float)
        return (x >= 0) & (x <= self.width_um) & (y >= 0) & (y <= self.height_um)

    def sample(self, name, x_um, y_um):
        """Bilinearly sample one density field at arbitrary positions."""
        return _bilinear(getattr(self, name), self.resolution_um, x_um, y_um)


def _bilinear(grid, pitch, x_um, y_um):
    ny, nx = grid.shape
    fx = np.clip(np.asarray(x_um, dtype=float) / pitch, 0.0, nx - 1)
    fy = np.clip(np.asarray(y_um, dtype=float) / pitch, 0.0, ny - 1)
    j0 = np.minimum(np.floor(fx).astype(np.intp), max(nx - 2, 0))
    i0 = np.minimum(np.floor(fy).astype(np.intp), max(ny - 2, 0))
    j1 = np.minimum(j0 + 1, nx - 1)
    i1 = np.minimum(i0 + 1, ny - 1)
    tx = fx - j0
    ty = fy - i0
    top = grid[i0, j0] * (1 - tx) + grid[i0, j1] * tx
    bottom = grid[i1, j0] * (1 - tx) + grid[i1, j1] * tx
    return top * (1 - ty) + bottom * ty


def _lattice(spec):
    nx = int(round(spec.width_um / spec.resolution_um)) + 1
    ny = int(round(spec.height_um / spec.resolution_um)) + 1
    return nx, ny


def _smooth_noise(rng, shape, sigma_px):
    noise = ndimage.gaussian_filter(rng.standard_normal(shape), sigma_px, mode="wrap")
    peak = np.abs(noise).max()
    return noise / peak if peak > 0 else noise


def _tissue_mask(rng, spec, xx, yy):
    cx, cy = spec.width_um / 2, spec.height_um / 2
    radius = spec.tissue_radius_fraction * min(spec.width_um, spec.height_um)
    theta = np.arctan2(yy - cy, xx - cx)
    wobble = np.ones_like(theta)
    for k in (2, 3, 4):
        wobble += rng.uniform(0, 0.06) * np.cos(k * theta + rng.uniform(0, 2 * np.pi))
    return np.hypot(xx - cx, yy - cy) <= radius * wobble


def _disk_profile(d, radius, edge):
    if edge <= 0:
        return (d <= radius).astype(float)
    inner = radius - edge / 2
    t = np.clip((d - inner) / edge, 0.0, 1.0)
    return 0.5 * (1 + np.cos(np.pi * t))


def _place_nuclei(rng, spec, mask, pitch):
    """Rejection-sample non-overlapping nuclei fully inside the tissue.

    Falls back to allowing overlap once the attempt budget runs out.
    """
    depth = ndimage.distance_transform_edt(mask) * pitch
    inside = np.argwhere(depth > spec.nucleus_radius_min_um)
    placed: list[tuple[float, float, float]] = []
    if spec.nucleus_count == 0 or inside.size == 0:
        return placed
    budget = 200 * spec.nucleus_count
    attempts = 0
    while len(placed) < spec.nucleus_count:
        attempts += 1
        r = rng.uniform(spec.nucleus_radius_min_um, spec.nucleus_radius_max_um)
        i, j = inside[rng.integers(len(inside))]
        if depth[i, j] < r:
            if attempts > 50 * budget:
                break
            continue
        x, y = j * pitch, i * pitch
        if attempts <= budget and any(
            np.hypot(x - px, y - py) < r + pr + 0.5 for px, py, pr in placed
        ):
            continue
        placed.append((float(x), float(y), float(r)))
    return placed


def generate_phantom(spec: PhantomSpec | None = None, **overrides) -> ChromophorePhantom:
    """Generate a tissue phantom with disk nuclei inside a blob of tissue.

    Nuclei carry DNA density 1 in their interior. Cytochrome density is a
    smooth random field throughout the tissue, depressed inside nuclei.
    Everything outside the tissue mask is zero. The result is a pure
    function of ``spec`` (including its seed).
    """
    spec = replace(spec or PhantomSpec(), **overrides)
    spec.validate()
    pitch = spec.resolution_um
    nx, ny = _lattice(spec)
    rng = np.random.default_rng(spec.seed)
    xs = np.arange(nx) * pitch
    ys = np.arange(ny) * pitch
    xx, yy = np.meshgrid(xs, ys)

    mask = _tissue_mask(rng, spec, xx, yy)
    lumen = None
    if spec.vessel:
        vr = 0.08 * min(spec.width_um, spec.height_um)
        vx = spec.width_um / 2 + rng.uniform(-0.15, 0.15) * spec.width_um
        vy = spec.height_um / 2 + rng.uniform(-0.15, 0.15) * spec.height_um
        dv = np.hypot(xx - vx, yy - vy)
        lumen = dv <= vr
        wall = (dv > vr) & (dv <= vr + 3.0)
        mask &= ~lumen

    necrotic = np.zeros_like(mask)
    if spec.necrosis:
        nr = 0.2 * min(spec.width_um, spec.height_um)
        nxc = spec.width_um / 2 + rng.uniform(-0.1, 0.1) * spec.width_um
        nyc = spec.height_um / 2 + rng.uniform(-0.1, 0.1) * spec.height_um
        necrotic = mask & (np.hypot(xx - nxc, yy - nyc) <= nr)

    nuclei = _place_nuclei(rng, spec, mask, pitch)
    dna = np.zeros((ny, nx))
    reach = spec.nucleus_radius_max_um + spec.edge_width_um
    for k, (x, y, r) in enumerate(nuclei):
        j0 = max(int(np.floor((x - reach) / pitch)), 0)
        j1 = min(int(np.ceil((x + reach) / pitch)) + 1, nx)
        i0 = max(int(np.floor((y - reach) / pitch)), 0)
        i1 = min(int(np.ceil((y + reach) / pitch)) + 1, ny)
        d = np.hypot(xx[i0:i1, j0:j1] - x, yy[i0:i1, j0:j1] - y)
        level = 1.0
        if necrotic[int(round(y / pitch)), int(round(x / pitch))]:
            # pyknotic fragments: shrunken, fainter nuclei
            r, level = 0.4 * r, 0.6
            nuclei[k] = (x, y, r)
        dna[i0:i1, j0:j1] = np.maximum(dna[i0:i1, j0:j1], level * _disk_profile(d, r, spec.edge_width_um))
    dna *= mask

    texture = _smooth_noise(rng, (ny, nx), sigma_px=max(2.0 / pitch, 1.0))
    cyt = spec.cytochrome_level + spec.cytochrome_variation * texture
    cyt = cyt * (1 - (1 - spec.nuclear_cytochrome_factor) * dna)
    cyt[necrotic] *= 0.4
    if lumen is not None:
        cyt[wall & mask] = 0.9
    cyt = np.clip(cyt, 0.0, 1.0) * mask

    refl = np.where(mask, 0.6 + 0.1 * _smooth_noise(rng, (ny, nx), 4.0), 0.9)
    refl = np.clip(refl, 0.05, 1.0)

    return ChromophorePhantom(
        width_um=(nx - 1) * pitch,
        height_um=(ny - 1) * pitch,
        resolution_um=pitch,
        dna_density=dna,
        cytochrome_density=cyt,
        background_reflectance=refl,
        tissue_mask=mask,
        seed=spec.seed,
        nuclei=tuple(nuclei),
    )


def uniform_phantom(width_um, height_um, resolution_um, dna=0.0, cytochrome=0.0):
    """Phantom filled everywhere with constant densities."""
    nx = int(round(width_um / resolution_um)) + 1
    ny = int(round(height_um / resolution_um)) + 1
    full = np.ones((ny, nx))
    return ChromophorePhantom(
        width_um=(nx - 1) * resolution_um,
        height_um=(ny - 1) * resolution_um,
        resolution_um=resolution_um,
        dna_density=dna * full,
        cytochrome_density=cytochrome * full,
        background_reflectance=0.6 * full,
        tissue_mask=full.astype(bool),
    )


def knife_edge_phantom(width_um, height_um, resolution_um, edge_x_um=None):
    """Phantom with DNA density 1 for ``x >= edge_x_um`` and 0 elsewhere."""
    base = uniform_phantom(width_um, height_um, resolution_um)
    xs, _ = base.node_coordinates()
    edge = base.width_um / 2 if edge_x_um is None else edge_x_um
    dna = np.broadcast_to((xs >= edge).astype(float), base.shape)
    return replace(base, dna_density=dna)


def absorption_at(phantom: ChromophorePhantom, x_um, y_um, wavelength_nm,
                  spectra: AbsorptionSpectrum | None = None):
    """Absorption coefficient at a position: the spectrum-weighted sum of
    the two density fields. Accepts scalars or arrays of positions."""
    spectra = spectra or default_spectra()
    eps_dna = spectra.coefficient("dna", wavelength_nm)
    eps_cyt = spectra.coefficient("cytochrome", wavelength_nm)
    if not np.all(phantom.contains(x_um, y_um)):
        raise OutOfBoundsError(
            f"position outside phantom extent [0, {phantom.width_um}] x [0, {phantom.height_um}] um"
        )
    dna = phantom.sample("dna_density", x_um, y_um)
    cyt = phantom.sample("cytochrome_density", x_um, y_um)
    out = dna * eps_dna + cyt * eps_cyt
    return float(out) if np.ndim(out) == 0 else out


def gauss_psf_nodes(fwhm_um, order=5):
    """Tensor-product Gauss-Hermite offsets and weights for a 2D Gaussian.

    Returns ``(dx, dy, w)`` with ``w`` summing to one, so
    ``sum(w * f(x + dx, y + dy))`` approximates the Gaussian-weighted mean.
    """
    t, wt = hermgauss(order)
    scale = np.sqrt(2.0) * fwhm_um * FWHM_TO_SIGMA
    w1 = wt / np.sqrt(np.pi)
    dx, dy = np.meshgrid(t * scale, t * scale)
    w = np.outer(w1, w1)
    return dx.ravel(), dy.ravel(), w.ravel()


def psf_weighted_absorption(phantom, spectra, x_um, y_um, wavelength_nm, psf_fwhm_um):
    """Absorption averaged over a Gaussian focal spot (5x5 quadrature).

    Quadrature points falling outside the phantom take the nearest edge
    value; the spot centres themselves are not bounds-checked here.
    """
    eps_dna = spectra.coefficient("dna", wavelength_nm)
    eps_cyt = spectra.coefficient("cytochrome", wavelength_nm)
    x = np.atleast_1d(np.asarray(x_um, dtype=float))
    y = np.atleast_1d(np.asarray(y_um, dtype=float))
    if psf_fwhm_um <= 0:
        px, py, w = np.zeros(1), np.zeros(1), np.ones(1)
    else:
        px, py, w = gauss_psf_nodes(psf_fwhm_um)
    qx = x[:, None] + px[None, :]
    qy = y[:, None] + py[None, :]
    pitch = phantom.resolution_um
    dna = _bilinear(phantom.dna_density, pitch, qx, qy) @ w
    cyt = _bilinear(phantom.cytochrome_density, pitch, qx, qy) @ w
    out = dna * eps_dna + cyt * eps_cyt
    return float(out[0]) if np.ndim(x_um) == 0 else out
