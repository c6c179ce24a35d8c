"""Photoacoustic remote sensing (PARS) microscopy simulation and reconstruction.

Synthetic phantoms are scanned by a galvo or stage trajectory, each pulse
yields a photodiode trace whose modulation is proportional to the locally
absorbed energy, and traces are turned back into amplitude images and
virtual H&E renderings.
"""

from .acquisition import (
    DigitizerConfig,
    InterrogationRecord,
    ScanPlan,
    Trace,
    bipolar_template,
    generate_trajectory,
    plan_scan,
    simulate_dataset,
    simulate_trace,
)
from .colorize import RgbImage, StainProfile, apply_colormap, mix_hne, segment_tissue, stain_mix
from .envelope import EnvelopePair, extract_envelopes, pars_amplitude, pars_amplitudes
from .formats import read_dataset, read_grid, write_dataset, write_grid, write_pgm16, write_ppm8
from .gridding import AmplitudeGrid, GridSpec, fit_to_grid, grid_mechanical, interpolate_gaps
from .phantom import (
    AbsorptionSpectrum,
    ChromophorePhantom,
    PhantomSpec,
    absorption_at,
    default_spectra,
    generate_phantom,
    knife_edge_phantom,
    uniform_phantom,
)
from .pipeline import reconstruct

__version__ = "0.1.0"
