"""Command-line interface.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import formats
from .acquisition import plan_scan, simulate_dataset
from .colorize import StainProfile, apply_colormap, mix_hne, segment_tissue
from .envelope import dump_envelopes
from .errors import ParsError
from .phantom import AbsorptionSpectrum, PhantomSpec, default_spectra, generate_phantom
from .pipeline import cytoplasm_wavelength, nuclear_wavelength, reconstruct


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _pair(text):
    parts = text.lower().replace("*", "x").split("x")
    if len(parts) == 1:
        parts *= 2
    try:
        x, y = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    return x, y


def _floats(text):
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_plan_args(p, standalone=True):
    p.add_argument("--mode", choices=("optical", "mechanical"), default="optical")
    p.add_argument("--fov", type=_pair, default=(1000.0, 1000.0) if standalone else None,
                   help="field of view WxH in um" + (" (default 1000x1000)" if standalone else
                                                       " (default: phantom extent)"))
    size = p.add_mutually_exclusive_group(required=standalone)
    size.add_argument("--step", type=float, help="lateral sampling pitch in um")
    size.add_argument("--points", type=int, help="total interrogations per wavelength")
    p.add_argument("--rate", type=float, default=20_000.0, help="repetition rate in Hz")
    p.add_argument("--wavelengths", type=_floats, default=(266.0,), help="e.g. 250,420")
    p.add_argument("--energy", type=float, default=10.0, help="pulse energy in nJ")
    p.add_argument("--psf", type=float, default=2.5, help="excitation FWHM in um")
    p.add_argument("--overhead", type=float, default=0.0, help="fractional scan overhead")


def _plan_from(args, fov=None):
    fov = args.fov or fov
    if args.step is None and args.points is None:
        args.step = 0.9
    return plan_scan(args.mode, fov, step_um=args.step, point_count=args.points,
                     rep_rate_hz=args.rate, wavelengths_nm=args.wavelengths,
                     pulse_energy_nj=args.energy, psf_fwhm_um=args.psf,
                     overhead_fraction=args.overhead)


def _add_phantom_args(p):
    p.add_argument("--phantom", type=Path, help="phantom key=value config")
    p.add_argument("--extent", type=_pair, help="phantom extent WxH in um")
    p.add_argument("--pitch", type=float, help="phantom cell pitch in um")
    p.add_argument("--nuclei", type=int, help="nucleus count")
    p.add_argument("--vessel", action="store_true")
    p.add_argument("--necrosis", action="store_true")
    p.add_argument("--spectra", type=Path, help="absorption spectra key=value config")
    p.add_argument("--noise", type=float, default=0.0, help="trace noise std (digitizer units)")
    p.add_argument("--seed", type=int, default=0)


def _phantom_from(args):
    kv = formats.read_config(args.phantom) if args.phantom else {}
    spec = PhantomSpec.from_mapping(kv)
    updates = {"seed": args.seed}
    if args.extent:
        updates["width_um"], updates["height_um"] = args.extent
    if args.pitch:
        updates["resolution_um"] = args.pitch
    if args.nuclei is not None:
        updates["nucleus_count"] = args.nuclei
    if args.vessel:
        updates["vessel"] = True
    if args.necrosis:
        updates["necrosis"] = True
    return generate_phantom(spec, **updates)


def _spectra_from(args):
    if args.spectra:
        return AbsorptionSpectrum.from_mapping(formats.read_config(args.spectra))
    return default_spectra()


def _profile_from(path):
    return StainProfile.from_mapping(formats.read_config(path)) if path else StainProfile()


def cmd_plan(args, out):
    plan = _plan_from(args)
    print(plan.format_table() if args.table else plan.format_kv(), file=out)


def _simulate(args):
    phantom = _phantom_from(args)
    plan = _plan_from(args, fov=(phantom.width_um, phantom.height_um))
    records = simulate_dataset(phantom, plan, _spectra_from(args), noise_std=args.noise, seed=args.seed)
    return phantom, plan, records


def cmd_simulate(args, out):
    _, plan, records = _simulate(args)
    size = formats.write_dataset(records, plan, args.out)
    print(f"wrote {len(records)} records ({size} bytes) to {args.out}", file=out)


def _write_grids(grids, outdir):
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for wl, grid in grids.items():
        paths[wl] = formats.write_grid(outdir / f"grid_{wl:g}nm.pgm", grid)
    return paths


def cmd_reconstruct(args, out):
    records, plan = formats.read_dataset(args.dataset)
    if args.dump_trace is not None:
        if not 0 <= args.dump_trace < len(records):
            raise UsageError(f"--dump-trace index {args.dump_trace} out of range")
        out.write(dump_envelopes(records[args.dump_trace].trace))
        return
    grids = reconstruct(records, plan, radius_um=args.radius)
    for wl, path in _write_grids(grids, args.out).items():
        print(f"{wl:g} nm -> {path}", file=out)


def cmd_colorize(args, out):
    if args.dump_profile:
        out.write(formats.format_config(StainProfile().to_mapping(), header="default stain profile"))
        return
    if args.out is None:
        raise UsageError("colorize: -o/--out is required")
    if args.hne:
        g250, g420 = (formats.read_grid(p) for p in args.hne)
        mask = segment_tissue(g250, args.window)
        img = mix_hne(g250, g420, mask, _profile_from(args.profile))
    elif args.grid:
        img = apply_colormap(formats.read_grid(args.grid), args.cmap, args.range)
    else:
        raise UsageError("colorize: give a GRID or --hne GRID250 GRID420")
    formats.write_ppm8(args.out, img.pixels)
    print(f"wrote {args.out}", file=out)


def cmd_pipeline(args, out):
    phantom, plan, records = _simulate(args)
    outdir = args.out
    outdir.mkdir(parents=True, exist_ok=True)
    formats.write_dataset(records, plan, outdir / "dataset.pars")
    grids = reconstruct(records, plan, radius_um=args.radius)
    _write_grids(grids, outdir)
    for wl, grid in grids.items():
        formats.write_ppm8(outdir / f"image_{wl:g}nm.ppm", apply_colormap(grid, args.cmap).pixels)
    if len(grids) >= 2:
        nuc = grids[nuclear_wavelength(grids)]
        cyt = grids[cytoplasm_wavelength(grids)]
        mask = segment_tissue(nuc, args.window)
        img = mix_hne(nuc, cyt, mask, _profile_from(args.profile))
        formats.write_ppm8(outdir / "hne.ppm", img.pixels)
    print(f"pipeline: {len(records)} records, {len(grids)} grid(s) in {outdir}", file=out)


def cmd_validate(args, out):
    from .validation import run_checks

    if not run_checks(out):
        return 2


def build_parser():
    parser = _Parser(prog="parsim", description="PARS microscopy simulation and reconstruction")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="print scan durations")
    _add_plan_args(p)
    p.add_argument("--table", action="store_true", help="aligned table instead of key=value lines")
    p.set_defaults(func=cmd_plan)

    for name, func, helptext in (("simulate", cmd_simulate, "phantom + plan -> dataset"),
                                 ("pipeline", cmd_pipeline, "simulate, reconstruct and colorize")):
        p = sub.add_parser(name, help=helptext)
        _add_phantom_args(p)
        _add_plan_args(p, standalone=False)
        p.add_argument("-o", "--out", type=Path, required=True)
        if name == "pipeline":
            p.add_argument("--radius", type=float)
            p.add_argument("--cmap", default="magma")
            p.add_argument("--window", type=float, default=25.0)
            p.add_argument("--profile", type=Path)
        p.set_defaults(func=func)

    p = sub.add_parser("reconstruct", help="dataset -> per-wavelength P5 grids")
    p.add_argument("dataset", type=Path)
    p.add_argument("-o", "--out", type=Path, default=Path("."))
    p.add_argument("--radius", type=float, help="nearest-neighbour radius in um (default one pitch)")
    p.add_argument("--dump-trace", type=int, metavar="INDEX",
                   help="print trace, envelopes and gate of one record as text columns")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("colorize", help="grids -> P6 image")
    p.add_argument("grid", nargs="?", type=Path)
    p.add_argument("--hne", nargs=2, type=Path, metavar=("GRID250", "GRID420"))
    p.add_argument("-o", "--out", type=Path)
    p.add_argument("--cmap", default="magma")
    p.add_argument("--range", type=_floats, help="explicit lo,hi amplitude range")
    p.add_argument("--window", type=float, default=25.0, help="nuclear density window in um")
    p.add_argument("--profile", type=Path, help="stain profile key=value config")
    p.add_argument("--dump-profile", action="store_true", help="print the default stain profile")
    p.set_defaults(func=cmd_colorize)

    p = sub.add_parser("validate", help="run deterministic self-checks")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        status = args.func(args, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ParsError, OSError, ValueError) as exc:
        print(f"parsim: error: {exc}", file=sys.stderr)
        return 2
    return status or 0


if __name__ == "__main__":
    sys.exit(main())
