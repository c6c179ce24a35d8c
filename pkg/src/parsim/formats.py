"""File formats: key=value config, PGM/PPM images and the PARS dataset.

Dataset layout, version 1, all fields little-endian::

    header (62 bytes)
        magic             4s   b"PARS"
        version           u16  1
        mode              u8   0 mechanical, 1 optical
        sizing            u8   0 = step_um, 1 = point_count
        wavelength_count  u16
        sample_rate_hz    f64
        pre_trigger       u32
        record_count      u64
        fov_x_um          f64
        fov_y_um          f64
        step_or_count     f64  step_um or point_count, per ``sizing``
        rep_rate_hz       f64
    wavelength table      f32 x wavelength_count
    records, each
        x_um f64, y_um f64, wavelength_nm f32, pulse_index u64,
        n_samples u32, samples i16 x n_samples
"""

from __future__ import annotations

import configparser
import os
import struct
from pathlib import Path

import numpy as np

from .acquisition import DigitizerConfig, InterrogationRecord, ScanPlan, Trace
from .errors import CorruptDatasetError, InvalidPlanError, MalformedTraceError, UnsupportedFormatError

MAGIC = b"PARS"
VERSION = 1
HEADER = struct.Struct("<4sHBBHdIQdddd")
RECORD_HEAD = struct.Struct("<ddfQI")
MODE_CODES = {"mechanical": 0, "optical": 1}
MODE_NAMES = {v: k for k, v in MODE_CODES.items()}


# -- key = value config -------------------------------------------------------

def parse_config(text):
    """Parse ``key = value`` lines with ``#`` comments into a dict."""
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None,
    )
    parser.optionxform = str
    # indentation would otherwise turn a line into a value continuation
    lines = (line.strip() for line in text.splitlines())
    parser.read_string("[root]\n" + "\n".join(lines))
    return dict(parser["root"])


def read_config(path):
    return parse_config(Path(path).read_text())


def format_config(mapping, header=None):
    lines = [f"# {header}"] if header else []
    lines += [f"{k} = {v}" for k, v in mapping.items()]
    return "\n".join(lines) + "\n"


def write_config(mapping, path, header=None):
    Path(path).write_text(format_config(mapping, header))


# -- portable any-maps --------------------------------------------------------

def write_pgm16(path, image):
    """Binary P5 with maxval 65535 (big-endian samples)."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("PGM needs a 2D array")
    data = np.clip(img, 0, 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n65535\n" % (img.shape[1], img.shape[0]))
        fh.write(data.tobytes())


def write_ppm8(path, rgb):
    """Binary P6 with maxval 255 from float RGB in [0, 1]."""
    img = np.asarray(rgb, dtype=float)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("PPM needs an (ny, nx, 3) array")
    data = np.rint(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(data.tobytes())


def _pnm_tokens(buf):
    """Yield (token, end_offset) for the first four header tokens."""
    pos = 0
    out = []
    while len(out) < 4:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise UnsupportedFormatError("truncated PNM header")
        out.append(buf[start:pos])
    return out, pos + 1


def read_pnm(path):
    """Read a binary P5 or P6 file; returns an integer array."""
    buf = Path(path).read_bytes()
    (magic, w, h, maxval), offset = _pnm_tokens(buf)
    w, h, maxval = int(w), int(h), int(maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    if magic == b"P5":
        shape = (h, w)
    elif magic == b"P6":
        shape = (h, w, 3)
    else:
        raise UnsupportedFormatError(f"not a binary PGM/PPM: {magic!r}")
    count = int(np.prod(shape))
    data = np.frombuffer(buf, dtype=dtype, count=count, offset=offset)
    return data.reshape(shape).astype(np.uint16 if maxval > 255 else np.uint8)


def write_grid(path, grid):
    """Write a grid as 16-bit P5 plus a ``.txt`` key=value sidecar.

    Values map linearly from ``[0, max amplitude]`` onto ``[0, 65535]``;
    the sidecar records the scale so amplitudes can be recovered.
    """
    path = Path(path)
    vmax = float(np.max(grid.values)) if grid.values.size else 0.0
    scale = 65535.0 / vmax if vmax > 0 else 0.0
    write_pgm16(path, np.rint(np.clip(grid.values, 0, None) * scale))
    meta = {
        "origin_x_um": repr(float(grid.origin_x_um)),
        "origin_y_um": repr(float(grid.origin_y_um)),
        "pitch_um": repr(float(grid.pitch_um)),
        "wavelength_nm": "" if grid.wavelength_nm is None else f"{grid.wavelength_nm:g}",
        "nx": str(grid.nx),
        "ny": str(grid.ny),
        "max_amplitude": repr(vmax),
    }
    write_config(meta, sidecar_path(path), header="parsim amplitude grid")
    return path


def sidecar_path(path):
    path = Path(path)
    return path.with_suffix(path.suffix + ".txt")


def read_grid(path):
    from .gridding import FILLED_DIRECT, AmplitudeGrid

    raw = read_pnm(path).astype(float)
    meta = read_config(sidecar_path(path))
    vmax = float(meta["max_amplitude"])
    values = raw * (vmax / 65535.0) if vmax > 0 else raw * 0.0
    wl = meta.get("wavelength_nm", "")
    return AmplitudeGrid(float(meta["origin_x_um"]), float(meta["origin_y_um"]),
                         float(meta["pitch_um"]), values,
                         np.full(values.shape, FILLED_DIRECT, dtype=np.uint8),
                         float(wl) if wl else None)


# -- PARS dataset -------------------------------------------------------------

def _f32(x):
    return float(np.float32(x))


def encode_dataset(records, plan: ScanPlan, digitizer: DigitizerConfig | None = None) -> bytes:
    if records:
        first = records[0].trace
        rate, pre = first.sample_rate_hz, first.pre_trigger_samples
    else:
        digitizer = digitizer or DigitizerConfig()
        rate, pre = digitizer.sample_rate_hz, digitizer.pre_trigger_samples
    table = [_f32(w) for w in plan.wavelengths_nm]
    sizing, amount = (0, plan.step_um) if plan.step_um is not None else (1, float(plan.point_count))
    parts = [
        HEADER.pack(MAGIC, VERSION, MODE_CODES[plan.mode], sizing, len(table), rate, pre,
                    len(records), plan.fov_x_um, plan.fov_y_um, amount, plan.rep_rate_hz),
        np.asarray(table, dtype="<f4").tobytes(),
    ]
    last = -1
    for k, rec in enumerate(records):
        t = rec.trace
        if t.sample_rate_hz != rate or t.pre_trigger_samples != pre:
            raise ValueError(f"record {k}: trace layout differs from the first record")
        if _f32(rec.wavelength_nm) not in table:
            raise ValueError(f"record {k}: wavelength {rec.wavelength_nm} not in the plan")
        if rec.pulse_index <= last:
            raise ValueError(f"record {k}: pulse_index must increase strictly")
        last = rec.pulse_index
        samples = np.asarray(t.samples)
        parts.append(RECORD_HEAD.pack(rec.x_um, rec.y_um, rec.wavelength_nm, rec.pulse_index, len(samples)))
        parts.append(samples.astype("<i2").tobytes())
    return b"".join(parts)


def decode_dataset(buf: bytes):
    """Inverse of ``encode_dataset``; returns ``(records, plan)``."""
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise UnsupportedFormatError("not a PARS dataset (bad magic)")
    if len(buf) < 6:
        raise CorruptDatasetError("file ends inside the header", len(buf))
    (version,) = struct.unpack_from("<H", buf, 4)
    if version != VERSION:
        raise UnsupportedFormatError(f"unsupported dataset version {version}")
    if len(buf) < HEADER.size:
        raise CorruptDatasetError(f"file ends inside the header at byte {len(buf)}", len(buf))
    (_, _, mode, sizing, n_wl, rate, pre, count,
     fov_x, fov_y, amount, rep_rate) = HEADER.unpack_from(buf, 0)
    offset = HEADER.size
    if mode not in MODE_NAMES or sizing not in (0, 1):
        raise CorruptDatasetError("bad mode or sizing code in header", 6)
    if len(buf) < offset + 4 * n_wl:
        raise CorruptDatasetError(f"file ends inside the wavelength table at byte {len(buf)}", len(buf))
    table = np.frombuffer(buf, dtype="<f4", count=n_wl, offset=offset).astype(float).tolist()
    offset += 4 * n_wl
    try:
        plan = ScanPlan(mode=MODE_NAMES[mode], fov_x_um=fov_x, fov_y_um=fov_y, rep_rate_hz=rep_rate,
                        wavelengths_nm=tuple(table),
                        step_um=amount if sizing == 0 else None,
                        point_count=int(amount) if sizing == 1 else None)
    except InvalidPlanError as exc:
        raise CorruptDatasetError(f"header describes an invalid plan: {exc}", HEADER.size) from exc

    records = []
    for k in range(count):
        if len(buf) < offset + RECORD_HEAD.size:
            raise CorruptDatasetError(
                f"record {k}: file ends at byte {len(buf)}, record header needs {offset + RECORD_HEAD.size}",
                len(buf), k)
        x, y, wl, pulse, n = RECORD_HEAD.unpack_from(buf, offset)
        offset += RECORD_HEAD.size
        if len(buf) < offset + 2 * n:
            raise CorruptDatasetError(
                f"record {k}: file ends at byte {len(buf)}, samples need {offset + 2 * n}", len(buf), k)
        samples = np.frombuffer(buf, dtype="<i2", count=n, offset=offset).astype(np.int16)
        offset += 2 * n
        try:
            trace = Trace(rate, pre, samples)
        except MalformedTraceError as exc:
            raise CorruptDatasetError(f"record {k}: {exc}", offset, k) from exc
        records.append(InterrogationRecord(x, y, wl, pulse, trace))
    if offset != len(buf):
        raise CorruptDatasetError(f"{len(buf) - offset} trailing bytes after record {count - 1}", offset, count)
    return records, plan


def write_dataset(records, plan, path, digitizer=None):
    data = encode_dataset(records, plan, digitizer)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
    return len(data)


def read_dataset(path):
    return decode_dataset(Path(path).read_bytes())
