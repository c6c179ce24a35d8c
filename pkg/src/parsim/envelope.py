"""Envelope extraction and PARS amplitude from photodiode traces.

Envelopes are piecewise-linear curves through the trace's local extrema.
A sample counts as a local maximum when it is no smaller than either
neighbour, so flat baseline runs anchor both envelopes and keep them from
leaking across the trigger. The first and last samples are always anchors.
The upper envelope is finally raised to the samples wherever linear
interpolation dips below them (and the lower one lowered), so
``lower <= samples <= upper`` holds everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acquisition import MIN_TRACE_TAIL, Trace, bipolar_template
from .errors import MalformedTraceError

GATE_GUARD_SAMPLES = 8


@dataclass(frozen=True, eq=False)
class EnvelopePair:
    upper: np.ndarray
    lower: np.ndarray
    window_start: int
    window_end: int


def gate_window(n_samples, sample_rate_hz, pre_trigger_samples):
    """Post-trigger gate ``[start, end)``: template support plus a guard."""
    support = len(bipolar_template(sample_rate_hz))
    end = min(n_samples, pre_trigger_samples + support + GATE_GUARD_SAMPLES)
    return pre_trigger_samples, end


def _anchors(s, upper):
    n = s.shape[-1]
    mask = np.ones(s.shape, dtype=bool)
    if n > 2:
        mid = s[..., 1:-1]
        if upper:
            mask[..., 1:-1] = (mid >= s[..., :-2]) & (mid >= s[..., 2:])
        else:
            mask[..., 1:-1] = (mid <= s[..., :-2]) & (mid <= s[..., 2:])
    return mask


def _check(trace):
    if not isinstance(trace, Trace):
        raise MalformedTraceError("expected a Trace")
    if len(trace.samples) < trace.pre_trigger_samples + MIN_TRACE_TAIL:
        raise MalformedTraceError("trace shorter than pre_trigger_samples + 8")


def extract_envelopes(trace: Trace) -> EnvelopePair:
    _check(trace)
    s = np.asarray(trace.samples, dtype=float)
    idx = np.arange(len(s))
    up = _anchors(s, upper=True)
    lo = _anchors(s, upper=False)
    upper = np.maximum(np.interp(idx, idx[up], s[up]), s)
    lower = np.minimum(np.interp(idx, idx[lo], s[lo]), s)
    start, end = gate_window(len(s), trace.sample_rate_hz, trace.pre_trigger_samples)
    return EnvelopePair(upper, lower, start, end)


def _spread(env: EnvelopePair, start, end):
    if end <= start:
        return 0.0
    return float(env.upper[start:end].max() - env.lower[start:end].min())


def pars_amplitude(trace: Trace) -> float:
    """Envelope spread inside the gate minus the spread of the pre-trigger
    baseline, floored at zero."""
    env = extract_envelopes(trace)
    signal = _spread(env, env.window_start, env.window_end)
    baseline = _spread(env, 0, trace.pre_trigger_samples)
    return max(signal - baseline, 0.0)


def _interp_at(s, anchors, col):
    """Value of the anchor interpolant at column ``col`` for every row."""
    n = s.shape[1]
    idx = np.arange(n)
    prev = np.maximum.accumulate(np.where(anchors, idx, -1), axis=1)[:, col]
    nxt = np.minimum.accumulate(np.where(anchors, idx, n)[:, ::-1], axis=1)[:, ::-1][:, col]
    rows = np.arange(s.shape[0])
    sp = s[rows, prev]
    sn = s[rows, nxt]
    span = np.where(nxt > prev, nxt - prev, 1)
    return np.where(nxt > prev, sp + (sn - sp) * (col - prev) / span, sp)


def _batch_spread(s, up, lo, start, end):
    if end <= start:
        return np.zeros(s.shape[0])
    top = np.maximum(s[:, start:end].max(axis=1),
                     np.maximum(_interp_at(s, up, start), _interp_at(s, up, end - 1)))
    bottom = np.minimum(s[:, start:end].min(axis=1),
                        np.minimum(_interp_at(s, lo, start), _interp_at(s, lo, end - 1)))
    return top - bottom


def pars_amplitudes(samples, sample_rate_hz, pre_trigger_samples):
    """``pars_amplitude`` for a stack of equal-length traces, shape ``(n, samples)``.

    The maximum of a piecewise-linear envelope over a window is reached at
    an anchor or a window edge, so only the edges need interpolating.
    """
    s = np.atleast_2d(np.asarray(samples, dtype=float))
    if s.shape[1] < pre_trigger_samples + MIN_TRACE_TAIL:
        raise MalformedTraceError("traces shorter than pre_trigger_samples + 8")
    up = _anchors(s, upper=True)
    lo = _anchors(s, upper=False)
    start, end = gate_window(s.shape[1], sample_rate_hz, pre_trigger_samples)
    signal = _batch_spread(s, up, lo, start, end)
    baseline = _batch_spread(s, up, lo, 0, pre_trigger_samples)
    return np.maximum(signal - baseline, 0.0)


def record_amplitudes(records):
    """Amplitudes for a list of interrogation records (grouped by trace layout)."""
    out = np.empty(len(records))
    groups: dict[tuple, list[int]] = {}
    for k, rec in enumerate(records):
        t = rec.trace
        groups.setdefault((t.sample_rate_hz, t.pre_trigger_samples, len(t.samples)), []).append(k)
    for (rate, pre, _), members in groups.items():
        stack = np.stack([records[k].trace.samples for k in members])
        out[members] = pars_amplitudes(stack, rate, pre)
    return out


def dump_envelopes(trace: Trace) -> str:
    """Plain-text columns ``index sample upper lower in_window`` for plotting."""
    env = extract_envelopes(trace)
    lines = ["# index sample upper lower in_window"]
    for i, (s, u, lo) in enumerate(zip(trace.samples, env.upper, env.lower)):
        inside = int(env.window_start <= i < env.window_end)
        lines.append(f"{i} {float(s):g} {u:g} {lo:g} {inside}")
    return "\n".join(lines) + "\n"
