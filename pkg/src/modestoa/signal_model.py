"""Mode S physical-layer structure.

BPPM chip mapping, pulse extraction from decoded bits, and nominal
amplitude templates (rectangular and smoothed) on an upsampled grid.

Timing conventions used throughout the package:
- all pulse times are seconds relative to the packet start (the first
  preamble pulse's leading edge);
- a pulse nominally occupies the half-open interval [start, start + duration);
- on a grid of rate R, that interval owns sample indices
  ceil(start*R) .. floor(stop*R - eps), applied uniformly so templates are
  identical across runs and platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .filters import filter_halfwidth, zero_phase_lowpass

CHIP_SECONDS = 0.5e-6
SYMBOL_SECONDS = 1.0e-6
PREAMBLE_SECONDS = 8.0e-6
# Standard Mode S preamble: four one-chip pulses at the ICAO Annex 10 positions.
PREAMBLE_PULSE_STARTS = (0.0, 1.0e-6, 3.5e-6, 4.5e-6)
PAYLOAD_LENGTHS = (56, 112)
# Minimum rise/decay time of a transmitted pulse; the smoothed template is
# the front-end filter's response to a trapezoid with these edges.
NOMINAL_EDGE_SECONDS = 50e-9

RECTANGULAR = "rectangular"
SMOOTHED = "smoothed"
SHAPE_VARIANTS = (RECTANGULAR, SMOOTHED)

# Guard (in index units) against float jitter when an edge lands exactly on
# a grid point; also implements the half-open right edge.
_INDEX_EPS = 1e-6

# Truncation level for smoothed shapes, relative to peak.
_TRUNCATE_FRACTION = 0.01


class PulseKind(Enum):
    """One-chip (Type I) or two-chip (Type II) pulse."""

    TYPE_I = 1
    TYPE_II = 2

    @property
    def duration(self) -> float:
        return self.value * CHIP_SECONDS


@dataclass(frozen=True)
class Payload:
    """Decoded Mode S payload bits (56 or 112)."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.bits) not in PAYLOAD_LENGTHS:
            raise ValueError(f"payload length must be one of {PAYLOAD_LENGTHS}, got {len(self.bits)}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("payload bits must be 0 or 1")

    @classmethod
    def from_bits(cls, bits) -> "Payload":
        return cls(tuple(int(b) for b in bits))

    @classmethod
    def from_hex(cls, text: str) -> "Payload":
        nbits = len(text) * 4
        value = int(text, 16)
        return cls(tuple((value >> (nbits - 1 - i)) & 1 for i in range(nbits)))

    @property
    def hex(self) -> str:
        value = 0
        for b in self.bits:
            value = (value << 1) | b
        return f"{value:0{len(self.bits) // 4}X}"

    def bit_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.uint8)


@dataclass(frozen=True)
class PulseDescriptor:
    """One pulse's kind, nominal start (s, relative to packet start) and duration."""

    kind: PulseKind
    start: float
    duration: float

    def __post_init__(self) -> None:
        if not math.isclose(self.duration, self.kind.duration, rel_tol=0, abs_tol=1e-12):
            raise ValueError(f"{self.kind} requires duration {self.kind.duration}, got {self.duration}")
        chips = self.start / CHIP_SECONDS
        if self.start < 0 or abs(chips - round(chips)) > 1e-6:
            raise ValueError(f"pulse start {self.start} is not a non-negative chip multiple")

    @property
    def stop(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class PulseSequence:
    """Ordered, non-overlapping pulses of one packet (preamble + payload)."""

    pulses: tuple[PulseDescriptor, ...]

    def __post_init__(self) -> None:
        for a, b in zip(self.pulses, self.pulses[1:]):
            if b.start < a.stop - 1e-12:
                raise ValueError("pulses must be strictly increasing and non-overlapping")

    @property
    def count(self) -> int:
        return len(self.pulses)

    def of_kind(self, kind: PulseKind) -> tuple[PulseDescriptor, ...]:
        return tuple(p for p in self.pulses if p.kind is kind)

    @property
    def type_i_count(self) -> int:
        return len(self.of_kind(PulseKind.TYPE_I))

    @property
    def type_ii_count(self) -> int:
        return len(self.of_kind(PulseKind.TYPE_II))

    def payload_pulses(self) -> tuple[PulseDescriptor, ...]:
        return tuple(p for p in self.pulses if p.start >= PREAMBLE_SECONDS - 1e-12)

    @property
    def end(self) -> float:
        return self.pulses[-1].stop if self.pulses else 0.0


def chip_occupancy(bits) -> np.ndarray:
    """BPPM chip map of a bit sequence: bit 1 -> first chip, bit 0 -> second.

    Returns a boolean array of length 2*len(bits); chip c covers
    [c, c+1) * CHIP_SECONDS relative to the first symbol.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    occ = np.zeros(2 * len(bits), dtype=bool)
    idx = 2 * np.arange(len(bits)) + (1 - bits)
    occ[idx] = True
    return occ


def pulses_from_bits(bits, origin: float = 0.0) -> list[PulseDescriptor]:
    """Pulses produced by a bit sequence of any length, per the BPPM chip map.

    Maximal runs of occupied chips become pulses: a lone chip is Type I, a
    pair is Type II. A pair arises exactly from adjacent bits "01" (the
    second chip of the 0 touching the first chip of the 1); no run can
    exceed two chips because a symbol never occupies both of its own chips.

    Args:
        bits: iterable of 0/1 values (no length restriction).
        origin: time of the first symbol's start relative to the packet start.
    """
    occ = chip_occupancy(bits)
    pulses: list[PulseDescriptor] = []
    c = 0
    while c < len(occ):
        if not occ[c]:
            c += 1
            continue
        run = 1
        if c + 1 < len(occ) and occ[c + 1]:
            run = 2
        kind = PulseKind.TYPE_I if run == 1 else PulseKind.TYPE_II
        pulses.append(PulseDescriptor(kind, origin + c * CHIP_SECONDS, kind.duration))
        c += run
    return pulses


def preamble_pulses() -> list[PulseDescriptor]:
    return [PulseDescriptor(PulseKind.TYPE_I, t, CHIP_SECONDS) for t in PREAMBLE_PULSE_STARTS]


def extract_pulses(payload: Payload) -> PulseSequence:
    """Full pulse sequence of a packet: preamble pulses then payload pulses."""
    return PulseSequence(tuple(preamble_pulses() + pulses_from_bits(payload.bits, PREAMBLE_SECONDS)))


def occupied_index_range(start: float, stop: float, rate: float) -> tuple[int, int]:
    """First and last grid index owned by the interval [start, stop) at `rate`.

    Empty intervals return (first, last) with last < first.
    """
    first = math.ceil(start * rate - _INDEX_EPS)
    last = math.floor(stop * rate - _INDEX_EPS)
    return first, last


def packet_sample_count(n_bits: int, rate: float) -> int:
    """Samples covering preamble + payload at `rate` (partial last sample counts)."""
    return math.ceil((PREAMBLE_SECONDS + n_bits * SYMBOL_SECONDS) * rate - _INDEX_EPS)


# --- trapezoid rendering -------------------------------------------------

def trapezoid_breakpoints(start: float, duration: float, rise: float, decay: float,
                          amplitude: float = 1.0) -> tuple[list[float], list[float]]:
    """Corner times/values of a trapezoidal pulse.

    The nominal duration is measured between the 50 % points of the edges,
    so a ramp straddles its nominal edge symmetrically. Zero rise/decay
    degenerates to a step placed to keep [start, stop) half-open: a sample
    landing exactly on `start` reads full amplitude, one on `stop` reads 0.
    """
    stop = start + duration
    t0, t1 = (start - 1e-12, start) if rise <= 0 else (start - rise / 2, start + rise / 2)
    t2, t3 = (stop - 1e-12, stop) if decay <= 0 else (stop - decay / 2, stop + decay / 2)
    return [t0, t1, t2, t3], [0.0, amplitude, amplitude, 0.0]


def render_piecewise(times: np.ndarray, breakpoints: tuple[list[float], list[float]]) -> np.ndarray:
    """Evaluate a piecewise-linear waveform (concatenated pulse corners) at `times`."""
    bp_t, bp_v = breakpoints
    return np.interp(times, bp_t, bp_v, left=0.0, right=0.0)


def pulse_train_breakpoints(pulses, rise: float, decay: float,
                            amplitudes=None, offsets=None) -> tuple[list[float], list[float]]:
    """Merged breakpoint list for a sequence of non-overlapping pulses.

    Raises if the trapezoids would overlap (cannot happen for valid BPPM
    sequences with edges within the spec tolerances).
    """
    times: list[float] = []
    values: list[float] = []
    for i, p in enumerate(pulses):
        amp = 1.0 if amplitudes is None else float(amplitudes[i])
        off = 0.0 if offsets is None else float(offsets[i])
        t, v = trapezoid_breakpoints(p.start + off, p.duration, rise, decay, amp)
        if times and t[0] <= times[-1]:
            raise ValueError("pulse trapezoids overlap; impairments out of tolerance")
        times.extend(t)
        values.extend(v)
    return times, values


# --- shapes and templates -------------------------------------------------

@dataclass(frozen=True)
class PulseShape:
    """Nominal single-pulse amplitude shape on the upsampled grid.

    `start_time` is the time of sample 0 relative to the pulse's nominal
    leading edge (zero for rectangular, negative for smoothed shapes whose
    rise and filter tails begin earlier). `peak_offset` is the time of the
    shape's apex relative to the leading edge.
    """

    kind: PulseKind
    variant: str
    samples: np.ndarray
    rate: float
    start_time: float
    peak_offset: float


@dataclass(frozen=True)
class PacketTemplate:
    """Whole-packet nominal amplitude template on the upsampled grid."""

    variant: str
    samples: np.ndarray
    rate: float
    start_time: float  # time of sample 0 relative to the packet start


def _check_shape_args(variant: str, n: int, f_s: float) -> None:
    if variant not in SHAPE_VARIANTS:
        raise ValueError(f"variant must be one of {SHAPE_VARIANTS}, got {variant!r}")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"upsampling factor must be a positive integer, got {n!r}")
    if f_s <= 0:
        raise ValueError(f"sample rate must be positive, got {f_s}")


def _trim_below(x: np.ndarray, rate: float, grid_start: float,
                lo_time: float | None = None, hi_time: float | None = None
                ) -> tuple[np.ndarray, float]:
    """Trim where |amplitude| < 1 % of peak, keeping one sub-threshold endpoint.

    Optional time bounds clamp the kept span further (used to cap smoothing
    tails on whole-packet templates so they stay inside the receiver window).
    """
    peak = float(np.max(np.abs(x)))
    keep = np.flatnonzero(np.abs(x) >= _TRUNCATE_FRACTION * peak)
    lo = max(int(keep[0]) - 1, 0)
    hi = min(int(keep[-1]) + 1, len(x) - 1)
    if lo_time is not None:
        lo = max(lo, math.ceil((lo_time - grid_start) * rate))
    if hi_time is not None:
        hi = min(hi, math.floor((hi_time - grid_start) * rate))
    return x[lo : hi + 1], grid_start + lo / rate


def build_pulse_shape(kind: PulseKind, variant: str, n: int, f_s: float,
                      max_tail: float | None = None) -> PulseShape:
    """Nominal pulse shape sampled at rate n*f_s, peak normalized to 1.

    Rectangular is the all-ones window owning the nominal interval.
    Smoothed is the front-end low-pass response to the minimum-edge
    trapezoid, truncated below 1 % of peak (tails optionally capped at
    `max_tail` seconds beyond the nominal interval for use as a compact
    correlation kernel).
    """
    _check_shape_args(variant, n, f_s)
    rate = n * f_s
    duration = kind.duration
    if variant == RECTANGULAR:
        first, last = occupied_index_range(0.0, duration, rate)
        samples = np.ones(last - first + 1)
        # the ones own [start, stop) as point samples, so their centroid sits
        # half a step early; the time reference absorbs that offset
        return PulseShape(kind, variant, samples, rate, (first + 0.5) / rate, duration / 2)

    pad = (filter_halfwidth(rate) + 1) / rate + NOMINAL_EDGE_SECONDS
    grid_start = -pad
    m = int(math.ceil((duration + 2 * pad) * rate)) + 1
    times = grid_start + np.arange(m) / rate
    raw = render_piecewise(times, trapezoid_breakpoints(0.0, duration, NOMINAL_EDGE_SECONDS,
                                                        NOMINAL_EDGE_SECONDS))
    lo_time = None if max_tail is None else -max_tail
    hi_time = None if max_tail is None else duration + max_tail
    samples, start_time = _trim_below(zero_phase_lowpass(raw, rate), rate, grid_start,
                                      lo_time, hi_time)
    samples = samples / np.max(samples)
    peak_idx = plateau_argmax(samples)
    return PulseShape(kind, variant, samples, rate, start_time, start_time + peak_idx / rate)


DEFAULT_TEMPLATE_TAIL = 2.0e-6  # cap on a smoothed template's tail beyond the packet


def build_packet_template(pulses: PulseSequence, variant: str, n: int, f_s: float,
                          max_tail: float | None = DEFAULT_TEMPLATE_TAIL) -> PacketTemplate:
    """Whole-packet amplitude template with each pulse at its nominal position.

    Rectangular templates are strictly binary (0/1) with pulse edges snapped
    to the grid by the uniform index rule. Smoothed templates render the
    minimum-edge trapezoid train exactly (fractional pulse positions
    preserved) and pass it through the front-end low-pass once; summed tails
    are clamped at the per-pulse peak and the result is rescaled to peak 1.
    The smoothing tail is kept below `max_tail` on each side so the template
    still fits inside a margin-padded receiver window.
    """
    _check_shape_args(variant, n, f_s)
    rate = n * f_s
    if variant == RECTANGULAR:
        _, last = occupied_index_range(pulses.pulses[-1].start, pulses.end, rate)
        samples = np.zeros(last + 1)
        for p in pulses.pulses:
            first, plast = occupied_index_range(p.start, p.stop, rate)
            samples[first : plast + 1] = 1.0
        # half-open ownership sits each one-block half a step early on
        # average; the time reference absorbs that centroid offset
        return PacketTemplate(variant, samples, rate, 0.5 / rate)

    pad = (filter_halfwidth(rate) + 1) / rate + NOMINAL_EDGE_SECONDS
    grid_start = -pad
    m = int(math.ceil((pulses.end + 2 * pad) * rate)) + 1
    times = grid_start + np.arange(m) / rate
    raw = render_piecewise(times, pulse_train_breakpoints(pulses.pulses, NOMINAL_EDGE_SECONDS,
                                                          NOMINAL_EDGE_SECONDS))
    filtered = zero_phase_lowpass(raw, rate)
    # clamp summed tails at the largest isolated-pulse peak present
    clamp = max(
        float(np.max(zero_phase_lowpass(
            render_piecewise(times, trapezoid_breakpoints(0.0, k.duration, NOMINAL_EDGE_SECONDS,
                                                          NOMINAL_EDGE_SECONDS)), rate)))
        for k in {p.kind for p in pulses.pulses}
    )
    filtered = np.minimum(filtered, clamp)
    lo_time = None if max_tail is None else -max_tail
    hi_time = None if max_tail is None else pulses.end + max_tail
    trimmed, start_time = _trim_below(filtered, rate, grid_start, lo_time, hi_time)
    return PacketTemplate(variant, trimmed / np.max(np.abs(trimmed)), rate, start_time)


def plateau_argmax(values: np.ndarray) -> int:
    """Argmax with flat-top tie-breaking: midpoint of the first maximal plateau.

    The midpoint of a run [i, j] rounds half-down to (i + j) // 2, which is
    unbiased for symmetric flat tops and deterministic everywhere.
    """
    values = np.asarray(values)
    peak = values.max()
    first = int(np.argmax(values))
    last = first
    while last + 1 < len(values) and values[last + 1] == peak:
        last += 1
    return (first + last) // 2
