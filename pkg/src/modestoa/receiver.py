"""Legacy-style Mode S receiver: preamble detection and BPPM bit decoding.

This is the low-precision front half of the chain. It scans an IQ stream,
finds packet preambles, decodes the payload bits, and hands each packet's
decoded bits plus a ~300-sample IQ window to the high-precision TOA block.
The coarse timestamp it reports is quantized to the native sample grid
(~417 ns at 2.4 MHz); all sub-sample refinement happens downstream.

Detection runs in two stages. A cheap full-stream scan on the native grid
nominates candidate positions (preamble-pattern correlation plus the pulse
mean standing well above the stream's median amplitude). Each candidate
neighborhood is then re-examined on a locally interpolated grid (8x), where
the normalized cross-correlation against the rectangular preamble template
is insensitive to the packet's sub-sample arrival phase; the detection
threshold applies to that statistic. Chip-energy bit decisions use the same
fine grid, anchored at the fine correlation peak. At 2.4 MS/s a chip spans
only 1.2 native samples, so decisions made directly on the native grid are
unreliable at some arrival phases; the local interpolation restores them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import resample_poly

from .dataio import RawTrace, TraceMeta
from .signal_model import (
    PAYLOAD_LENGTHS,
    PREAMBLE_SECONDS,
    SYMBOL_SECONDS,
    Payload,
    occupied_index_range,
    packet_sample_count,
    preamble_pulses,
)

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.75   # fraction of perfect correlation, fine-grid NCC
DEFAULT_PULSE_SNR = 4.0    # preamble pulse mean over chunk median amplitude
PRE_MARGIN = 8             # native samples kept before the leading edge
POST_MARGIN = 8            # native samples kept after the packet end
FINE_FACTOR = 8            # local interpolation factor for stage 2 / decoding

_STAGE1_RHO = 0.30         # loose native-grid correlation gate
_CHUNK = 1 << 21
_OVERLAP = 512
# Second-half/first-half payload energy ratio above which a packet is
# treated as 112-bit rather than 56-bit.
_LONG_ENERGY_RATIO = 0.3


class WindowOutOfBounds(Exception):
    """Packet window would cross the stream boundary."""


@dataclass(frozen=True)
class SampleWindow:
    """Native-rate IQ slice around one packet, full-scale-normalized."""

    iq: np.ndarray
    clipped: np.ndarray
    start_index: int
    sample_rate: float
    start_time: float
    receiver_id: str = ""

    def __len__(self) -> int:
        return len(self.iq)


@dataclass(frozen=True)
class DecodedPacket:
    """Decoder output: payload bits, leading sample, and the packet window."""

    payload: Payload
    leading_sample_index: int
    window: SampleWindow
    receiver_id: str
    coarse_timestamp: float
    low_confidence: bool = False

    @property
    def window_start_index(self) -> int:
        return self.window.start_index

    @property
    def lead_offset(self) -> int:
        """Leading sample's offset inside the window (the pre-margin)."""
        return self.leading_sample_index - self.window.start_index


@lru_cache(maxsize=8)
def _preamble_pattern(rate: float) -> tuple[np.ndarray, int]:
    """(pulse-sample offsets, window length) of the rectangular preamble at `rate`."""
    ones: list[int] = []
    for p in preamble_pulses():
        first, last = occupied_index_range(p.start, p.stop, rate)
        ones.extend(range(first, last + 1))
    length = int(math.floor(PREAMBLE_SECONDS * rate))  # samples fully inside the preamble
    return np.asarray(sorted(set(ones)), dtype=np.intp), length


@lru_cache(maxsize=8)
def _fine_template(f_s: float) -> np.ndarray:
    ones, length = _preamble_pattern(FINE_FACTOR * f_s)
    t = np.zeros(length)
    t[ones] = 1.0
    return t


def _pearson_scan(mag: np.ndarray, rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Sliding Pearson correlation of |iq| against the 0/1 preamble pattern.

    Returns (rho, pulse_mean) for every start position with a full window.
    """
    ones, length = _preamble_pattern(rate)
    k = len(ones)
    n_pos = len(mag) - length + 1
    if n_pos <= 0:
        return np.empty(0), np.empty(0)
    x = mag.astype(np.float64)
    s_on = np.zeros(n_pos)
    for o in ones:
        s_on += x[o : o + n_pos]
    c1 = np.concatenate([[0.0], np.cumsum(x)])
    c2 = np.concatenate([[0.0], np.cumsum(x * x)])
    win_sum = c1[length:] - c1[:-length]
    win_sq = c2[length:] - c2[:-length]
    cov = s_on - (k / length) * win_sum
    var_t = k - k * k / length
    var_x = win_sq - win_sum * win_sum / length
    denom = np.sqrt(var_t * np.maximum(var_x, 0.0))
    rho = np.divide(cov, denom, out=np.zeros_like(cov), where=denom > 0)
    return rho, s_on / k


def _refine_on_fine_grid(mag: np.ndarray, f_s: float, lo: int, hi: int) -> tuple[float, float]:
    """Fine-grid NCC over candidate leading positions in [lo, hi] (native).

    `mag` is the chunk magnitude; returns (rho, fine_lead) where fine_lead
    is the leading-edge position in native sample units at 1/FINE_FACTOR
    resolution.
    """
    tpl = _fine_template(f_s)
    pad = 24  # absorbs interpolation edge transients and the template span
    base = max(0, lo - pad)
    stop = min(len(mag), hi + pad + int(math.ceil(len(tpl) / FINE_FACTOR)) + pad)
    fine = resample_poly(mag[base:stop].astype(np.float64), FINE_FACTOR, 1)
    n = len(tpl)
    first = max(0, (lo - base) * FINE_FACTOR - FINE_FACTOR)
    last = min(len(fine) - n, (hi - base) * FINE_FACTOR + FINE_FACTOR)
    if last < first:
        return -1.0, float(lo)
    t_center = tpl - tpl.mean()
    t_norm = float(np.sqrt((t_center**2).sum()))
    windows = np.lib.stride_tricks.sliding_window_view(fine[first : last + n], n)
    cov = windows @ t_center  # template is zero-mean, so window means drop out
    var = (windows**2).sum(axis=1) - windows.sum(axis=1) ** 2 / n
    denom = t_norm * np.sqrt(np.maximum(var, 0.0))
    rho = np.divide(cov, denom, out=np.full(len(cov), -1.0), where=denom > 0)
    best = int(np.argmax(rho))
    return float(rho[best]), base + (first + best) / FINE_FACTOR


def _decode_bits(fine: np.ndarray, fine_base: int, fine_lead: float, f_s: float,
                 n_bits: int) -> tuple[np.ndarray, bool]:
    """Chip-energy bit decisions on the fine grid anchored at the fine lead."""
    ff = FINE_FACTOR * f_s
    p0 = (fine_lead - fine_base) * FINE_FACTOR
    chips = np.arange(2 * n_bits)
    start = p0 + (PREAMBLE_SECONDS + chips * (SYMBOL_SECONDS / 2)) * ff
    end = start + (SYMBOL_SECONDS / 2) * ff
    nw = int(math.ceil(SYMBOL_SECONDS / 2 * ff)) + 2
    s0 = np.floor(start).astype(np.intp)
    idx = s0[:, None] + np.arange(nw)[None, :]
    w = np.clip(np.minimum(end[:, None], idx + 1) - np.maximum(start[:, None], idx), 0.0, 1.0)
    idx = np.clip(idx, 0, len(fine) - 1)
    energy = (fine[idx] * w).sum(axis=1)
    first = energy[0::2]
    second = energy[1::2]
    bits = (first > second).astype(np.uint8)
    return bits, bool((first == second).any())


def _choose_length(a: np.ndarray, f_s: float, long_possible: bool) -> int:
    """56 vs 112 bits from the payload's second-half energy.

    A 56-bit packet is followed by silence, so the region where a long
    payload's second half would sit carries only noise.
    """
    if not long_possible:
        return 56
    half = 56 * SYMBOL_SECONDS * f_s
    i0 = int(math.ceil(PREAMBLE_SECONDS * f_s))
    i1 = int(math.ceil(PREAMBLE_SECONDS * f_s + half))
    i2 = int(math.ceil(PREAMBLE_SECONDS * f_s + 2 * half))
    lead = float(np.mean(a[i0:i1]))
    tail = float(np.mean(a[i1:i2]))
    if lead <= 0:
        return 56
    return 112 if tail / lead > _LONG_ENERGY_RATIO else 56


def packet_window(trace: RawTrace, leading_sample_index: int, n_bits: int,
                  pre_margin: int = PRE_MARGIN, post_margin: int = POST_MARGIN) -> SampleWindow:
    """IQ slice covering one packet plus margins.

    Raises:
        WindowOutOfBounds: margins would cross the stream boundary (the
            caller drops the packet with a diagnostic).
    """
    if n_bits not in PAYLOAD_LENGTHS:
        raise ValueError(f"n_bits must be one of {PAYLOAD_LENGTHS}")
    f_s = trace.sample_rate
    lo = leading_sample_index - pre_margin
    hi = leading_sample_index + packet_sample_count(n_bits, f_s) + post_margin
    if lo < 0 or hi > trace.n_samples:
        raise WindowOutOfBounds(f"window [{lo}, {hi}) outside stream of {trace.n_samples} samples")
    return SampleWindow(
        iq=trace.complex_window(lo, hi),
        clipped=trace.clipped_window(lo, hi),
        start_index=lo,
        sample_rate=f_s,
        start_time=trace.start_time + lo / f_s,
        receiver_id=trace.meta.receiver_id,
    )


def detect_and_decode(stream, f_s: float | None = None, threshold: float = DEFAULT_THRESHOLD,
                      min_pulse_snr: float = DEFAULT_PULSE_SNR,
                      pre_margin: int = PRE_MARGIN, post_margin: int = POST_MARGIN,
                      receiver_id: str | None = None) -> list[DecodedPacket]:
    """Scan an IQ stream and decode every detectable Mode S packet.

    The leading sample index is the preamble-correlation argmax rounded to
    the native grid. Packets whose detection statistic stays below
    `threshold`, or whose window would cross the stream boundary, are
    absent from the result (the latter with a logged diagnostic).

    Args:
        stream: RawTrace, or a complex sample vector (then f_s is required).
        f_s: sample rate, only for array input.

    Returns:
        DecodedPackets in stream order.
    """
    if isinstance(stream, RawTrace):
        trace = stream
    else:
        if f_s is None:
            raise ValueError("f_s is required when passing a bare sample array")
        trace = trace_from_complex(np.asarray(stream), f_s, receiver_id=receiver_id or "")
    f_s = trace.sample_rate
    rid = receiver_id if receiver_id is not None else trace.meta.receiver_id

    _, pre_len = _preamble_pattern(f_s)
    max_need = packet_sample_count(112, f_s) + post_margin
    packets: list[DecodedPacket] = []
    dropped = 0
    suppress_until = -1

    pos = 0
    n = trace.n_samples
    while pos < n:
        hi = min(n, pos + _CHUNK)
        mag = trace.magnitude(pos, hi)
        rho, pulse_mean = _pearson_scan(mag, f_s)
        if len(rho) == 0:
            break
        floor = float(np.median(mag))
        gate = pulse_mean >= max(min_pulse_snr * floor, 1e-9)
        cand = np.flatnonzero((rho >= _STAGE1_RHO) & gate)
        # candidates too close to the chunk tail are re-scanned in the next chunk
        limit = len(rho) if hi == n else len(rho) - _OVERLAP
        cand = cand[cand < limit]

        i = 0
        while i < len(cand):
            j = i
            while j + 1 < len(cand) and cand[j + 1] - cand[j] <= pre_len:
                j += 1
            first, last = int(cand[i]), int(cand[j])
            i = j + 1
            if pos + first < suppress_until:
                continue
            fine_rho, fine_lead = _refine_on_fine_grid(mag, f_s, first, last)
            if fine_rho < threshold:
                continue
            lead_rel = int(round(fine_lead))
            lead = pos + lead_rel
            if lead < suppress_until:
                continue
            a = mag[lead_rel : lead_rel + max_need].astype(np.float64)
            long_possible = lead + max_need <= n and len(a) >= max_need
            n_bits = _choose_length(a, f_s, long_possible)
            if lead + packet_sample_count(n_bits, f_s) + post_margin > n:
                dropped += 1
                continue
            dlo = max(0, lead_rel - pre_margin)
            dhi = min(len(mag), lead_rel + packet_sample_count(n_bits, f_s) + 24)
            fine_dec = resample_poly(mag[dlo:dhi].astype(np.float64), FINE_FACTOR, 1)
            bits, tie = _decode_bits(fine_dec, dlo, fine_lead, f_s, n_bits)
            try:
                window = packet_window(trace, lead, n_bits, pre_margin, post_margin)
            except WindowOutOfBounds as exc:
                logger.info("dropped packet at sample %d: %s", lead, exc)
                dropped += 1
                continue
            packets.append(DecodedPacket(
                payload=Payload.from_bits(bits),
                leading_sample_index=lead,
                window=window,
                receiver_id=rid,
                coarse_timestamp=trace.start_time + lead / f_s,
                low_confidence=tie,
            ))
            suppress_until = lead + packet_sample_count(n_bits, f_s)
        if hi == n:
            break
        pos = hi - _OVERLAP
    if dropped:
        logger.info("receiver %s: dropped %d packet(s) at stream bounds", rid, dropped)
    return packets


def trace_from_complex(iq: np.ndarray, f_s: float, start_time: float = 0.0,
                       receiver_id: str = "") -> RawTrace:
    """Wrap an in-memory complex vector as an unquantized RawTrace."""
    inter = np.empty(2 * len(iq), dtype=np.float32)
    inter[0::2] = iq.real
    inter[1::2] = iq.imag
    meta = TraceMeta(sample_rate_hz=f_s, adc_bits=None, start_time=start_time,
                     sample_format="f32", receiver_id=receiver_id)
    return RawTrace(inter, meta)
