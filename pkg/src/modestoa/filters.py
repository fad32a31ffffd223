"""Shared front-end low-pass filter design.

One FIR prototype is used everywhere a receiver front end is modeled: the
trace synthesizer and the smoothed pulse/packet templates. Keeping a single
design makes the smoothed templates a matched replica of the synthetic
front-end output.

The RTL-SDR-class passband is quoted as a two-sided complex bandwidth
(2.4 MHz), so the baseband cutoff sits at half of it. The stopband edge is
pinned exactly at passband/2 so that decimation to the native rate stays
alias-free; the passband edge is at 80 % of that.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import signal

DEFAULT_PASSBAND_HZ = 2.4e6
STOPBAND_DB = 60.0
# Fraction of the one-sided bandwidth where the passband ends; the
# transition occupies the rest, so the stopband starts exactly at the
# decimated Nyquist frequency. 0.85 keeps inter-chip smearing low enough
# for reliable bit decisions while staying alias-free after decimation.
PASS_EDGE_FRACTION = 0.85


@lru_cache(maxsize=32)
def design_lowpass(rate_hz: float, passband_hz: float = DEFAULT_PASSBAND_HZ) -> np.ndarray:
    """Design the linear-phase FIR front-end low-pass for a given sample rate.

    Args:
        rate_hz: Sample rate of the signal the filter will run on.
        passband_hz: Two-sided complex passband (default 2.4 MHz).

    Returns:
        Odd-length symmetric tap array (read-only), unit DC gain.
    """
    if rate_hz < passband_hz:
        raise ValueError(f"rate {rate_hz} Hz must be at least the passband {passband_hz} Hz")
    half_bw = passband_hz / 2.0
    width = (1.0 - PASS_EDGE_FRACTION) * half_bw
    numtaps, beta = signal.kaiserord(STOPBAND_DB, width / (rate_hz / 2.0))
    numtaps |= 1  # odd length -> integer group delay, exactly compensable
    cutoff = half_bw - width / 2.0  # transition centered so stop edge == half_bw
    taps = signal.firwin(numtaps, cutoff, window=("kaiser", beta), fs=rate_hz)
    taps.setflags(write=False)
    return taps


def zero_phase_lowpass(x: np.ndarray, rate_hz: float,
                       passband_hz: float = DEFAULT_PASSBAND_HZ) -> np.ndarray:
    """Apply the front-end low-pass with its group delay removed.

    'same'-mode convolution with the symmetric kernel centers the response,
    so a symmetric input stays symmetric about the same instant. Edge
    transients bleed (numtaps-1)/2 samples into each end; callers keep
    margins wider than that around anything they measure.
    """
    taps = design_lowpass(rate_hz, passband_hz)
    if len(x) < len(taps):
        # pad so 'same' still sees the full kernel support
        pad = len(taps) - len(x)
        xp = np.concatenate([x, np.zeros(pad, dtype=x.dtype)])
        return signal.fftconvolve(xp, taps, mode="same")[: len(x)]
    return signal.fftconvolve(x, taps, mode="same")


def filter_halfwidth(rate_hz: float, passband_hz: float = DEFAULT_PASSBAND_HZ) -> int:
    """Number of samples of edge transient on each side of the filtered signal."""
    return len(design_lowpass(rate_hz, passband_hz)) // 2
