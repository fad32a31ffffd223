"""Shared synthetic fixtures (session-scoped: traces are expensive)."""

import numpy as np
import pytest

from modestoa import synth
from modestoa.receiver import detect_and_decode


def spaced_times(rng, n, t_lo, t_hi, min_gap=4e-4):
    t = np.sort(rng.uniform(t_lo, t_hi, n))
    keep = np.concatenate([[True], np.diff(t) > min_gap])
    return tuple(t[keep])


@pytest.fixture(scope="session")
def clean_float_trace():
    """Jitter-free, noiseless, unquantized two-receiver trace with truth.

    Symmetric 50 ns pulse edges keep every estimator unbiased, so per-packet
    truth-error bounds are pure grid effects.
    """
    rng = np.random.default_rng(4)
    imp = synth.TxImpairments(pulse_position_jitter_bound=0.0, rise_time=50e-9,
                              decay_time=50e-9, amplitude_variation_db=0.0)
    sc = synth.TraceScenario(
        duration=0.25,
        schedule=spaced_times(rng, 22, 0.002, 0.248),
        amplitude_range=(0.5, 0.5),
        impairments=imp,
        frontends=(synth.FrontEndParams(noise_sigma=0.0, adc_bits=None),) * 2,
        clocks=(synth.ClockModel(), synth.ClockModel()),
    )
    rx1, rx2, truth = synth.generate_two_receiver_trace(sc, 8)
    return sc, rx1, rx2, truth


@pytest.fixture(scope="session")
def clean_float_packets(clean_float_trace):
    sc, rx1, rx2, truth = clean_float_trace
    return detect_and_decode(rx1), truth


@pytest.fixture(scope="session")
def quantized_trace():
    """8-bit two-receiver trace with spec-level impairments and noise."""
    rng = np.random.default_rng(21)
    sc = synth.TraceScenario(
        duration=0.5,
        schedule=spaced_times(rng, 100, 0.002, 0.498),
        amplitude_range=(0.3, 0.3),
        impairments=synth.TxImpairments(),
        frontends=(synth.FrontEndParams(noise_sigma=0.002),) * 2,
        clocks=(synth.ClockModel(), synth.ClockModel(poly=(2.3e-7,))),
    )
    rx1, rx2, truth = synth.generate_two_receiver_trace(sc, 7)
    return sc, rx1, rx2, truth
