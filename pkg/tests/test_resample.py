"""Band-limited upsampling contracts."""

import numpy as np
import pytest

from modestoa.receiver import SampleWindow
from modestoa.resample import Upsampler, upsample

F_S = 2.4e6


def make_window(iq, start_index=1000):
    iq = np.asarray(iq, dtype=np.complex128)
    return SampleWindow(
        iq=iq,
        clipped=np.zeros(len(iq), dtype=bool),
        start_index=start_index,
        sample_rate=F_S,
        start_time=start_index / F_S,
        receiver_id="rx1",
    )


def tone_window(length=304, freq=0.3e6, phase=0.731):
    t = np.arange(length) / F_S
    return make_window(np.exp(1j * (2 * np.pi * freq * t + phase)))


@pytest.mark.parametrize("method", ["fft", "fir"])
def test_identity_at_n1(method):
    w = tone_window()
    up = upsample(w, 1, method=method)
    assert np.allclose(up.samples, w.iq)
    assert up.origin_time == w.start_time


def test_grid_steps():
    w = tone_window()
    assert upsample(w, 25).step == pytest.approx(1.0 / (25 * F_S))
    step83 = upsample(w, 83).step
    assert step83 == pytest.approx(1.0 / (83 * F_S))
    assert step83 == pytest.approx(5.02e-9, rel=1e-3)


@pytest.mark.parametrize("n", [0, -3, 129, 2.5])
def test_factor_out_of_range_rejected(n):
    with pytest.raises(ValueError):
        upsample(tone_window(), n)


def test_short_window_rejected():
    with pytest.raises(ValueError):
        upsample(make_window(np.ones(16, dtype=complex)), 25)


@pytest.mark.parametrize("method,tol", [("fft", 1e-3), ("fir", 5e-3)])
def test_tone_matches_analytic_interior(method, tol):
    # 0.3 MHz is 1/8 of f_s; 304 samples hold an integer number of cycles
    n = 25
    w = tone_window()
    up = upsample(w, n, method=method)
    t = np.arange(len(up.samples)) / up.rate
    analytic = np.exp(1j * (2 * np.pi * 0.3e6 * t + 0.731))
    trim = 4 * n
    err = up.samples[trim:-trim] - analytic[trim:-trim]
    rms = np.sqrt(np.mean(np.abs(err) ** 2))
    assert rms <= tol  # spec bound 0.1 % RMS

def test_downsample_recovers_input_fft():
    rng = np.random.default_rng(11)
    w = make_window(rng.normal(size=304) + 1j * rng.normal(size=304))
    up = upsample(w, 25, method="fft")
    err = up.samples[::25] - w.iq
    assert np.sqrt(np.mean(np.abs(err) ** 2) / np.mean(np.abs(w.iq) ** 2)) <= 1e-9


def test_downsample_recovers_input_fir():
    rng = np.random.default_rng(12)
    # band-limit the test signal: FIR interpolators are only near-exact in-band
    x = rng.normal(size=304) + 1j * rng.normal(size=304)
    spec = np.fft.fft(x)
    spec[60:-60] = 0
    x = np.fft.ifft(spec)
    w = make_window(x)
    up = upsample(w, 25, method="fir")
    # compare on the original instants, interior only
    err = up.samples[::25][8:-8] - w.iq[8:-8]
    rel = np.sqrt(np.mean(np.abs(err) ** 2) / np.mean(np.abs(w.iq) ** 2))
    assert rel <= 5e-3


def test_circular_shift_equivariance_fft():
    rng = np.random.default_rng(13)
    x = rng.normal(size=304) + 1j * rng.normal(size=304)
    n = 25
    shift = 7
    up_shifted = upsample(make_window(np.roll(x, shift)), n, method="fft").samples
    shifted_up = np.roll(upsample(make_window(x), n, method="fft").samples, n * shift)
    assert np.max(np.abs(up_shifted - shifted_up)) <= 1e-9 * np.max(np.abs(shifted_up))


def test_constant_phase_preserved():
    # band-limited positive envelope so interpolation cannot cross zero
    t = np.arange(304) / F_S
    amp = 1.0 + 0.5 * np.sin(2 * np.pi * 0.1e6 * t) + 0.2 * np.cos(2 * np.pi * 0.25e6 * t)
    phase = 1.234
    w = make_window(amp * np.exp(1j * phase))
    up = upsample(w, 25)
    interior = up.samples[100:-100]
    assert np.max(np.abs(np.angle(interior) - phase)) <= 1e-3


def test_upsampler_transformer_api():
    est = Upsampler(factor=25)
    assert est.get_params() == {"factor": 25, "method": "fft"}
    w = tone_window()
    out = est.fit().transform(w)
    assert len(out.samples) == 25 * len(w.iq)
    batch = est.transform([w, w])
    assert len(batch) == 2
    with pytest.raises(ValueError):
        Upsampler(factor=0).fit()
