"""Synthetic trace generation: impairments, front end, two-receiver scenes."""

import hashlib

import numpy as np
import pytest

from modestoa import synth
from modestoa.dataio import RawTrace
from modestoa.signal_model import RECTANGULAR, Payload, build_packet_template, extract_pulses
from modestoa.synth import (
    ClockModel,
    FrontEndParams,
    PoissonSchedule,
    TraceScenario,
    TxImpairments,
    apply_channel_and_frontend,
    generate_packet_waveform,
    generate_two_receiver_trace,
)

PAYLOAD = Payload.from_bits([1, 0, 1, 1, 0, 0, 1, 0] * 14)


class TestTxImpairments:
    def test_defaults_within_ceilings(self):
        TxImpairments()

    @pytest.mark.parametrize("kwargs", [
        {"pulse_position_jitter_bound": 60e-9},
        {"rise_time": 60e-9},
        {"decay_time": 200e-9},
        {"amplitude_variation_db": 2.5},
        {"jitter_distribution": "cauchy"},
        {"rise_time": -1e-9},
    ])
    def test_out_of_tolerance_rejected(self, kwargs):
        with pytest.raises(ValueError):
            TxImpairments(**kwargs)


class TestFrontEndParams:
    def test_defaults(self):
        fe = FrontEndParams()
        assert fe.sim_rate == 40 * 2.4e6
        assert fe.sample_format == "u8"

    @pytest.mark.parametrize("kwargs", [
        {"sample_rate": 0.0},
        {"adc_bits": 2},
        {"adc_bits": 20},
        {"gain": 0.0},
        {"noise_sigma": -0.1},
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            FrontEndParams(**kwargs)

    def test_float_mode(self):
        assert FrontEndParams(adc_bits=None).sample_format == "f32"


class TestGeneratePacketWaveform:
    def test_zero_impairments_degenerate_to_rectangular_template(self):
        wf = generate_packet_waveform(PAYLOAD, TxImpairments.none(), 1)
        tpl = build_packet_template(extract_pulses(PAYLOAD), RECTANGULAR, 40, 2.4e6)
        m = len(tpl.samples)
        assert wf.start_time == 0.0
        # support matches exactly; values match to float dust at step corners
        assert np.array_equal(wf.samples[:m] > 0.5, tpl.samples > 0.5)
        assert np.max(np.abs(wf.samples[:m] - tpl.samples)) < 5e-8
        assert np.all(wf.samples[m:] == 0.0)

    def test_jitter_within_bound(self):
        imp = TxImpairments(pulse_position_jitter_bound=50e-9)
        for seed in range(5):
            wf = generate_packet_waveform(PAYLOAD, imp, seed)
            assert np.all(np.abs(wf.jitters) <= 50e-9)

    def test_truncated_gaussian_jitter_within_bound(self):
        imp = TxImpairments(jitter_distribution="gaussian-truncated")
        for seed in range(5):
            wf = generate_packet_waveform(PAYLOAD, imp, seed)
            assert np.all(np.abs(wf.jitters) <= 50e-9)

    def test_amplitude_spread_bounded_by_db_variation(self):
        imp = TxImpairments(amplitude_variation_db=2.0)
        wf = generate_packet_waveform(PAYLOAD, imp, 2)
        ratio = wf.pulse_amplitudes.max() / wf.pulse_amplitudes.min()
        assert ratio <= 10 ** (2.0 / 20.0) + 1e-12


class TestApplyChannelAndFrontend:
    def make_waveform(self):
        return generate_packet_waveform(PAYLOAD, TxImpairments(0.0, 50e-9, 50e-9, 0.0), 1).samples

    def test_deterministic(self):
        wf = self.make_waveform()
        fe = FrontEndParams(noise_sigma=0.01)
        a = apply_channel_and_frontend(wf, 0.0, fe, 5)
        b = apply_channel_and_frontend(wf, 0.0, fe, 5)
        assert np.array_equal(a.data, b.data)

    def test_saturation_produces_extreme_codes(self):
        wf = self.make_waveform()
        fe = FrontEndParams(gain=3.0)
        out = apply_channel_and_frontend(wf, 0.0, fe, 5, carrier_phase=0.1)
        assert out.data.min() == 0 or out.data.max() == 255

    def test_noiseless_unquantized_matches_filtered_waveform(self):
        from modestoa.filters import zero_phase_lowpass

        wf = self.make_waveform()
        fe = FrontEndParams(noise_sigma=0.0, adc_bits=None, gain=1.3)
        out = apply_channel_and_frontend(wf, 0.0, fe, 5, carrier_phase=0.7)
        got = np.abs(out.complex_window(0, out.n_samples))
        want = np.abs(zero_phase_lowpass(wf, fe.sim_rate)[::40] * 1.3)
        scale = np.max(want)
        assert np.max(np.abs(got - want)) <= 1e-6 * scale  # float32 storage floor
        # float64 path before storage agrees much tighter: re-check via dtype
        assert out.meta.sample_format == "f32"

    def test_integer_delay_shifts_output(self):
        wf = self.make_waveform()
        fe = FrontEndParams(noise_sigma=0.0, adc_bits=None)
        base = apply_channel_and_frontend(wf, 0.0, fe, 5, carrier_phase=0.0)
        # delay by exactly 3 native samples = 120 simulation samples
        delayed = apply_channel_and_frontend(wf, 3 / fe.sample_rate, fe, 5, carrier_phase=0.0)
        a = np.abs(base.complex_window(0, base.n_samples))
        b = np.abs(delayed.complex_window(0, delayed.n_samples))
        k = min(len(a), len(b) - 3)
        assert np.allclose(b[3 : 3 + k], a[:k], atol=1e-6)

    def test_negative_delay_rejected(self):
        with pytest.raises(ValueError):
            apply_channel_and_frontend(self.make_waveform(), -1e-6, FrontEndParams(), 5)


def small_scenario(**overrides) -> TraceScenario:
    base = dict(
        duration=0.05,
        schedule=(0.01, 0.02, 0.03),
        amplitude_range=(0.4, 0.4),
        impairments=TxImpairments(),
        frontends=(FrontEndParams(noise_sigma=0.002),) * 2,
        clocks=(ClockModel(), ClockModel()),
    )
    base.update(overrides)
    return TraceScenario(**base)


class TestGenerateTwoReceiverTrace:
    def test_truth_count_matches_schedule(self):
        rx1, rx2, truth = generate_two_receiver_trace(small_scenario(), 1)
        assert len(truth) == 3
        assert rx1.n_samples == rx2.n_samples == int(0.05 * 2.4e6)

    def test_overlapping_schedule_rejected(self):
        with pytest.raises(ValueError):
            generate_two_receiver_trace(small_scenario(schedule=(0.01, 0.0100005)), 1)

    def test_schedule_too_close_to_edges_rejected(self):
        with pytest.raises(ValueError):
            generate_two_receiver_trace(small_scenario(schedule=(1e-5,)), 1)

    def test_byte_identical_across_runs(self):
        a1, a2, _ = generate_two_receiver_trace(small_scenario(), 42)
        b1, b2, _ = generate_two_receiver_trace(small_scenario(), 42)
        assert hashlib.sha256(a1.data).hexdigest() == hashlib.sha256(b1.data).hexdigest()
        assert hashlib.sha256(a2.data).hexdigest() == hashlib.sha256(b2.data).hexdigest()

    def test_seed_changes_trace(self):
        a1, _, _ = generate_two_receiver_trace(small_scenario(), 42)
        b1, _, _ = generate_two_receiver_trace(small_scenario(), 43)
        assert not np.array_equal(a1.data, b1.data)

    def test_identical_clocks_zero_noise_gives_zero_delta(self):
        # shared antenna + identical clocks + no noise + no quantization:
        # the receivers' amplitude streams coincide (to float32 storage dust)
        # and every estimator's TOA difference is exactly zero
        from modestoa.receiver import detect_and_decode
        from modestoa.resample import upsample
        from modestoa.toa import corr_packet, peak_pulse

        sc = small_scenario(frontends=(FrontEndParams(noise_sigma=0.0, adc_bits=None),) * 2)
        rx1, rx2, _ = generate_two_receiver_trace(sc, 3)
        a = np.abs(rx1.complex_window(0, rx1.n_samples))
        b = np.abs(rx2.complex_window(0, rx2.n_samples))
        assert np.allclose(a, b, atol=2e-7)
        p1 = detect_and_decode(rx1)
        p2 = detect_and_decode(rx2)
        assert len(p1) == len(p2) == 3
        for pk1, pk2 in zip(p1, p2):
            w1, w2 = upsample(pk1.window, 83), upsample(pk2.window, 83)
            assert corr_packet(w2, pk2, "smoothed").toa_seconds == \
                corr_packet(w1, pk1, "smoothed").toa_seconds
            assert peak_pulse(w2, pk2).toa_seconds == peak_pulse(w1, pk1).toa_seconds

    def test_constant_clock_offset_appears_in_truth_and_stream(self):
        c = 2.5 / 2.4e6  # 2.5 native samples
        sc = small_scenario(
            frontends=(FrontEndParams(noise_sigma=0.0, adc_bits=None),) * 2,
            clocks=(ClockModel(), ClockModel(poly=(c,))),
        )
        rx1, rx2, truth = generate_two_receiver_trace(sc, 3)
        for t in truth:
            assert t.clock_arrival_rx2 - t.clock_arrival_rx1 == pytest.approx(c, abs=1e-15)
        # the packet really is displaced by ~2.5 samples in the second stream
        a = np.abs(rx1.complex_window(0, rx1.n_samples))
        b = np.abs(rx2.complex_window(0, rx2.n_samples))
        lag = np.argmax(np.correlate(b, a[24000:24100], mode="valid")) - 24000
        assert lag in (2, 3)

    def test_noise_variance_increases_with_sigma(self):
        quiet = []
        for sigma in (0.002, 0.01, 0.05):
            sc = small_scenario(frontends=(FrontEndParams(noise_sigma=sigma),) * 2)
            rx1, _, _ = generate_two_receiver_trace(sc, 11)
            # far from any packet: first 10k samples are noise only
            w = rx1.complex_window(0, 10_000)
            quiet.append(np.var(w.real) + np.var(w.imag))
        assert quiet[0] < quiet[1] < quiet[2]

    def test_clipped_sample_count_monotone_in_gain(self):
        counts = []
        for gain in (0.5, 1.5, 3.0, 6.0):
            sc = small_scenario(frontends=(FrontEndParams(noise_sigma=0.002, gain=gain),) * 2)
            rx1, _, _ = generate_two_receiver_trace(sc, 12)
            counts.append(int(rx1.clipped_window(0, rx1.n_samples).sum()))
        assert all(a <= b for a, b in zip(counts, counts[1:]))
        assert counts[-1] > 0

    def test_injected_clock_polynomial_recovered_from_truth(self):
        poly = (1.0e-5, 1.0e-6, 2.0e-8)
        rng = np.random.default_rng(5)
        times = tuple(np.sort(rng.uniform(0.05, 9.95, 60)))
        sc = small_scenario(
            duration=10.0,
            schedule=times,
            clocks=(ClockModel(), ClockModel(poly=poly)),
            frontends=(FrontEndParams(noise_sigma=0.0, adc_bits=None),) * 2,
        )
        _, _, truth = generate_two_receiver_trace(sc, 6)
        t = np.array([p.t_m for p in truth])
        delta = np.array([p.clock_arrival_rx2 - p.clock_arrival_rx1 for p in truth])
        coef = np.polynomial.polynomial.polyfit(t, delta, 2)
        assert np.allclose(coef, poly, rtol=1e-9, atol=1e-15)

    def test_poisson_schedule_respects_guard_and_rate(self):
        sc = small_scenario(duration=5.0, schedule=PoissonSchedule(rate_hz=200.0, guard=4e-4))
        rx1, _, truth = generate_two_receiver_trace(sc, 13)
        times = np.array([t.t_m for t in truth])
        assert len(times) > 300  # thinned Poisson at ~185/s over ~5 s
        assert np.min(np.diff(times)) >= 4e-4

    def test_payload_list_used_round_robin(self):
        sc = small_scenario(payloads=(PAYLOAD.hex,))
        _, _, truth = generate_two_receiver_trace(sc, 2)
        assert all(t.payload_hex == PAYLOAD.hex for t in truth)

    def test_amplitude_mixture_draws_inside_components(self):
        sc = small_scenario(
            duration=1.0,
            schedule=tuple(np.linspace(0.01, 0.99, 150)),
            amplitude_mixture=((1.0, 0.1, 0.2), (1.0, 0.8, 0.9)),
        )
        _, _, truth = generate_two_receiver_trace(sc, 3)
        amps = np.array([t.tx_amplitude for t in truth])
        in_low = (amps >= 0.1) & (amps <= 0.2)
        in_high = (amps >= 0.8) & (amps <= 0.9)
        assert np.all(in_low | in_high)
        assert in_low.any() and in_high.any()

    def test_mismatched_sample_rates_rejected(self):
        sc = small_scenario(frontends=(FrontEndParams(), FrontEndParams(sample_rate=2e6)))
        with pytest.raises(ValueError):
            generate_two_receiver_trace(sc, 1)


class TestTraceRoundTrip:
    def test_write_read_round_trip(self, tmp_path):
        rx1, _, _ = generate_two_receiver_trace(small_scenario(), 1)
        path = tmp_path / "trace.iq"
        rx1.write(path)
        back = RawTrace.read(path)
        assert np.array_equal(back.data, rx1.data)
        assert back.meta == rx1.meta
