"""BPPM chip mapping, pulse extraction, and template construction."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modestoa import signal_model as sm

F_S = 2.4e6


def random_bits(rng, n=112):
    return rng.integers(0, 2, size=n)


class TestPayload:
    def test_valid_lengths(self):
        sm.Payload.from_bits([0] * 56)
        sm.Payload.from_bits([1] * 112)

    @pytest.mark.parametrize("n", [0, 1, 55, 57, 111, 113, 224])
    def test_invalid_length_rejected(self, n):
        with pytest.raises(ValueError):
            sm.Payload.from_bits([0] * n)

    def test_invalid_bit_rejected(self):
        with pytest.raises(ValueError):
            sm.Payload.from_bits([0] * 55 + [2])

    def test_hex_round_trip(self):
        rng = np.random.default_rng(7)
        for n in (56, 112):
            p = sm.Payload.from_bits(random_bits(rng, n))
            assert sm.Payload.from_hex(p.hex) == p


class TestExtractPulses:
    def test_bits_01_merge_to_type_ii(self):
        pulses = sm.pulses_from_bits([0, 1], origin=sm.PREAMBLE_SECONDS)
        assert len(pulses) == 1
        (p,) = pulses
        assert p.kind is sm.PulseKind.TYPE_II
        assert p.start == pytest.approx(sm.PREAMBLE_SECONDS + 0.5e-6)
        assert p.duration == pytest.approx(1.0e-6)

    def test_bits_11_stay_type_i(self):
        pulses = sm.pulses_from_bits([1, 1])
        assert [(p.kind, p.start) for p in pulses] == [
            (sm.PulseKind.TYPE_I, 0.0),
            (sm.PulseKind.TYPE_I, pytest.approx(1.0e-6)),
        ]

    def test_preamble_always_present(self):
        rng = np.random.default_rng(1)
        for n in (56, 112):
            seq = sm.extract_pulses(sm.Payload.from_bits(random_bits(rng, n)))
            assert seq.count >= 4
            pre = [p for p in seq.pulses if p.start < sm.PREAMBLE_SECONDS]
            assert [(p.kind, p.start) for p in pre] == [
                (sm.PulseKind.TYPE_I, t) for t in sm.PREAMBLE_PULSE_STARTS
            ]

    def test_mean_type_counts_over_random_payloads(self):
        # payload-only counts; the four preamble pulses sit on top of these
        rng = np.random.default_rng(42)
        bits = rng.integers(0, 2, size=(10_000, 112))
        type_i = type_ii = 0
        for row in bits:
            seq = sm.extract_pulses(sm.Payload.from_bits(row))
            payload = seq.payload_pulses()
            type_i += sum(p.kind is sm.PulseKind.TYPE_I for p in payload)
            type_ii += sum(p.kind is sm.PulseKind.TYPE_II for p in payload)
        assert 55 <= type_i / 10_000 <= 57
        assert 27 <= type_ii / 10_000 <= 29

    def test_exhaustive_type_ii_only_at_01_boundaries(self):
        # every occupied chip belongs to exactly one pulse; Type II exactly at "01"
        for bits in itertools.product((0, 1), repeat=10):
            pulses = sm.pulses_from_bits(bits)
            covered = set()
            for p in pulses:
                first = round(p.start / sm.CHIP_SECONDS)
                width = 2 if p.kind is sm.PulseKind.TYPE_II else 1
                chips = set(range(first, first + width))
                assert not chips & covered
                covered |= chips
            occ = {c for c, v in enumerate(sm.chip_occupancy(bits)) if v}
            assert covered == occ
            expected_ii = sum(1 for a, b in zip(bits, bits[1:]) if (a, b) == (0, 1))
            assert sum(p.kind is sm.PulseKind.TYPE_II for p in pulses) == expected_ii

    @given(st.lists(st.integers(0, 1), min_size=0, max_size=112))
    @settings(max_examples=200, deadline=None)
    def test_round_trip_chip_map(self, bits):
        occ = np.zeros(2 * len(bits), dtype=bool)
        for p in sm.pulses_from_bits(bits):
            first = round(p.start / sm.CHIP_SECONDS)
            width = 2 if p.kind is sm.PulseKind.TYPE_II else 1
            occ[first : first + width] = True
        assert np.array_equal(occ, sm.chip_occupancy(bits))


class TestPulseShape:
    def test_type_i_rect_n25(self):
        # 0.5 us at 60 MHz grid = 30 samples
        s = sm.build_pulse_shape(sm.PulseKind.TYPE_I, sm.RECTANGULAR, 25, F_S)
        assert np.array_equal(s.samples, np.ones(30))
        assert s.start_time == 0.0

    def test_type_ii_rect_native(self):
        # 1.0 us * 2.4 MHz = 2.4 -> indices 0..2 by the edge rule
        s = sm.build_pulse_shape(sm.PulseKind.TYPE_II, sm.RECTANGULAR, 1, F_S)
        assert np.array_equal(s.samples, np.ones(3))

    @pytest.mark.parametrize("n", [1, 25, 83])
    def test_smoothed_unimodal_normalized_truncated(self, n):
        s = sm.build_pulse_shape(sm.PulseKind.TYPE_I, sm.SMOOTHED, n, F_S)
        assert s.samples.max() == pytest.approx(1.0)
        assert abs(s.samples[0]) < 0.01
        assert abs(s.samples[-1]) < 0.01
        # unimodal above the ringing floor: one contiguous region >= 50 % peak
        high = s.samples >= 0.5
        changes = np.flatnonzero(np.diff(high.astype(int)))
        assert len(changes) == 2

    def test_invalid_args_rejected(self):
        with pytest.raises(ValueError):
            sm.build_pulse_shape(sm.PulseKind.TYPE_I, "triangular", 25, F_S)
        with pytest.raises(ValueError):
            sm.build_pulse_shape(sm.PulseKind.TYPE_I, sm.RECTANGULAR, 0, F_S)
        with pytest.raises(ValueError):
            sm.build_pulse_shape(sm.PulseKind.TYPE_I, sm.RECTANGULAR, 25, -1.0)


class TestPacketTemplate:
    def test_preamble_only_rect_runs(self):
        seq = sm.PulseSequence(tuple(sm.preamble_pulses()))
        tpl = sm.build_packet_template(seq, sm.RECTANGULAR, 25, F_S)
        edges = np.flatnonzero(np.diff(np.concatenate([[0.0], tpl.samples, [0.0]])))
        runs = edges.reshape(-1, 2)
        assert len(runs) == 4
        assert all(b - a == 30 for a, b in runs)

    def test_rect_template_is_binary(self):
        rng = np.random.default_rng(3)
        seq = sm.extract_pulses(sm.Payload.from_bits(random_bits(rng)))
        tpl = sm.build_packet_template(seq, sm.RECTANGULAR, 25, F_S)
        assert set(np.unique(tpl.samples)) <= {0.0, 1.0}

    def test_all_ones_payload_has_no_type_ii(self):
        seq = sm.extract_pulses(sm.Payload.from_bits([1] * 112))
        assert seq.type_ii_count == 0

    def test_preamble_template_span(self):
        # preamble is 8 us; rect template ends with the last preamble pulse
        seq = sm.PulseSequence(tuple(sm.preamble_pulses()))
        tpl = sm.build_packet_template(seq, sm.RECTANGULAR, 25, F_S)
        assert len(tpl.samples) == 300  # 5 us of occupied span at 60 MHz
        smoothed = sm.build_packet_template(seq, sm.SMOOTHED, 25, F_S)
        span = len(smoothed.samples) / smoothed.rate
        assert 5e-6 < span < 12e-6  # smoothing tails stay bounded

    def test_rect_autocorrelation_peaks_at_zero_lag(self):
        rng = np.random.default_rng(5)
        seq = sm.extract_pulses(sm.Payload.from_bits(random_bits(rng)))
        tpl = sm.build_packet_template(seq, sm.RECTANGULAR, 25, F_S)
        x = tpl.samples
        corr = np.correlate(np.concatenate([np.zeros(50), x, np.zeros(50)]), x, mode="valid")
        assert sm.plateau_argmax(corr) == 50


class TestPlateauArgmax:
    def test_single_peak(self):
        assert sm.plateau_argmax(np.array([0.0, 1.0, 0.5])) == 1

    def test_even_plateau_rounds_half_down(self):
        assert sm.plateau_argmax(np.array([0, 1, 1, 0])) == 1
        assert sm.plateau_argmax(np.array([0, 1, 1, 1, 0])) == 2

    def test_first_plateau_wins(self):
        assert sm.plateau_argmax(np.array([1, 1, 0, 1, 1])) == 0
