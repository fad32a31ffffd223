"""modestoa: nanosecond-precision TOA estimation for Mode S / ADS-B IQ streams.

The package covers the full measurement chain: synthetic two-receiver trace
generation, legacy-style packet detection and BPPM decoding, band-limited
upsampling, per-pulse and whole-packet TOA estimators, and the paired
two-receiver precision evaluation with polynomial clock-drift removal.
"""

from .signal_model import (
    CHIP_SECONDS,
    PREAMBLE_SECONDS,
    RECTANGULAR,
    SMOOTHED,
    Payload,
    PulseDescriptor,
    PulseKind,
    PulseSequence,
    build_packet_template,
    build_pulse_shape,
    extract_pulses,
)
from .dataio import RawTrace, TraceMeta
from .receiver import DecodedPacket, SampleWindow, detect_and_decode, packet_window
from .resample import UpsampledWindow, Upsampler, upsample
from .toa import (
    ALL_METHODS,
    CorrPacketEstimator,
    CorrPartialEstimator,
    CorrPulseEstimator,
    LegacyEstimator,
    PeakPulseEstimator,
    ToaEstimate,
    ToaRecord,
    make_estimator,
    packet_metrics,
    run_estimators,
)
from .synth import (
    ClockModel,
    FrontEndParams,
    PoissonSchedule,
    TraceScenario,
    TxImpairments,
    apply_channel_and_frontend,
    generate_packet_waveform,
    generate_two_receiver_trace,
)
from .evaluate import (
    ClockPolynomialFit,
    EvalReport,
    PairedMeasurement,
    distribution_stats,
    evaluate_method,
    fit_clock,
    pair_packets,
    residuals_and_sigma,
)
from .scenario import ScenarioError, load_scenario, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "ALL_METHODS",
    "CHIP_SECONDS",
    "PREAMBLE_SECONDS",
    "RECTANGULAR",
    "SMOOTHED",
    "ClockModel",
    "ClockPolynomialFit",
    "CorrPacketEstimator",
    "CorrPartialEstimator",
    "CorrPulseEstimator",
    "DecodedPacket",
    "EvalReport",
    "FrontEndParams",
    "LegacyEstimator",
    "PairedMeasurement",
    "Payload",
    "PeakPulseEstimator",
    "PoissonSchedule",
    "PulseDescriptor",
    "PulseKind",
    "PulseSequence",
    "RawTrace",
    "SampleWindow",
    "ScenarioError",
    "ToaEstimate",
    "ToaRecord",
    "TraceMeta",
    "TraceScenario",
    "TxImpairments",
    "UpsampledWindow",
    "Upsampler",
    "apply_channel_and_frontend",
    "build_packet_template",
    "build_pulse_shape",
    "detect_and_decode",
    "distribution_stats",
    "evaluate_method",
    "extract_pulses",
    "fit_clock",
    "generate_packet_waveform",
    "generate_two_receiver_trace",
    "load_scenario",
    "make_estimator",
    "packet_metrics",
    "packet_window",
    "pair_packets",
    "parse_scenario",
    "residuals_and_sigma",
    "run_estimators",
    "upsample",
]
