"""Scenario configuration files.

A scenario is a JSON document with explicit units in key names (timing code
dies by unit bugs). Example:

    {
      "duration_s": 20.0,
      "payload_bits": 112,
      "schedule": {"type": "poisson", "rate_hz": 500.0, "guard_us": 300.0},
      "payloads": {"type": "random"},
      "amplitude": {"type": "mixture", "components": [
          {"weight": 0.22, "min": 0.07, "max": 0.18},
          {"weight": 0.50, "min": 0.35, "max": 0.65},
          {"weight": 0.28, "min": 1.15, "max": 2.2}]},
      "tx": {"jitter_bound_ns": 50.0, "rise_time_ns": 50.0,
             "decay_time_ns": 100.0, "amplitude_variation_db": 2.0,
             "jitter_distribution": "uniform"},
      "receivers": [
        {"sample_rate_hz": 2400000.0, "adc_bits": 8, "gain": 1.0,
         "filter_passband_hz": 2400000.0, "noise_sigma": 0.004,
         "clock": {"poly_s": [0.0]}},
        {"sample_rate_hz": 2400000.0, "adc_bits": 8, "gain": 1.0,
         "filter_passband_hz": 2400000.0, "noise_sigma": 0.004,
         "clock": {"poly_s": [1.7e-7, 5e-6], "random_walk_sigma": 0.0}}
      ]
    }

`schedule` may instead be {"type": "explicit", "times_s": [...]};
`payloads` may be {"type": "list", "hex": [...]} or {"type": "file",
"path": ...} (one hex payload per line); `amplitude` may be
{"type": "fixed", "value": ...} or {"type": "loguniform", "min": ..,
"max": ..}. `adc_bits` of null selects the unquantized float32 trace
format. Clock polynomial coefficient k multiplies t**k (t in seconds from
trace start).
"""

from __future__ import annotations

import json
from pathlib import Path

from .synth import ClockModel, FrontEndParams, PoissonSchedule, TraceScenario, TxImpairments


class ScenarioError(ValueError):
    """Invalid scenario file; message carries the offending key path."""


_REQUIRED = object()


def _get(obj: dict, key: str, path: str, default=_REQUIRED):
    if key in obj:
        return obj[key]
    if default is _REQUIRED:
        raise ScenarioError(f"{path}: missing required key {key!r}")
    return default


def _parse_schedule(obj: dict, path: str):
    kind = _get(obj, "type", path)
    if kind == "poisson":
        return PoissonSchedule(rate_hz=float(_get(obj, "rate_hz", path)),
                               guard=float(_get(obj, "guard_us", path, 300.0)) * 1e-6)
    if kind == "explicit":
        return tuple(float(t) for t in _get(obj, "times_s", path))
    raise ScenarioError(f"{path}.type: unknown schedule type {kind!r}")


def _parse_payloads(obj: dict | None, path: str):
    if obj is None or obj.get("type", "random") == "random":
        return None
    kind = obj["type"]
    if kind == "list":
        return tuple(str(h) for h in _get(obj, "hex", path))
    if kind == "file":
        lines = Path(_get(obj, "path", path)).read_text().split()
        return tuple(lines)
    raise ScenarioError(f"{path}.type: unknown payload source {kind!r}")


def _parse_amplitude(obj: dict | None, path: str) -> dict:
    if obj is None:
        return {"amplitude_range": (0.5, 0.5)}
    kind = _get(obj, "type", path)
    if kind == "fixed":
        v = float(_get(obj, "value", path))
        return {"amplitude_range": (v, v)}
    if kind == "loguniform":
        return {"amplitude_range": (float(_get(obj, "min", path)), float(_get(obj, "max", path)))}
    if kind == "mixture":
        comps = tuple(
            (float(_get(c, "weight", f"{path}.components[{i}]")),
             float(_get(c, "min", f"{path}.components[{i}]")),
             float(_get(c, "max", f"{path}.components[{i}]")))
            for i, c in enumerate(_get(obj, "components", path))
        )
        return {"amplitude_mixture": comps}
    raise ScenarioError(f"{path}.type: unknown amplitude model {kind!r}")


def _parse_tx(obj: dict | None, path: str) -> TxImpairments:
    if obj is None:
        return TxImpairments()
    try:
        return TxImpairments(
            pulse_position_jitter_bound=float(_get(obj, "jitter_bound_ns", path, 50.0)) * 1e-9,
            rise_time=float(_get(obj, "rise_time_ns", path, 50.0)) * 1e-9,
            decay_time=float(_get(obj, "decay_time_ns", path, 100.0)) * 1e-9,
            amplitude_variation_db=float(_get(obj, "amplitude_variation_db", path, 2.0)),
            jitter_distribution=str(_get(obj, "jitter_distribution", path, "uniform")),
        )
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _parse_receiver(obj: dict, path: str) -> tuple[FrontEndParams, ClockModel]:
    try:
        bits = obj.get("adc_bits", 8)
        fe = FrontEndParams(
            sample_rate=float(_get(obj, "sample_rate_hz", path, 2.4e6)),
            adc_bits=None if bits is None else int(bits),
            gain=float(_get(obj, "gain", path, 1.0)),
            filter_passband=float(_get(obj, "filter_passband_hz", path, 2.4e6)),
            noise_sigma=float(_get(obj, "noise_sigma", path, 0.0)),
        )
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    clock_obj = obj.get("clock") or {}
    clock = ClockModel(
        poly=tuple(float(c) for c in clock_obj.get("poly_s", (0.0,))),
        random_walk_sigma=float(clock_obj.get("random_walk_sigma", 0.0)),
        walk_step=float(clock_obj.get("walk_step_s", 1.0)),
    )
    return fe, clock


def parse_scenario(text: str) -> TraceScenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("top level must be a JSON object")
    receivers = _get(doc, "receivers", "$")
    if len(receivers) != 2:
        raise ScenarioError("$.receivers: exactly two receivers are required")
    fe1, ck1 = _parse_receiver(receivers[0], "$.receivers[0]")
    fe2, ck2 = _parse_receiver(receivers[1], "$.receivers[1]")
    amplitude = _parse_amplitude(doc.get("amplitude"), "$.amplitude")
    try:
        return TraceScenario(
            duration=float(_get(doc, "duration_s", "$")),
            schedule=_parse_schedule(_get(doc, "schedule", "$"), "$.schedule"),
            payload_bits=int(_get(doc, "payload_bits", "$", 112)),
            payloads=_parse_payloads(doc.get("payloads"), "$.payloads"),
            impairments=_parse_tx(doc.get("tx"), "$.tx"),
            frontends=(fe1, fe2),
            clocks=(ck1, ck2),
            **amplitude,
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from exc


def load_scenario(path) -> TraceScenario:
    return parse_scenario(Path(path).read_text())
