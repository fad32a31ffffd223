"""Raw IQ trace containers and on-disk formats.

Raw traces are interleaved I, Q, I, Q, ... with no header:
- "u8": unsigned 8-bit offset-binary centered at 127.5 (RTL-SDR raw format,
  byte-compatible with real captures); codes 0 and 255 are the saturation
  rails;
- "u16": same convention widened for adc_bits in (8, 16];
- "f32": little-endian float32 full-scale units, used by the unquantized
  synthesis mode (adc_bits is null in the sidecar).

Sample rate and ADC width travel in a JSON sidecar next to the data file.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

SAMPLE_FORMATS = ("u8", "u16", "f32")
_DTYPES = {"u8": np.uint8, "u16": np.dtype("<u2"), "f32": np.dtype("<f4")}


@dataclass(frozen=True)
class TraceMeta:
    sample_rate_hz: float
    adc_bits: int | None = 8
    start_time: float = 0.0
    sample_format: str = "u8"
    receiver_id: str = ""

    def __post_init__(self) -> None:
        if self.sample_format not in SAMPLE_FORMATS:
            raise ValueError(f"sample_format must be one of {SAMPLE_FORMATS}")
        if self.sample_format != "f32":
            if self.adc_bits is None or not 4 <= self.adc_bits <= 16:
                raise ValueError("adc_bits must be in [4, 16] for quantized traces")


def _u8_magnitude_lut() -> np.ndarray:
    vals = (np.arange(256, dtype=np.float32) - 127.5) / 127.5
    return np.sqrt(vals[:, None] ** 2 + vals[None, :] ** 2)


_MAG_LUT = _u8_magnitude_lut()


class RawTrace:
    """An IQ sample stream plus its metadata, backed by a flat interleaved array."""

    def __init__(self, interleaved: np.ndarray, meta: TraceMeta):
        expected = _DTYPES[meta.sample_format]
        if interleaved.dtype != expected:
            raise ValueError(f"{meta.sample_format} trace requires dtype {expected}, got {interleaved.dtype}")
        if interleaved.ndim != 1 or len(interleaved) % 2:
            raise ValueError("interleaved buffer must be flat with an even number of entries")
        self.data = interleaved
        self.meta = meta

    @property
    def n_samples(self) -> int:
        return len(self.data) // 2

    @property
    def sample_rate(self) -> float:
        return self.meta.sample_rate_hz

    @property
    def start_time(self) -> float:
        return self.meta.start_time

    def _scale(self) -> float:
        return (2 ** self.meta.adc_bits - 1) / 2.0

    def complex_window(self, start: int, stop: int) -> np.ndarray:
        """Full-scale-normalized complex128 samples [start, stop)."""
        raw = self.data[2 * start : 2 * stop].astype(np.float64)
        if self.meta.sample_format != "f32":
            raw = (raw - self._scale()) / self._scale()
        return raw[0::2] + 1j * raw[1::2]

    def clipped_window(self, start: int, stop: int) -> np.ndarray:
        """Per-sample saturation mask (I or Q at an extreme ADC code)."""
        if self.meta.sample_format == "f32":
            pairs = self.data[2 * start : 2 * stop].reshape(-1, 2)
            return (np.abs(pairs) >= 1.0).any(axis=1)
        hi = 2 ** self.meta.adc_bits - 1
        pairs = self.data[2 * start : 2 * stop].reshape(-1, 2)
        return ((pairs == 0) | (pairs == hi)).any(axis=1)

    def magnitude(self, start: int, stop: int) -> np.ndarray:
        """float32 amplitude of samples [start, stop), tuned for long scans."""
        if self.meta.sample_format == "u8":
            pairs = self.data[2 * start : 2 * stop].reshape(-1, 2)
            return _MAG_LUT[pairs[:, 0], pairs[:, 1]]
        w = self.complex_window(start, stop)
        return np.abs(w).astype(np.float32)

    # --- files ---

    def write(self, path, meta_path=None) -> None:
        path = Path(path)
        atomic_write_bytes(path, self.data.tobytes())
        meta_path = Path(meta_path) if meta_path else sidecar_path(path)
        atomic_write_text(meta_path, json.dumps(asdict(self.meta), indent=2) + "\n")

    @classmethod
    def read(cls, path, meta_path=None) -> "RawTrace":
        path = Path(path)
        meta_path = Path(meta_path) if meta_path else sidecar_path(path)
        with open(meta_path) as fh:
            meta = TraceMeta(**json.load(fh))
        data = np.fromfile(path, dtype=_DTYPES[meta.sample_format])
        return cls(data, meta)


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


# --- atomic writes and line-oriented formats ---

def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def write_jsonl(path, records) -> None:
    lines = [json.dumps(rec, sort_keys=True) for rec in records]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")
