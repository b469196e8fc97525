"""Occupancy features: per-segment accelerometer magnitude statistics and
per-window audio zero-crossing counts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

ACCEL_KINDS = ("max", "mean", "p25", "p75")
MODALITIES = ("accel_x", "accel_y", "accel_z", "audio_zcr")


@dataclass(frozen=True)
class FeatureSeries:
    values: np.ndarray
    segment_len_s: float
    modality: str
    kind: str = "max"

    def __len__(self):
        return len(self.values)


def _segments(signal, rate, segment_len_s) -> np.ndarray:
    if rate <= 0 or segment_len_s <= 0:
        raise ParameterError("rate and segment length must be positive")
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ParameterError("expected a non-empty 1-D signal")
    seg = int(round(rate * segment_len_s))
    if seg < 1:
        raise ParameterError("segment shorter than one sample")
    count = x.size // seg
    if count == 0:
        raise ParameterError(
            f"signal of {x.size} samples is shorter than one {segment_len_s} s segment")
    # trailing partial segment is dropped
    return x[:count * seg].reshape(count, seg)


def accel_max_magnitude(channel, rate: float, segment_len_s: float = 1.0,
                        kind: str = "max", modality: str = "accel_z") -> FeatureSeries:
    """Per-segment statistic of ``|channel|``; ``kind="max"`` by default.

    ``kind`` may also be ``"mean"``, ``"p25"`` or ``"p75"``.
    """
    mag = np.abs(_segments(channel, rate, segment_len_s))
    if kind == "max":
        values = mag.max(axis=1)
    elif kind == "mean":
        values = mag.mean(axis=1)
    elif kind == "p25":
        values = np.percentile(mag, 25, axis=1)
    elif kind == "p75":
        values = np.percentile(mag, 75, axis=1)
    else:
        raise ParameterError(f"unknown accelerometer feature kind {kind!r}")
    return FeatureSeries(values, segment_len_s, modality, kind)


def audio_zero_crossings(audio, rate: float = 48000, window_s: float = 5.0) -> FeatureSeries:
    """Count sign changes between adjacent samples inside each window.

    Zero counts as positive.  Pairs straddling a window boundary are not
    counted.
    """
    frames = _segments(audio, rate, window_s)
    negative = frames < 0
    counts = np.count_nonzero(negative[:, 1:] != negative[:, :-1], axis=1)
    return FeatureSeries(counts.astype(float), window_s, "audio_zcr", "zcr")
