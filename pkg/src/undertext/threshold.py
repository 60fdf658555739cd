"""Operator-driven double thresholding.

Dark-is-ink convention: pixels below threshold 1 are the darkest (overtext)
strokes and get colored white; pixels between the thresholds are the
remaining (undertext) band and get multiplicatively darkened, which preserves
stroke texture instead of clipping it to black. Everything at or above
threshold 2 passes through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import LabelMask
from .errors import ConfigError, DataError


@dataclass(frozen=True)
class ThresholdParams:
    t1: float
    t2: float
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.t1 <= 1.0 or not 0.0 <= self.t2 <= 1.0:
            raise ConfigError(f"thresholds must lie in [0, 1], got t1={self.t1}, t2={self.t2}")
        if self.t1 > self.t2:
            raise ConfigError(f"t1={self.t1} must not exceed t2={self.t2}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")


def apply_double_threshold(image: np.ndarray, params: ThresholdParams) -> np.ndarray:
    """Per pixel: v < t1 -> 1.0 (white); t1 <= v < t2 -> alpha*v; else v.

    Strict comparisons make t1 = 0 an exact identity for the whitening step
    and t1 = t2 an empty darkening band.
    """
    v = np.asarray(image, np.float64)
    if v.min(initial=0.0) < 0.0 or v.max(initial=0.0) > 1.0:
        raise DataError("threshold input must lie in [0, 1]")
    out = v.copy()
    dark_band = (v >= params.t1) & (v < params.t2)
    out[dark_band] = params.alpha * v[dark_band]
    out[v < params.t1] = 1.0
    return out


def suggest_thresholds(image: np.ndarray, labels: LabelMask) -> ThresholdParams:
    """Starting-point thresholds from labeled pixels; the operator stays in
    charge of the final cutting values.

    t1 is the midpoint between the 95th percentile of overtext intensities
    and the 5th percentile of undertext intensities (clamped to their order);
    t2 is the undertext 95th percentile; alpha defaults to 0.5.
    """
    v = np.asarray(image, np.float64)
    if v.shape != labels.labels.shape:
        raise DataError(
            f"image {v.shape} and label mask {labels.labels.shape} dimensions differ"
        )
    over = v[labels.labels == 1]
    under = v[labels.labels == 2]
    if over.size == 0:
        raise DataError("no overtext (class 1) pixels labeled")
    if under.size == 0:
        raise DataError("no undertext (class 2) pixels labeled")

    over_p95 = float(np.percentile(over, 95))
    under_p5 = float(np.percentile(under, 5))
    under_p95 = float(np.percentile(under, 95))
    t1 = 0.5 * (over_p95 + under_p5) if over_p95 <= under_p5 else under_p5
    t1 = min(max(t1, 0.0), 1.0)
    t2 = min(max(under_p95, t1), 1.0)
    return ThresholdParams(t1=t1, t2=t2, alpha=0.5)
