"""Turn embeddings into viewable images: percentile contrast stretch,
grayscale / false-color composition, PNG export with provenance."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import pngio
from .errors import ConfigError, DataError

PROVENANCE_KEY = "undertext:provenance"


@dataclass
class EnhancedImage:
    """1-3 float channel planes in [0, 1] plus the provenance that made them."""

    planes: np.ndarray  # (H, W, C), C in 1..3
    provenance: dict = field(default_factory=dict)

    @property
    def height(self) -> int:
        return self.planes.shape[0]

    @property
    def width(self) -> int:
        return self.planes.shape[1]

    @property
    def n_channels(self) -> int:
        return self.planes.shape[2]


def stretch(values: np.ndarray, p_lo: float = 2.0, p_hi: float = 98.0) -> np.ndarray:
    """Affine map sending the p_lo percentile to 0 and p_hi to 1, clamped.

    A constant plane (or one whose two percentiles coincide) maps to 0.5.
    """
    if not 0 <= p_lo < p_hi <= 100:
        raise ConfigError(f"stretch percentiles out of order: ({p_lo}, {p_hi})")
    v = np.asarray(values, np.float64)
    lo, hi = np.percentile(v, [p_lo, p_hi])
    if hi - lo == 0.0:
        return np.full_like(v, 0.5)
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def compose(
    embedding_values: np.ndarray,
    pixel_index: np.ndarray,
    width: int,
    height: int,
    channels: list[int] | tuple[int, ...] = (0,),
    p_lo: float = 2.0,
    p_hi: float = 98.0,
    invert: bool = False,
    provenance: dict | None = None,
) -> EnhancedImage:
    """Rasterize 1-3 embedding components into a stretched image.

    ``channels`` are 0-based component indices; the pixel index must cover
    the frame exactly once. One channel renders grayscale, two render R,G
    with a zero blue channel, three render RGB. Inversion (v -> 1 - v)
    happens after the stretch.
    """
    emb = np.asarray(embedding_values, np.float64)
    idx = np.asarray(pixel_index)
    if not 1 <= len(channels) <= 3:
        raise ConfigError(f"need 1..3 channels, got {len(channels)}")
    for c in channels:
        if not 0 <= c < emb.shape[1]:
            raise ConfigError(f"component index {c} outside embedding with {emb.shape[1]} dims")
    if idx.shape[0] != emb.shape[0]:
        raise DataError("pixel index length does not match embedding rows")

    flat = idx[:, 1].astype(np.int64) * width + idx[:, 0].astype(np.int64)
    if flat.min(initial=0) < 0 or flat.max(initial=-1) >= width * height:
        raise DataError("pixel index outside the output frame")
    coverage = np.zeros(width * height, np.int64)
    np.add.at(coverage, flat, 1)
    if (coverage != 1).any():
        missing = int((coverage == 0).sum())
        raise DataError(f"pixel index does not cover the frame exactly ({missing} gaps)")

    n_out = 3 if len(channels) >= 2 else 1
    planes = np.zeros((height, width, n_out))
    for out_c, comp in enumerate(channels):
        plane = np.zeros(width * height)
        plane[flat] = emb[:, comp]
        plane = stretch(plane.reshape(height, width), p_lo, p_hi)
        if invert:
            plane = 1.0 - plane
        planes[:, :, out_c] = plane

    prov = dict(provenance or {})
    prov.setdefault("components", list(int(c) for c in channels))
    prov.setdefault("stretch", [p_lo, p_hi])
    prov.setdefault("invert", bool(invert))
    return EnhancedImage(planes=planes, provenance=prov)


def export_png(image: EnhancedImage, path, bit_depth: int = 8) -> None:
    """Quantize (round half up) and write a PNG with the provenance chunk."""
    if bit_depth not in (8, 16):
        raise ConfigError(f"bit depth must be 8 or 16, got {bit_depth}")
    scale = 2**bit_depth - 1
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    quantized = np.floor(image.planes * scale + 0.5).astype(dtype)
    if image.n_channels == 1:
        quantized = quantized[:, :, 0]
    text = {PROVENANCE_KEY: json.dumps(image.provenance, sort_keys=True)}
    pngio.write_png(path, quantized, bit_depth, text)


def import_png(path) -> EnhancedImage:
    """Re-import one of our exports as float planes in [0, 1]."""
    img = pngio.read_png(path)
    scale = 2**img.bit_depth - 1
    planes = img.samples.astype(np.float64) / scale
    if planes.ndim == 2:
        planes = planes[:, :, None]
    provenance = {}
    if PROVENANCE_KEY in img.text:
        provenance = json.loads(img.text[PROVENANCE_KEY])
    return EnhancedImage(planes=planes, provenance=provenance)


def downsample(plane: np.ndarray, max_px: int) -> np.ndarray:
    """Stride-subsample a plane (or stack) so height*width <= max_px."""
    if max_px < 1:
        raise ConfigError("max_px must be >= 1")
    h, w = plane.shape[:2]
    if h * w <= max_px:
        return plane
    factor = int(np.ceil(np.sqrt(h * w / max_px)))
    return plane[::factor, ::factor]
