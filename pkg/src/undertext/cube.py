"""Band-stack ingestion, label rasterization, and design-matrix plumbing.

A page is a stack of co-registered grayscale band images (one per
illumination/filter combination, e.g. the ultraviolet + green-filter capture
coded "CFUG"). The stack is normalized to [0, 1] floats; labels are operator
polygons rasterized to a per-pixel class mask; the per-pixel spectra feed the
embedding methods through a flat design matrix.

Axis conventions: arrays are indexed ``[y, x]`` (row-major), pixel
coordinates are ``(x, y)``, and the samples array is shaped (H, W, D).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import pngio
from .errors import ConfigError, DataError

LABEL_NAMES = {0: "unlabeled", 1: "overtext", 2: "undertext", 3: "parchment"}

# Pillow modes accepted for band images, mapped to their sample bit depth.
_GRAY_MODES = {"L": 8, "I;16": 16, "I;16B": 16, "I;16L": 16, "I;16N": 16, "I": 16}


@dataclass(frozen=True)
class BandDescriptor:
    """Metadata for one band image; wavelength/illumination/filter advisory."""

    band_id: str
    file_name: str
    wavelength_nm: float | None = None
    illumination: str | None = None
    filter_code: str | None = None


@dataclass
class SpectralCube:
    """Registered band stack with samples in [0, 1], shaped (H, W, D)."""

    bands: list[BandDescriptor]
    samples: np.ndarray

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def n_bands(self) -> int:
        return self.samples.shape[2]

    def band_plane(self, index: int) -> np.ndarray:
        if not 0 <= index < self.n_bands:
            raise ConfigError(f"band index {index} out of range (cube has {self.n_bands})")
        return self.samples[:, :, index]


@dataclass
class LabelMask:
    """Per-pixel class labels: 0 unlabeled, 1 overtext, 2 undertext, 3 parchment."""

    labels: np.ndarray  # (H, W) uint8

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def class_counts(self) -> dict[int, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def present_classes(self) -> list[int]:
        return [c for c in self.class_counts() if c != 0]


@dataclass
class DesignMatrix:
    """N pixel spectra (rows) with a map back to pixel coordinates."""

    values: np.ndarray  # (N, D) float64
    pixel_index: np.ndarray  # (N, 2) int, columns (x, y)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelPolygon:
    label: int
    points: tuple[tuple[float, float], ...]


def _validate_polygon(label: int, points) -> LabelPolygon:
    if label not in (1, 2, 3):
        raise DataError(f"polygon class {label} outside 1..3")
    pts = tuple((float(x), float(y)) for x, y in points)
    if len(pts) < 3:
        raise DataError(f"polygon for class {label} has {len(pts)} vertices; need at least 3")
    return LabelPolygon(label, pts)


def load_cube(manifest_path) -> SpectralCube:
    """Load a band stack from a JSON manifest.

    Manifest layout: ``{"width_hint"?: int, "bands": [{"band_id", "file",
    "wavelength_nm"?, "illumination"?, "filter_code"?}, ...]}``. Band files
    are resolved relative to the manifest and must decode as 8- or 16-bit
    grayscale PNG/TIFF of identical dimensions. Samples are scaled to [0, 1]
    by bit depth; band order follows the manifest.
    """
    path = Path(manifest_path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest is not valid JSON: {exc}") from exc

    entries = doc.get("bands")
    if not entries:
        raise DataError("manifest lists no bands")

    descriptors: list[BandDescriptor] = []
    planes: list[np.ndarray] = []
    seen_ids: set[str] = set()
    for entry in entries:
        band_id = str(entry.get("band_id") or entry.get("file"))
        if band_id in seen_ids:
            raise DataError(f"duplicate band_id {band_id!r} in manifest")
        seen_ids.add(band_id)
        wavelength = entry.get("wavelength_nm")
        if wavelength is not None and not wavelength > 0:
            raise DataError(f"band {band_id!r}: wavelength_nm must be positive")
        file_name = entry.get("file")
        if not file_name:
            raise DataError(f"band {band_id!r}: missing file")
        descriptors.append(
            BandDescriptor(
                band_id=band_id,
                file_name=file_name,
                wavelength_nm=None if wavelength is None else float(wavelength),
                illumination=entry.get("illumination"),
                filter_code=entry.get("filter_code"),
            )
        )
        planes.append(_read_band(path.parent / file_name, band_id))

    shapes = {plane.shape for plane in planes}
    if len(shapes) > 1:
        detail = ", ".join(
            f"{d.band_id}: {p.shape[1]}x{p.shape[0]}" for d, p in zip(descriptors, planes)
        )
        raise DataError(f"band dimensions differ: {detail}")

    samples = np.stack(planes, axis=-1)
    return SpectralCube(bands=descriptors, samples=samples)


def _read_band(file_path: Path, band_id: str) -> np.ndarray:
    if not file_path.is_file():
        raise DataError(f"band {band_id!r}: file not found: {file_path}")
    try:
        with Image.open(file_path) as img:
            mode = img.mode
            if mode not in _GRAY_MODES:
                raise DataError(
                    f"band {band_id!r}: expected 8/16-bit grayscale, got mode {mode!r}"
                )
            arr = np.asarray(img)
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"band {band_id!r}: cannot decode {file_path}: {exc}") from exc
    depth = _GRAY_MODES[mode]
    if mode == "I" and arr.max(initial=0) > 0xFFFF:
        raise DataError(f"band {band_id!r}: 32-bit samples exceed 16-bit range")
    return arr.astype(np.float64) / (2**depth - 1)


def write_cube(cube: SpectralCube, out_dir, bit_depth: int = 16, stem: str = "band") -> Path:
    """Write a cube as per-band PNGs plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scale = 2**bit_depth - 1
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    entries = []
    for i, band in enumerate(cube.bands):
        plane = np.floor(cube.samples[:, :, i] * scale + 0.5).astype(dtype)
        name = f"{stem}_{band.band_id}.png"
        pngio.write_png(out / name, plane, bit_depth)
        entry: dict = {"band_id": band.band_id, "file": name}
        if band.wavelength_nm is not None:
            entry["wavelength_nm"] = band.wavelength_nm
        if band.illumination is not None:
            entry["illumination"] = band.illumination
        if band.filter_code is not None:
            entry["filter_code"] = band.filter_code
        entries.append(entry)
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"bands": entries}, indent=2))
    return manifest


def normalize_band(
    cube: SpectralCube, band: int, mode: str = "minmax", p_lo: float = 2.0, p_hi: float = 98.0
) -> SpectralCube:
    """Return a new cube with one band remapped to [0, 1].

    Modes: ``minmax`` maps [min, max] to [0, 1]; ``zscore`` standardizes and
    maps mean to 0.5 with +/-3 sigma at the range ends (clamped); ``pclip``
    clips at the (p_lo, p_hi) percentiles then applies minmax. A constant
    band maps to all 0.5 under every mode so blank calibration bands do not
    abort batch runs.
    """
    if not 0 <= band < cube.n_bands:
        raise ConfigError(f"band index {band} out of range (cube has {cube.n_bands})")
    if mode == "pclip" and not (0 <= p_lo < p_hi <= 100):
        raise ConfigError(f"pclip percentiles out of order: ({p_lo}, {p_hi})")

    values = cube.samples[:, :, band]
    lo, hi = float(values.min()), float(values.max())
    if hi - lo == 0.0:
        plane = np.full_like(values, 0.5)
    elif mode == "minmax":
        plane = (values - lo) / (hi - lo)
    elif mode == "zscore":
        mu = float(values.mean())
        sigma = float(values.std())
        plane = np.clip((values - mu) / (6.0 * sigma) + 0.5, 0.0, 1.0)
    elif mode == "pclip":
        plo, phi = np.percentile(values, [p_lo, p_hi])
        if phi - plo == 0.0:
            plane = np.full_like(values, 0.5)
        else:
            plane = (np.clip(values, plo, phi) - plo) / (phi - plo)
    else:
        raise ConfigError(f"unknown normalization mode {mode!r}")

    samples = cube.samples.copy()
    samples[:, :, band] = plane
    return SpectralCube(bands=list(cube.bands), samples=samples)


def flatten(cube: SpectralCube, roi: tuple[int, int, int, int] | None = None) -> DesignMatrix:
    """Flatten a cube (or an (x, y, w, h) rectangle of it) to row-major spectra."""
    if roi is None:
        x0, y0, w, h = 0, 0, cube.width, cube.height
    else:
        x0, y0, w, h = (int(v) for v in roi)
        if w <= 0 or h <= 0:
            raise ConfigError(f"empty roi {roi}")
        if x0 < 0 or y0 < 0 or x0 + w > cube.width or y0 + h > cube.height:
            raise ConfigError(f"roi {roi} outside {cube.width}x{cube.height} image")

    block = cube.samples[y0 : y0 + h, x0 : x0 + w, :]
    values = block.reshape(w * h, cube.n_bands).astype(np.float64)
    xs, ys = np.meshgrid(np.arange(x0, x0 + w), np.arange(y0, y0 + h))
    pixel_index = np.stack([xs.ravel(), ys.ravel()], axis=1)
    return DesignMatrix(values=values, pixel_index=pixel_index)


def subsample(
    matrix: DesignMatrix, n: int, seed: int, stratify: LabelMask | None = None
) -> DesignMatrix:
    """Deterministic subsample of design-matrix rows.

    Without ``stratify``, rows are drawn uniformly without replacement from the
    generator seeded with ``seed``. With ``stratify``, rows are drawn as
    equally as possible per nonzero class (quota spread max-min <= 1, surplus
    redistributed from small classes); unlabeled rows are not drawn. Selected
    rows keep their original (row-major) order. ``n >= N`` returns the input
    unchanged.
    """
    if n < 1:
        raise ConfigError(f"subsample size must be >= 1, got {n}")
    total = matrix.n_rows
    if stratify is None:
        if n >= total:
            return matrix
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(total, size=n, replace=False))
        return DesignMatrix(matrix.values[chosen], matrix.pixel_index[chosen])

    labels = labels_for_rows(matrix, stratify)
    class_rows = {c: np.flatnonzero(labels == c) for c in sorted(set(labels.tolist())) if c != 0}
    if not class_rows:
        raise DataError("stratified subsample requested but no rows are labeled")
    labeled_total = sum(len(r) for r in class_rows.values())
    if n >= labeled_total:
        chosen = np.sort(np.concatenate(list(class_rows.values())))
        return DesignMatrix(matrix.values[chosen], matrix.pixel_index[chosen])

    quotas = _equal_quotas(n, {c: len(r) for c, r in class_rows.items()})
    rng = np.random.default_rng(seed)
    picks = []
    for c in sorted(class_rows):
        rows = class_rows[c]
        take = quotas[c]
        picks.append(rows if take >= len(rows) else rng.choice(rows, size=take, replace=False))
    chosen = np.sort(np.concatenate(picks))
    return DesignMatrix(matrix.values[chosen], matrix.pixel_index[chosen])


def _equal_quotas(n: int, sizes: dict[int, int]) -> dict[int, int]:
    # split n as equally as possible (max-min <= 1 among non-exhausted
    # classes), redistributing the surplus of small classes
    quotas = {c: 0 for c in sizes}
    remaining = n
    open_classes = [c for c in sorted(sizes) if sizes[c] > 0]
    while remaining > 0 and open_classes:
        share = max(remaining // len(open_classes), 1)
        for c in list(open_classes):
            if remaining == 0:
                break
            take = min(share, sizes[c] - quotas[c], remaining)
            quotas[c] += take
            remaining -= take
            if quotas[c] >= sizes[c]:
                open_classes.remove(c)
    return quotas


def labels_for_rows(matrix: DesignMatrix, mask: LabelMask) -> np.ndarray:
    """Class label of each design-matrix row, from its pixel coordinate."""
    xs = matrix.pixel_index[:, 0]
    ys = matrix.pixel_index[:, 1]
    if xs.max(initial=0) >= mask.width or ys.max(initial=0) >= mask.height:
        raise DataError(
            f"label mask {mask.width}x{mask.height} does not cover the design matrix pixels"
        )
    return mask.labels[ys, xs].astype(np.int64)


def rasterize_labels(polygons, width: int, height: int) -> LabelMask:
    """Rasterize operator polygons to a class mask.

    Even-odd fill rule against pixel centers; later polygons overwrite
    earlier ones; uncovered pixels stay 0.
    """
    if width < 1 or height < 1:
        raise ConfigError(f"mask dimensions must be positive, got {width}x{height}")
    mask = np.zeros((height, width), np.uint8)
    for poly in polygons:
        if isinstance(poly, LabelPolygon):
            poly = _validate_polygon(poly.label, poly.points)
        else:
            poly = _validate_polygon(poly[0], poly[1])
        inside = _even_odd_fill(poly.points, width, height)
        mask[inside] = poly.label
    return LabelMask(labels=mask)


def _even_odd_fill(points, width: int, height: int) -> np.ndarray:
    pts = np.asarray(points, np.float64)
    x_lo = max(int(np.floor(pts[:, 0].min())), 0)
    x_hi = min(int(np.ceil(pts[:, 0].max())), width)
    y_lo = max(int(np.floor(pts[:, 1].min())), 0)
    y_hi = min(int(np.ceil(pts[:, 1].max())), height)
    out = np.zeros((height, width), bool)
    if x_lo >= x_hi or y_lo >= y_hi:
        return out

    xc = np.arange(x_lo, x_hi) + 0.5
    yc = np.arange(y_lo, y_hi) + 0.5
    crossings = np.zeros((yc.size, xc.size), np.int64)
    x1, y1 = pts[:, 0], pts[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    for ax, ay, bx, by in zip(x1, y1, x2, y2):
        if ay == by:
            continue  # horizontal edges never cross a horizontal ray
        spans = (yc >= min(ay, by)) & (yc < max(ay, by))
        if not spans.any():
            continue
        # x of the edge at each spanned scanline; crossing iff strictly right
        # of the pixel center
        x_at = ax + (yc[spans] - ay) * (bx - ax) / (by - ay)
        crossings[spans] += (x_at[:, None] > xc[None, :]).astype(np.int64)
    out[y_lo:y_hi, x_lo:x_hi] = crossings % 2 == 1
    return out


def polygons_from_json(doc) -> list[LabelPolygon]:
    """Parse the labels JSON document into validated polygons."""
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    raw = doc.get("polygons", [])
    return [_validate_polygon(int(p["class"]), p["points"]) for p in raw]


def polygons_to_json(polygons) -> dict:
    return {
        "classes": {"1": "overtext", "2": "undertext", "3": "parchment"},
        "polygons": [
            {"class": p.label, "points": [[x, y] for x, y in p.points]} for p in polygons
        ],
    }


def load_labels(path, width: int, height: int) -> LabelMask:
    """Load labels from a polygon JSON file or a paletted/gray PNG mask."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"labels file not found: {path}")
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"labels file is not valid JSON: {exc}") from exc
        return rasterize_labels(polygons_from_json(doc), width, height)
    try:
        with Image.open(path) as img:
            if img.mode not in ("P", "L"):
                raise DataError(f"label mask must be paletted or 8-bit gray, got {img.mode!r}")
            arr = np.asarray(img)
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"cannot decode label mask {path}: {exc}") from exc
    if arr.shape != (height, width):
        raise DataError(
            f"label mask is {arr.shape[1]}x{arr.shape[0]}, image is {width}x{height}"
        )
    if arr.max(initial=0) > 3:
        raise DataError("label mask contains values above 3")
    return LabelMask(labels=arr.astype(np.uint8))


def write_mask_png(mask: LabelMask, path) -> None:
    """Write a mask as a paletted PNG with pixel values 0-3."""
    img = Image.fromarray(mask.labels, mode="P")
    palette = [0, 0, 0, 220, 40, 40, 40, 90, 220, 235, 220, 180]  # bg, over, under, parchment
    img.putpalette(palette + [0, 0, 0] * 252)
    img.save(path)
