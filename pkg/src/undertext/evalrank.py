"""Separability scoring, method ranking, and the synthetic palimpsest
fixture used for testing and demos.

The ranking metric is the two-class Fisher criterion
``J = (mu_a - mu_b)^2 / (var_a + var_b + eps)`` with population variances
(the labeled regions are treated as full populations). J is invariant under
positive affine channel transforms, so display choices (stretch percentiles,
inversion) cannot reorder methods.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cube import BandDescriptor, LabelMask, SpectralCube
from .errors import ConfigError, DataError

FISHER_EPS = 1e-12
FISHER_CAP = 1e12

METRIC_NOTE = (
    "ranking by two-class fisher separability (population-variance convention), "
    "an automated stand-in for visual side-by-side inspection"
)


@dataclass
class FisherResult:
    per_channel: list[float]
    best: float
    best_channel: int
    counts: dict[int, int]


def fisher_score(values: np.ndarray, labels: LabelMask, classes=(1, 2)) -> FisherResult:
    """Fisher separability of each channel between two labeled classes.

    ``values`` is (H, W) or (H, W, C) aligned with the mask. Scores are
    capped at 1e12 (the zero-variance, perfectly-separated case).
    """
    v = np.asarray(values, np.float64)
    if v.ndim == 2:
        v = v[:, :, None]
    if v.shape[:2] != labels.labels.shape:
        raise DataError(
            f"values {v.shape[:2]} and label mask {labels.labels.shape} dimensions differ"
        )
    a, b = classes
    mask_a = labels.labels == a
    mask_b = labels.labels == b
    if not mask_a.any():
        raise DataError(f"class {a} has no labeled pixels")
    if not mask_b.any():
        raise DataError(f"class {b} has no labeled pixels")

    scores = []
    for c in range(v.shape[2]):
        va = v[:, :, c][mask_a]
        vb = v[:, :, c][mask_b]
        j = (va.mean() - vb.mean()) ** 2 / (va.var() + vb.var() + FISHER_EPS)
        scores.append(float(min(j, FISHER_CAP)))
    best_channel = int(np.argmax(scores))
    return FisherResult(
        per_channel=scores,
        best=scores[best_channel],
        best_channel=best_channel,
        counts={int(a): int(mask_a.sum()), int(b): int(mask_b.sum())},
    )


def rank_methods(entries: list[tuple[str, float]]) -> list[str]:
    """Method names by descending score; ties break lexicographically."""
    if not entries:
        raise ConfigError("rank_methods needs at least one entry")
    return [name for name, _ in sorted(entries, key=lambda e: (-e[1], e[0]))]


# ---------------------------------------------------------------------------
# Synthetic palimpsest

# Default class spectra (rows: parchment, overtext, undertext). Both inks
# are dark against the parchment; the undertext is fainter overall and the
# two inks differ only in the first three bands, which puts the ink
# difference at ~45 degrees to the dominant parchment-vs-ink brightness axis
# (so no single variance-ranked component can align with it).
DEFAULT_SPECTRA = np.array(
    [
        [0.80, 0.78, 0.76, 0.79, 0.77, 0.81],  # parchment
        [0.27, 0.25, 0.23, 0.32, 0.30, 0.34],  # overtext ink
        [0.39, 0.37, 0.35, 0.32, 0.30, 0.34],  # undertext ink
    ]
)


@dataclass
class SyntheticSpec:
    width: int = 120
    height: int = 90
    n_bands: int = 6
    class_spectra: np.ndarray = field(default_factory=lambda: DEFAULT_SPECTRA.copy())
    noise_sigma: float = 0.05
    overlap: float = 0.3
    layout_seed: int | None = None  # None: reuse the render seed for geometry

    def __post_init__(self):
        spectra = np.asarray(self.class_spectra, np.float64)
        if spectra.shape != (3, self.n_bands):
            raise ConfigError(
                f"class_spectra must be 3x{self.n_bands}, got {spectra.shape}"
            )
        if spectra.min() < 0 or spectra.max() > 1:
            raise ConfigError("class spectra must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise ConfigError("noise sigma must be >= 0")
        if not 0 <= self.overlap <= 1:
            raise ConfigError("overlap fraction must lie in [0, 1]")
        self.class_spectra = spectra


def synth_palimpsest(spec: SyntheticSpec, seed: int, return_layers: bool = False):
    """Render a synthetic page with ground-truth labels.

    Undertext strokes are drawn first; overtext strokes that would cross them
    are kept with probability ``overlap`` (so overlap 0 means no shared
    pixel) and occlude the undertext where they land. Every pixel gets its
    topmost class spectrum plus iid zero-mean gaussian noise, clipped to
    [0, 1]. Deterministic given the seed. ``return_layers`` additionally
    returns the raw per-text stroke masks (before occlusion) for tests.
    """
    layout_rng = np.random.default_rng(spec.layout_seed if spec.layout_seed is not None else seed)
    noise_rng = np.random.default_rng(seed + 1)
    w, h = spec.width, spec.height

    stroke_budget = max(6, (w * h) // 900)
    under = _draw_strokes(layout_rng, w, h, stroke_budget, slant=(-0.25, 0.25))
    over = _draw_strokes(
        layout_rng,
        w,
        h,
        stroke_budget,
        slant=(0.9, 1.6),
        avoid=under,
        keep_probability=spec.overlap,
    )

    labels = np.full((h, w), 3, np.uint8)  # parchment background
    labels[under] = 2
    labels[over] = 1  # overtext occludes undertext

    label_to_row = np.array([0, 1, 2, 0])  # class 1 -> overtext row, 2 -> undertext, 3 -> parchment
    samples = spec.class_spectra[label_to_row[labels]]
    if spec.noise_sigma > 0:
        samples = samples + noise_rng.normal(0.0, spec.noise_sigma, samples.shape)
        samples = np.clip(samples, 0.0, 1.0)

    bands = [
        BandDescriptor(band_id=f"b{i:02d}", file_name=f"band_b{i:02d}.png")
        for i in range(spec.n_bands)
    ]
    cube = SpectralCube(bands=bands, samples=samples)
    mask = LabelMask(labels=labels)
    if return_layers:
        return cube, mask, {"undertext": under, "overtext": over}
    return cube, mask


def _draw_strokes(
    rng: np.random.Generator,
    width: int,
    height: int,
    count: int,
    slant: tuple[float, float],
    avoid: np.ndarray | None = None,
    keep_probability: float = 1.0,
) -> np.ndarray:
    """Thick pseudo-glyph segments; colliding strokes kept with the given
    probability (resampled otherwise), bounded attempts keep it terminating."""
    mask = np.zeros((height, width), bool)
    made = 0
    attempts = 0
    max_attempts = count * 40
    diag = np.hypot(width, height)
    while made < count and attempts < max_attempts:
        attempts += 1
        x0 = rng.uniform(0, width)
        y0 = rng.uniform(0, height)
        angle = rng.uniform(*slant)
        length = rng.uniform(0.08, 0.22) * diag
        thickness = rng.uniform(1.2, 2.6)
        stroke = _segment_mask(x0, y0, angle, length, thickness, width, height)
        if not stroke.any():
            continue
        if avoid is not None and (stroke & avoid).any():
            if rng.random() >= keep_probability:
                continue
        mask |= stroke
        made += 1
    return mask


def _segment_mask(
    x0: float, y0: float, angle: float, length: float, thickness: float, width: int, height: int
) -> np.ndarray:
    x1 = x0 + np.cos(angle) * length
    y1 = y0 + np.sin(angle) * length
    half = thickness / 2.0
    lo_x = max(int(np.floor(min(x0, x1) - half)) - 1, 0)
    hi_x = min(int(np.ceil(max(x0, x1) + half)) + 1, width)
    lo_y = max(int(np.floor(min(y0, y1) - half)) - 1, 0)
    hi_y = min(int(np.ceil(max(y0, y1) + half)) + 1, height)
    out = np.zeros((height, width), bool)
    if lo_x >= hi_x or lo_y >= hi_y:
        return out

    xs = np.arange(lo_x, hi_x) + 0.5
    ys = np.arange(lo_y, hi_y) + 0.5
    px, py = np.meshgrid(xs, ys)
    dx, dy = x1 - x0, y1 - y0
    seg_len_sq = dx * dx + dy * dy
    if seg_len_sq == 0:
        dist = np.hypot(px - x0, py - y0)
    else:
        t = np.clip(((px - x0) * dx + (py - y0) * dy) / seg_len_sq, 0.0, 1.0)
        dist = np.hypot(px - (x0 + t * dx), py - (y0 + t * dy))
    out[lo_y:hi_y, lo_x:hi_x] = dist <= half
    return out
