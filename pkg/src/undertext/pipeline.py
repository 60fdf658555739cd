"""Batch pipeline: load a page, fit a method on a capped subsample, project
every pixel, render, export, and score.

``run_enhance`` is the in-memory core shared by the CLI and the HTTP
service, which is what makes their outputs byte-identical for identical
configurations.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import evalrank, render
from .cube import (
    DesignMatrix,
    LabelMask,
    SpectralCube,
    flatten,
    labels_for_rows,
    load_cube,
    load_labels,
    subsample,
)
from .dimred import (
    KernelSpec,
    gda_fit,
    gda_project,
    gplvm_fit,
    gplvm_project,
    isomap_embed,
    isomap_project,
    landmark_isomap_embed,
    lda_fit,
    lda_project,
    nca_fit,
    nca_project,
    pca_fit,
    ppca_fit,
    project_linear,
)
from .errors import ConfigError, DataError, UndertextError

ALL_METHODS = ("pca", "ppca", "gplvm", "isomap", "l-isomap", "lda", "gda", "nca")
SUPERVISED_METHODS = frozenset({"lda", "gda", "nca"})

DEFAULT_CAPS = {
    "pca": 100_000,
    "ppca": 100_000,
    "lda": 100_000,
    "gda": 2_000,
    "nca": 1_000,
    "gplvm": 500,
    "isomap": 2_000,
    "l-isomap": 2_000,
}

# knobs each method accepts through PipelineConfig.params
_KNOWN_PARAMS = {
    "pca": set(),
    "ppca": {"tol", "max_iter"},
    "gplvm": {"max_iter", "jitter"},
    "isomap": {"k"},
    "l-isomap": {"k", "landmarks", "selection"},
    "lda": {"lambda_rel"},
    "gda": {"lambda_rel", "kernel", "gamma"},
    "nca": {"max_iter", "step_init"},
}


@dataclass
class PipelineConfig:
    manifest: str
    labels: str | None = None
    method: str = "pca"
    q: int = 3
    params: dict = field(default_factory=dict)
    band_subset: list[int] | None = None
    caps: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "out"
    stretch: tuple[float, float] = (2.0, 98.0)
    invert: bool = False
    largest_component: bool = False
    supervised_classes: tuple[int, ...] = (1, 2)
    score_classes: tuple[int, int] = (1, 2)
    export_bit_depth: int = 8
    page: str | None = None

    def page_name(self) -> str:
        return self.page or Path(self.manifest).parent.name or "page"

    def cap_for(self, method: str) -> int:
        return int(self.caps.get(method, DEFAULT_CAPS[method]))

    def validate(self, require_labels_path: bool = True) -> None:
        if self.method not in ALL_METHODS and self.method != "threshold":
            raise ConfigError(f"unknown method {self.method!r}; choose from {ALL_METHODS}")
        if require_labels_path and self.method in SUPERVISED_METHODS and not self.labels:
            raise ConfigError(f"method {self.method!r} is supervised and requires --labels")
        if self.q < 1:
            raise ConfigError(f"q must be >= 1, got {self.q}")
        if self.export_bit_depth not in (8, 16):
            raise ConfigError("export bit depth must be 8 or 16")
        lo, hi = self.stretch
        if not 0 <= lo < hi <= 100:
            raise ConfigError(f"stretch percentiles out of order: {self.stretch}")
        # one config may drive a whole batch, so params are validated against
        # the union across methods; each method picks out the knobs it uses
        known = set().union(*_KNOWN_PARAMS.values())
        unknown = set(self.params) - known
        if unknown:
            raise ConfigError(f"unknown parameters: {sorted(unknown)}")

    def canonical(self) -> dict:
        """Stable dict of everything that influences the output bytes.

        Labels enter by content digest (added in run_enhance), not by path,
        so a CLI run from a labels file and a service run from submitted
        polygons fingerprint identically when the rasterized masks match.
        """
        return {
            "manifest": str(self.manifest),
            "method": self.method,
            "q": self.q,
            "params": {k: self.params[k] for k in sorted(self.params)},
            "band_subset": self.band_subset,
            "caps": {m: self.cap_for(m) for m in ALL_METHODS},
            "seed": self.seed,
            "stretch": list(self.stretch),
            "invert": self.invert,
            "largest_component": self.largest_component,
            "supervised_classes": list(self.supervised_classes),
            "score_classes": list(self.score_classes),
            "export_bit_depth": self.export_bit_depth,
            "page": self.page_name(),
        }


@dataclass
class RunResult:
    image_path: Path | None
    image: render.EnhancedImage
    entry: dict
    model: object
    raw_channels: np.ndarray  # (H, W, C) pre-stretch embedding components
    fingerprint: str = ""


def labels_digest(labels: LabelMask | None) -> str | None:
    if labels is None:
        return None
    blob = f"{labels.width}x{labels.height}:".encode() + labels.labels.tobytes()
    return hashlib.sha256(blob).hexdigest()[:16]


def config_fingerprint(config: PipelineConfig, labels: LabelMask | None) -> str:
    doc = {**config.canonical(), "labels_digest": labels_digest(labels)}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:12]


def apply_band_subset(cube: SpectralCube, subset: list[int] | None) -> SpectralCube:
    if subset is None:
        return cube
    if not subset:
        raise ConfigError("band subset must not be empty")
    for b in subset:
        if not 0 <= b < cube.n_bands:
            raise ConfigError(f"band subset index {b} out of range (cube has {cube.n_bands})")
    return SpectralCube(
        bands=[cube.bands[b] for b in subset], samples=cube.samples[:, :, list(subset)]
    )


def effective_q(method: str, q: int, n_classes: int, n_bands: int, n_fit: int) -> int:
    """Clamp q to the method's structural limit; recorded in provenance."""
    limit = {
        "pca": min(n_fit - 1, n_bands),
        "ppca": n_bands - 1,
        "gplvm": q,
        "isomap": q,
        "l-isomap": q,
        "lda": max(n_classes - 1, 1),
        "gda": max(n_classes - 1, 1),
        "nca": n_bands,
    }[method]
    return max(1, min(q, limit))


def _fit_and_project(
    method: str,
    config: PipelineConfig,
    fit_matrix: DesignMatrix,
    fit_labels: np.ndarray | None,
    full: DesignMatrix,
):
    p = config.params
    q = effective_q(
        method,
        config.q,
        0 if fit_labels is None else len(set(fit_labels.tolist())),
        fit_matrix.n_cols,
        fit_matrix.n_rows,
    )
    if method == "pca":
        model = pca_fit(fit_matrix, q)
        return model, project_linear(model, full), q
    if method == "ppca":
        model = ppca_fit(
            fit_matrix, q, tol=p.get("tol", 1e-7), max_iter=int(p.get("max_iter", 500))
        )
        return model, project_linear(model, full), q
    if method == "gplvm":
        model = gplvm_fit(
            fit_matrix,
            q,
            max_iter=int(p.get("max_iter", 200)),
            jitter=p.get("jitter", 1e-8),
            seed=config.seed,
            cap=config.cap_for("gplvm"),
        )
        return model, gplvm_project(model, full), q
    if method == "isomap":
        model = isomap_embed(
            fit_matrix,
            k=int(p.get("k", 12)),
            q=q,
            cap=config.cap_for("isomap"),
            allow_largest_component=config.largest_component,
        )
        return model, isomap_project(model, full), q
    if method == "l-isomap":
        n_fit = fit_matrix.n_rows
        default_landmarks = max(q + 1, min(n_fit, max(n_fit // 10, 50)))
        model = landmark_isomap_embed(
            fit_matrix,
            k=int(p.get("k", 12)),
            q=q,
            n_landmarks=int(p.get("landmarks", default_landmarks)),
            selection=p.get("selection", "maxmin"),
            seed=config.seed,
            cap=config.cap_for("l-isomap"),
            allow_largest_component=config.largest_component,
        )
        return model, isomap_project(model, full), q
    if method == "lda":
        model = lda_fit(fit_matrix, fit_labels, q, lambda_rel=p.get("lambda_rel", 1e-3))
        return model, lda_project(model, full), q
    if method == "gda":
        kernel = KernelSpec(kind=p.get("kernel", "rbf"), gamma=p.get("gamma"))
        model = gda_fit(
            fit_matrix,
            fit_labels,
            q,
            kernel=kernel,
            lambda_rel=p.get("lambda_rel", 1e-3),
            cap=config.cap_for("gda"),
        )
        return model, gda_project(model, full), q
    if method == "nca":
        model = nca_fit(
            fit_matrix,
            fit_labels,
            q,
            max_iter=int(p.get("max_iter", 60)),
            step_init=p.get("step_init", 1.0),
            seed=config.seed,
            cap=config.cap_for("nca"),
        )
        return model, nca_project(model, full), q
    raise ConfigError(f"unknown method {method!r}")


def run_enhance(
    cube: SpectralCube, labels: LabelMask | None, config: PipelineConfig, write: bool = True
) -> RunResult:
    """Fit -> project -> compose -> (optionally) export one method."""
    config.validate(require_labels_path=False)
    method = config.method
    if method in SUPERVISED_METHODS and labels is None:
        raise ConfigError(f"method {method!r} is supervised and requires labels")
    fingerprint = config_fingerprint(config, labels)
    cube = apply_band_subset(cube, config.band_subset)
    full = flatten(cube)

    if method in SUPERVISED_METHODS:
        if labels is None:
            raise ConfigError(f"method {method!r} is supervised and requires labels")
        fit_matrix, fit_labels = _supervised_training_set(
            full, labels, config.supervised_classes, config.cap_for(method), config.seed
        )
    else:
        # unsupervised fits sample the page uniformly so their output never
        # depends on whether labels were drawn
        fit_matrix = subsample(full, config.cap_for(method), config.seed)
        fit_labels = None

    model, embedding, q_eff = _fit_and_project(method, config, fit_matrix, fit_labels, full)

    channels = list(range(min(q_eff, 3)))
    provenance = {
        "config": config.canonical(),
        "labels_digest": labels_digest(labels),
        "effective_q": q_eff,
        "method": method,
        "params_hash": fingerprint,
    }
    image = render.compose(
        embedding.values,
        full.pixel_index,
        cube.width,
        cube.height,
        channels=channels,
        p_lo=config.stretch[0],
        p_hi=config.stretch[1],
        invert=config.invert,
        provenance=provenance,
    )

    raw = np.zeros((cube.height, cube.width, len(channels)))
    flat = full.pixel_index[:, 1].astype(np.int64) * cube.width + full.pixel_index[:, 0]
    for out_c, comp in enumerate(channels):
        plane = np.zeros(cube.width * cube.height)
        plane[flat] = embedding.values[:, comp]
        raw[:, :, out_c] = plane.reshape(cube.height, cube.width)

    entry: dict = {"method": method, "params_hash": fingerprint}
    if labels is not None:
        fisher = evalrank.fisher_score(raw, labels, classes=config.score_classes)
        entry["score"] = fisher.best
        entry["channel"] = fisher.best_channel
        entry["pixel_counts"] = fisher.counts

    image_path = None
    if write:
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        image_path = out_dir / f"{config.page_name()}_{method}_{fingerprint}.png"
        write_image_atomic(image, image_path, config.export_bit_depth)
    return RunResult(
        image_path=image_path,
        image=image,
        entry=entry,
        model=model,
        raw_channels=raw,
        fingerprint=fingerprint,
    )


def _supervised_training_set(
    full: DesignMatrix,
    labels: LabelMask,
    classes: tuple[int, ...],
    cap: int,
    seed: int,
) -> tuple[DesignMatrix, np.ndarray]:
    row_labels = labels_for_rows(full, labels)
    keep = np.isin(row_labels, list(classes))
    present = sorted(set(row_labels[keep].tolist()))
    if len(present) < 2:
        raise DataError(
            f"supervised fit needs at least 2 labeled classes among {list(classes)}, "
            f"found {present}"
        )
    picked = DesignMatrix(full.values[keep], full.pixel_index[keep])
    restricted = LabelMask(labels=np.where(np.isin(labels.labels, list(classes)), labels.labels, 0).astype(np.uint8))
    picked = subsample(picked, cap, seed, stratify=restricted)
    return picked, labels_for_rows(picked, labels)


def write_image_atomic(image: render.EnhancedImage, path: Path, bit_depth: int) -> None:
    """Temp file + rename so concurrent runs never interleave partial files."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    try:
        render.export_png(image, tmp, bit_depth)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_json_atomic(doc: dict, path: Path) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def run_single(config: PipelineConfig, write: bool = True) -> RunResult:
    """File-path front end for one method: load inputs, then run_enhance."""
    config.validate()
    cube = load_cube(config.manifest)
    labels = None
    if config.labels:
        labels = load_labels(config.labels, cube.width, cube.height)
    return run_enhance(cube, labels, config, write=write)


def _batch_worker(args) -> tuple[str, dict | None, str | None, str | None]:
    config, method = args
    try:
        result = run_single(replace(config, method=method))
        return method, result.entry, str(result.image_path), None
    except UndertextError as exc:
        return method, None, None, f"{type(exc).__name__}: {exc}"


def run_batch(
    config: PipelineConfig, methods: list[str] | str = "all8", jobs: int = 1
) -> tuple[dict, bool]:
    """Run several methods over one page; returns (report, any_failures).

    Individual method failures are recorded in the report and do not stop
    the batch. The report carries the fisher entries, the ranking, and the
    metric note.
    """
    if methods == "all8":
        method_list = list(ALL_METHODS)
    else:
        method_list = list(methods)
        for m in method_list:
            if m not in ALL_METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {ALL_METHODS}")
    if not config.labels:
        raise ConfigError("batch runs need labels for scoring and the supervised methods")

    tasks = [(config, m) for m in method_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_batch_worker, tasks))
    else:
        outcomes = [_batch_worker(t) for t in tasks]

    entries = []
    errors = {}
    for method, entry, image_path, error in outcomes:
        if error is not None:
            errors[method] = error
        else:
            entry = dict(entry)
            entry["image"] = image_path
            entries.append(entry)

    scored = [(e["method"], e["score"]) for e in entries if "score" in e]
    ranking = evalrank.rank_methods(scored) if scored else []
    report = {
        "page": config.page_name(),
        "metric": "fisher",
        "note": evalrank.METRIC_NOTE,
        "score_classes": list(config.score_classes),
        "entries": entries,
        "ranking": ranking,
        "errors": errors,
    }
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json_atomic(report, out_dir / f"{config.page_name()}_report.json")
    return report, bool(errors)
