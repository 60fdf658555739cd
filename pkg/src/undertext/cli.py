"""Command-line front door.

Subcommands: enhance (one method), batch (several methods + ranking),
threshold, score, synth (test fixture pages), serve (HTTP service). Options
can come from flags or a JSON config file (``--config``); flags win. Errors
print a machine-readable JSON object on stderr and exit 2 (config), 3
(data), or 4 (numeric failure).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import evalrank, render
from .cube import load_cube, load_labels, write_cube, write_mask_png
from .errors import ConfigError, DataError, NumericError, UndertextError
from .pipeline import ALL_METHODS, PipelineConfig, run_batch, run_single
from .threshold import ThresholdParams, apply_double_threshold, suggest_thresholds

_EXIT_CODES = {ConfigError: 2, DataError: 3, NumericError: 4}


def _fail(exc: UndertextError) -> None:
    code = 4
    for klass, value in _EXIT_CODES.items():
        if isinstance(exc, klass):
            code = value
            break
    doc = {"code": type(exc).__name__, "message": str(exc), "detail": None}
    click.echo(json.dumps(doc), err=True)
    sys.exit(code)


def _parse_pair(text: str, what: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(","))
    except ValueError:
        raise ConfigError(f"{what} must be two comma-separated numbers, got {text!r}")
    return lo, hi


def _parse_int_list(text: str | None) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(p) for p in text.split(",") if p.strip() != ""]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}")


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")


def _build_config(cfg_file: dict, **flags) -> PipelineConfig:
    merged = dict(cfg_file)
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    if "manifest" not in merged:
        raise ConfigError("a manifest is required (flag --manifest or config file)")
    method_params = dict(merged.get("params", {}))
    for key in ("k", "landmarks", "selection", "lambda_rel", "kernel", "gamma",
                "max_iter", "tol", "step_init", "jitter"):
        if merged.get(key) is not None:
            method_params[key] = merged.pop(key)
    stretch = merged.get("stretch", (2.0, 98.0))
    if isinstance(stretch, str):
        stretch = _parse_pair(stretch, "--stretch")
    config = PipelineConfig(
        manifest=str(merged["manifest"]),
        labels=merged.get("labels"),
        method=merged.get("method", "pca"),
        q=int(merged.get("q", 3)),
        params=method_params,
        band_subset=merged.get("band_subset"),
        caps={k: int(v) for k, v in dict(merged.get("caps", {})).items()},
        seed=int(merged.get("seed", 0)),
        out_dir=str(merged.get("out_dir", "out")),
        stretch=(float(stretch[0]), float(stretch[1])),
        invert=bool(merged.get("invert", False)),
        largest_component=bool(merged.get("largest_component", False)),
        supervised_classes=tuple(merged.get("supervised_classes", (1, 2))),
        score_classes=tuple(merged.get("score_classes", (1, 2))),
        export_bit_depth=int(merged.get("export_bit_depth", 8)),
        page=merged.get("page"),
    )
    return config


def _common_options(fn):
    options = [
        click.option("--manifest", type=str, default=None, help="Band manifest JSON."),
        click.option("--labels", type=str, default=None, help="Labels JSON or mask PNG."),
        click.option("--q", type=int, default=None, help="Target dimensionality."),
        click.option("--k", type=int, default=None, help="Neighborhood size (isomap variants)."),
        click.option("--landmarks", type=int, default=None, help="Landmark count (l-isomap)."),
        click.option("--selection", type=click.Choice(["maxmin", "random"]), default=None),
        click.option("--lambda-rel", "lambda_rel", type=float, default=None),
        click.option("--kernel", type=click.Choice(["rbf", "linear"]), default=None),
        click.option("--gamma", type=float, default=None),
        click.option("--max-iter", "max_iter", type=int, default=None),
        click.option("--tol", type=float, default=None),
        click.option("--step-init", "step_init", type=float, default=None),
        click.option("--jitter", type=float, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--out-dir", "out_dir", type=str, default=None),
        click.option("--stretch", type=str, default=None, help="Percentiles, e.g. 2,98."),
        click.option("--invert", is_flag=True, default=None),
        click.option("--largest-component", "largest_component", is_flag=True, default=None),
        click.option("--band-subset", "band_subset", type=str, default=None),
        click.option("--bit-depth", "export_bit_depth", type=click.Choice(["8", "16"]), default=None),
        click.option("--page", type=str, default=None),
        click.option("--config", "config_path", type=str, default=None, help="JSON config file."),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Palimpsest undertext enhancement toolkit."""


@main.command()
@_common_options
@click.option("--method", type=click.Choice(list(ALL_METHODS)), default=None)
def enhance(config_path, band_subset, export_bit_depth, **flags):
    """Run one embedding method over a page and export the image."""
    try:
        flags["band_subset"] = _parse_int_list(band_subset)
        if export_bit_depth is not None:
            flags["export_bit_depth"] = int(export_bit_depth)
        config = _build_config(_load_config_file(config_path), **flags)
        result = run_single(config)
        click.echo(json.dumps({"image": str(result.image_path), **result.entry}))
    except UndertextError as exc:
        _fail(exc)


@main.command()
@_common_options
@click.option("--methods", type=str, default="all8", help='"all8" or a comma list.')
@click.option("--jobs", type=int, default=1)
def batch(config_path, band_subset, export_bit_depth, methods, jobs, **flags):
    """Run several methods and write a ranking report."""
    try:
        flags["band_subset"] = _parse_int_list(band_subset)
        if export_bit_depth is not None:
            flags["export_bit_depth"] = int(export_bit_depth)
        config = _build_config(_load_config_file(config_path), **flags)
        method_list = "all8" if methods == "all8" else [m.strip() for m in methods.split(",")]
        report, failed = run_batch(config, method_list, jobs=jobs)
        click.echo(json.dumps(report, indent=2, sort_keys=True))
        if failed:
            sys.exit(4)
    except UndertextError as exc:
        _fail(exc)


@main.command()
@click.option("--image", "image_path", type=str, default=None, help="1-channel PNG to threshold.")
@click.option("--manifest", type=str, default=None)
@click.option("--band", type=int, default=None, help="Band index when using --manifest.")
@click.option("--t1", type=float, default=None)
@click.option("--t2", type=float, default=None)
@click.option("--alpha", type=float, default=0.5)
@click.option("--labels", type=str, default=None)
@click.option("--suggest", is_flag=True, help="Print suggested params from labels and exit.")
@click.option("--out", "out_path", type=str, default=None)
@click.option("--bit-depth", "bit_depth", type=click.Choice(["8", "16"]), default="8")
def threshold(image_path, manifest, band, t1, t2, alpha, labels, suggest, out_path, bit_depth):
    """Apply (or suggest) the double-threshold enhancement."""
    try:
        plane, width, height = _resolve_plane(image_path, manifest, band)
        if suggest or t1 is None or t2 is None:
            if labels is None:
                raise ConfigError("--suggest (or omitted thresholds) requires --labels")
            mask = load_labels(labels, width, height)
            params = suggest_thresholds(plane, mask)
            if suggest:
                click.echo(json.dumps({"t1": params.t1, "t2": params.t2, "alpha": params.alpha}))
                return
        else:
            params = ThresholdParams(t1=t1, t2=t2, alpha=alpha)
        result = apply_double_threshold(plane, params)
        if out_path is None:
            raise ConfigError("--out is required to write the thresholded image")
        provenance = {
            "operation": "double_threshold",
            "t1": params.t1,
            "t2": params.t2,
            "alpha": params.alpha,
            "source": image_path or f"{manifest}#band{band}",
        }
        image = render.EnhancedImage(planes=result[:, :, None], provenance=provenance)
        render.export_png(image, out_path, int(bit_depth))
        click.echo(json.dumps({"image": out_path, **{k: provenance[k] for k in ("t1", "t2", "alpha")}}))
    except UndertextError as exc:
        _fail(exc)


def _resolve_plane(image_path, manifest, band):
    if image_path is not None:
        img = render.import_png(image_path)
        if img.n_channels != 1:
            raise ConfigError("threshold needs a single-channel image")
        return img.planes[:, :, 0], img.width, img.height
    if manifest is not None:
        if band is None:
            raise ConfigError("--band is required with --manifest")
        cube = load_cube(manifest)
        plane = cube.band_plane(band)
        return plane, cube.width, cube.height
    raise ConfigError("provide --image or --manifest with --band")


@main.command()
@click.option("--image", "image_path", type=str, required=True)
@click.option("--labels", type=str, required=True)
@click.option("--classes", type=str, default="1,2")
def score(image_path, labels, classes):
    """Fisher separability of an exported image against labels."""
    try:
        img = render.import_png(image_path)
        mask = load_labels(labels, img.width, img.height)
        a, b = (int(c) for c in classes.split(","))
        result = evalrank.fisher_score(img.planes, mask, classes=(a, b))
        click.echo(
            json.dumps(
                {
                    "metric": "fisher",
                    "note": evalrank.METRIC_NOTE,
                    "per_channel": result.per_channel,
                    "best": result.best,
                    "best_channel": result.best_channel,
                    "pixel_counts": result.counts,
                }
            )
        )
    except UndertextError as exc:
        _fail(exc)


@main.command()
@click.option("--out-dir", "out_dir", type=str, required=True)
@click.option("--width", type=int, default=120)
@click.option("--height", type=int, default=90)
@click.option("--bands", "n_bands", type=int, default=6)
@click.option("--sigma", type=float, default=0.05)
@click.option("--overlap", type=float, default=0.3)
@click.option("--seed", type=int, default=7)
@click.option("--bit-depth", "bit_depth", type=click.Choice(["8", "16"]), default="16")
def synth(out_dir, width, height, n_bands, sigma, overlap, seed, bit_depth):
    """Write a synthetic palimpsest page with ground-truth labels."""
    try:
        if n_bands != 6:
            raise ConfigError("the built-in class spectra are 6-band; use --bands 6")
        spec = evalrank.SyntheticSpec(
            width=width, height=height, n_bands=n_bands, noise_sigma=sigma, overlap=overlap
        )
        cube, mask = evalrank.synth_palimpsest(spec, seed)
        out = Path(out_dir)
        manifest = write_cube(cube, out, bit_depth=int(bit_depth))
        write_mask_png(mask, out / "labels.png")
        counts = {str(k): v for k, v in mask.class_counts().items()}
        click.echo(
            json.dumps({"manifest": str(manifest), "labels": str(out / "labels.png"), "counts": counts})
        )
    except UndertextError as exc:
        _fail(exc)


@main.command()
@click.option("--port", type=int, default=8077)
@click.option("--host", type=str, default="127.0.0.1")
@click.option("--out-dir", "out_dir", type=str, default=None)
@click.option("--multi-session", "multi_session", is_flag=True, default=False)
def serve(port, host, out_dir, multi_session):
    """Launch the local HTTP service for the browser workbench."""
    import uvicorn

    from .service import create_app

    app = create_app(out_dir=out_dir, multi_session=multi_session)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
