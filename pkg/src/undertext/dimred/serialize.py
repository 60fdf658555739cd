"""Versioned JSON serialization for fitted models.

Matrices are stored as nested lists; Python's float repr round-trips every
finite double through base-10, so a deserialize(serialize(model)) is
bit-exact. The envelope is ``{"format": "undertext-model", "version": 1,
"method": ..., "payload": {...}}``.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import DataError
from .gplvm import GplvmModel
from .linear import LinearModel
from .manifold import IsomapModel
from .supervised import GdaModel, KernelSpec, LdaModel, NcaModel

FORMAT = "undertext-model"
VERSION = 1


def _arr(a: np.ndarray) -> list:
    return np.asarray(a, np.float64).tolist()


def _np(v, dtype=np.float64) -> np.ndarray:
    return np.asarray(v, dtype)


def model_to_json(model) -> str:
    kind, payload = _encode(model)
    doc = {"format": FORMAT, "version": VERSION, "method": kind, "payload": payload}
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str):
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise DataError("not an undertext model document")
    if doc.get("version") != VERSION:
        raise DataError(f"unsupported model version {doc.get('version')}")
    return _decode(doc["method"], doc["payload"])


def _encode(model) -> tuple[str, dict]:
    if isinstance(model, LinearModel):
        return "linear", {
            "mean": _arr(model.mean),
            "components": _arr(model.components),
            "eigenvalues": _arr(model.eigenvalues),
            "noise_variance": model.noise_variance,
            "converged": model.converged,
        }
    if isinstance(model, IsomapModel):
        return "isomap", {
            "training_points": _arr(model.training_points),
            "landmark": model.landmark,
            "landmark_indices": model.landmark_indices.tolist(),
            "geodesic": _arr(model.geodesic),
            "embedding": _arr(model.embedding),
            "eigenvalues": _arr(model.eigenvalues),
            "eigenvectors": _arr(model.eigenvectors),
            "delta_mean": _arr(model.delta_mean),
            "k": model.k,
            "q": model.q,
            "dropped_indices": model.dropped_indices.tolist(),
        }
    if isinstance(model, GplvmModel):
        return "gplvm", {
            "latent": _arr(model.latent),
            "signal_variance": model.signal_variance,
            "inv_lengthscale": model.inv_lengthscale,
            "noise_variance": model.noise_variance,
            "training_outputs": _arr(model.training_outputs),
            "objective": model.objective,
            "objective_init": model.objective_init,
        }
    if isinstance(model, LdaModel):
        return "lda", {
            "classes": model.classes,
            "class_means": _arr(model.class_means),
            "within_scatter": _arr(model.within_scatter),
            "between_scatter": _arr(model.between_scatter),
            "shrinkage": model.shrinkage,
            "directions": _arr(model.directions),
            "eigenvalues": _arr(model.eigenvalues),
            "global_mean": _arr(model.global_mean),
            "degenerate": model.degenerate,
        }
    if isinstance(model, GdaModel):
        return "gda", {
            "training_points": _arr(model.training_points),
            "kernel": {"kind": model.kernel.kind, "gamma": model.kernel.gamma},
            "dual_coef": _arr(model.dual_coef),
            "row_means": _arr(model.row_means),
            "grand_mean": model.grand_mean,
            "regularization": model.regularization,
            "eigenvalues": _arr(model.eigenvalues),
            "classes": model.classes,
        }
    if isinstance(model, NcaModel):
        return "nca", {
            "transform": _arr(model.transform),
            "objective_trace": model.objective_trace,
            "n_training": model.n_training,
            "seed": model.seed,
            "step_init": model.step_init,
            "step_final": model.step_final,
        }
    raise DataError(f"cannot serialize model of type {type(model).__name__}")


def _decode(kind: str, p: dict):
    if kind == "linear":
        return LinearModel(
            mean=_np(p["mean"]),
            components=_np(p["components"]),
            eigenvalues=_np(p["eigenvalues"]),
            noise_variance=p["noise_variance"],
            converged=p["converged"],
        )
    if kind == "isomap":
        return IsomapModel(
            training_points=_np(p["training_points"]),
            landmark=p["landmark"],
            landmark_indices=_np(p["landmark_indices"], np.int64),
            geodesic=_np(p["geodesic"]),
            embedding=_np(p["embedding"]),
            eigenvalues=_np(p["eigenvalues"]),
            eigenvectors=_np(p["eigenvectors"]),
            delta_mean=_np(p["delta_mean"]),
            k=p["k"],
            q=p["q"],
            dropped_indices=_np(p["dropped_indices"], np.int64),
        )
    if kind == "gplvm":
        return GplvmModel(
            latent=_np(p["latent"]),
            signal_variance=p["signal_variance"],
            inv_lengthscale=p["inv_lengthscale"],
            noise_variance=p["noise_variance"],
            training_outputs=_np(p["training_outputs"]),
            objective=p["objective"],
            objective_init=p["objective_init"],
        )
    if kind == "lda":
        return LdaModel(
            classes=list(p["classes"]),
            class_means=_np(p["class_means"]),
            within_scatter=_np(p["within_scatter"]),
            between_scatter=_np(p["between_scatter"]),
            shrinkage=p["shrinkage"],
            directions=_np(p["directions"]),
            eigenvalues=_np(p["eigenvalues"]),
            global_mean=_np(p["global_mean"]),
            degenerate=p["degenerate"],
        )
    if kind == "gda":
        return GdaModel(
            training_points=_np(p["training_points"]),
            kernel=KernelSpec(p["kernel"]["kind"], p["kernel"]["gamma"]),
            dual_coef=_np(p["dual_coef"]),
            row_means=_np(p["row_means"]),
            grand_mean=p["grand_mean"],
            regularization=p["regularization"],
            eigenvalues=_np(p["eigenvalues"]),
            classes=list(p["classes"]),
        )
    if kind == "nca":
        return NcaModel(
            transform=_np(p["transform"]),
            objective_trace=list(p["objective_trace"]),
            n_training=p["n_training"],
            seed=p["seed"],
            step_init=p["step_init"],
            step_final=p["step_final"],
        )
    raise DataError(f"unknown model kind {kind!r}")
