"""Embedding methods: unsupervised (PCA, PPCA, GPLVM, Isomap, Landmark
Isomap) and supervised (LDA, GDA, NCA), each with an out-of-sample
projection so models fitted on a capped subsample can be applied to every
pixel of a page."""

from .linear import LinearModel, pca_fit, ppca_fit, project_linear
from .manifold import (
    IsomapModel,
    NeighborGraph,
    classical_mds,
    geodesics,
    isomap_embed,
    isomap_project,
    knn_graph,
    landmark_isomap_embed,
)
from .gplvm import GplvmModel, gplvm_fit, gplvm_project
from .supervised import (
    GdaModel,
    KernelSpec,
    LdaModel,
    NcaModel,
    gda_fit,
    gda_project,
    lda_fit,
    lda_project,
    nca_fit,
    nca_project,
)
from .types import Embedding

__all__ = [
    "Embedding",
    "LinearModel",
    "pca_fit",
    "ppca_fit",
    "project_linear",
    "NeighborGraph",
    "IsomapModel",
    "knn_graph",
    "geodesics",
    "classical_mds",
    "isomap_embed",
    "landmark_isomap_embed",
    "isomap_project",
    "GplvmModel",
    "gplvm_fit",
    "gplvm_project",
    "LdaModel",
    "GdaModel",
    "NcaModel",
    "KernelSpec",
    "lda_fit",
    "lda_project",
    "gda_fit",
    "gda_project",
    "nca_fit",
    "nca_project",
]
