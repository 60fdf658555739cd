import json

import pytest

from undertext.cube import write_cube, write_mask_png
from undertext.evalrank import SyntheticSpec, synth_palimpsest

# trimmed caps keep the full-suite runtime reasonable; determinism and the
# pipeline contracts do not depend on the cap values. The isomap caps stay
# below k * (page ink fraction)^-1 so the hard-edged synthetic spectra still
# give a connected neighbor graph (see FAST_PARAMS["k"]).
FAST_CAPS = {"isomap": 80, "l-isomap": 80, "gplvm": 60, "nca": 150, "gda": 250}
FAST_PARAMS = {"k": 24}


@pytest.fixture(scope="session")
def synth_page(tmp_path_factory):
    """Small synthetic page written to disk: manifest, bands, labels mask."""
    out = tmp_path_factory.mktemp("page")
    spec = SyntheticSpec(width=72, height=54)
    cube, mask = synth_palimpsest(spec, seed=7)
    manifest = write_cube(cube, out, bit_depth=16)
    labels_png = out / "labels.png"
    write_mask_png(mask, labels_png)

    polygons = {
        "classes": {"1": "overtext", "2": "undertext", "3": "parchment"},
        "polygons": [
            {"class": 1, "points": [[2, 2], [12, 2], [12, 10], [2, 10]]},
            {"class": 2, "points": [[20, 20], [34, 20], [34, 30], [20, 30]]},
        ],
    }
    labels_json = out / "labels.json"
    labels_json.write_text(json.dumps(polygons))
    return {
        "dir": out,
        "manifest": manifest,
        "labels_png": labels_png,
        "labels_json": labels_json,
        "spec": spec,
        "mask": mask,
        "cube": cube,
    }
