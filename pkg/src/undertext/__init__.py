"""undertext: multispectral palimpsest enhancement toolkit.

Loads registered band stacks, fits supervised/unsupervised embeddings on
operator-labeled pixels, renders contrast-stretched enhancement images,
applies the two-threshold overtext-whitening technique, and ranks methods by
undertext/overtext separability.
"""

__version__ = "0.1.0"
