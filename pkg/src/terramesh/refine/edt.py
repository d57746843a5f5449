import numpy as np

from ..kernels import edt_sq


def edt(sparse):
    """Exact Euclidean distance (pixels) from each pixel to the nearest valid measurement."""
    mask = sparse.mask
    if not mask.any():
        raise ValueError("sparse depth has no valid pixel")
    return np.sqrt(edt_sq(mask))
