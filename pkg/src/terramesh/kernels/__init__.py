"""Hot loops. Each kernel has a numba version and a pure-numpy version;
the public names resolve to whichever backend is active."""
from .edt import edt_sq
from .nn import nearest_neighbors
from .raster import rasterize

__all__ = ["edt_sq", "nearest_neighbors", "rasterize"]
