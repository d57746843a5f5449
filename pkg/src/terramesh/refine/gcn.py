"""Graph convolution over the mesh graph, ending in a per-vertex 3-D offset."""
import numpy as np
import scipy.sparse as sp

from .. import autodiff as ad
from ..autodiff import ShapeError

HIDDEN = (128, 128, 64)


def normalized_adjacency(edges, n_vertices):
    """D^-1/2 (A + I) D^-1/2 as a sparse matrix."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    a = sp.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                      shape=(n_vertices, n_vertices)).tocsr()
    a.data[:] = 1.0
    a = a + sp.identity(n_vertices, format="csr")
    inv = 1.0 / np.sqrt(np.asarray(a.sum(axis=1)).ravel())
    return (sp.diags(inv) @ a @ sp.diags(inv)).tocsr()


def init_gcn(rng, in_width, prefix="gcn", hidden=HIDDEN):
    """Kaiming-uniform layers, zero biases, zero output projection."""
    params = {}
    fan = in_width
    for k, width in enumerate(hidden, start=1):
        bound = np.sqrt(6.0 / fan)
        params[f"{prefix}.g{k}"] = rng.uniform(-bound, bound, (fan, width))
        params[f"{prefix}.b{k}"] = np.zeros(width)
        fan = width
    params[f"{prefix}.W"] = np.zeros((fan, 3))
    return params


def gcn_forward(features, adjacency, params, prefix="gcn", n_layers=3):
    """Vertex offsets (n, 3) from (n, F) features."""
    g1 = params[f"{prefix}.g1"]
    width = np.shape(getattr(g1, "value", g1))[0]
    if features.value.shape[1] != width:
        raise ShapeError(f"feature width {features.value.shape[1]} != first layer input {width}")
    h = features
    for k in range(1, n_layers + 1):
        h = ad.relu(ad.spmm(adjacency, h @ params[f"{prefix}.g{k}"]) + params[f"{prefix}.b{k}"])
    return h @ params[f"{prefix}.W"]
