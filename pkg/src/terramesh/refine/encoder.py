"""Four-stage stride-2 convolutional encoder producing the feature pyramid."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .. import autodiff as ad
from ..autodiff import ShapeError, Var

CHANNELS = (16, 32, 64, 128)
VARIANTS = {"rgb": 3, "rgb_rd": 4, "rgb_rd_edt": 5}


def _im2col(xp, ho, wo):
    # (C, Hp, Wp) -> (ho * wo, C * 9) patches at stride 2
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))[:, : 2 * ho : 2, : 2 * wo : 2]
    return win.transpose(1, 2, 0, 3, 4).reshape(ho * wo, -1)


def conv2d(x, w, b):
    """3x3 convolution, stride 2, zero padding 1, on a (C, H, W) map."""
    tape = ad._tape_of(x, w, b)
    x, w, b = (ad._wrap(t, tape) for t in (x, w, b))
    xv, wv = x.value, w.value
    c, h, wd = xv.shape
    co = wv.shape[0]
    if wv.shape != (co, c, 3, 3) or b.value.shape != (co,):
        raise ShapeError(f"conv2d: kernel {wv.shape} / bias {b.value.shape} do not fit input {xv.shape}")
    ho, wo = (h + 1) // 2, (wd + 1) // 2
    xp = np.pad(xv, ((0, 0), (1, 1), (1, 1)))
    cols = _im2col(xp, ho, wo)
    kmat = wv.reshape(co, -1)
    out = (cols @ kmat.T + b.value).T.reshape(co, ho, wo)

    def back(g):
        gf = g.reshape(co, -1).T
        dw = (gf.T @ cols).reshape(wv.shape)
        dcols = (gf @ kmat).reshape(ho, wo, c, 3, 3)
        dxp = np.zeros_like(xp)
        for i in range(3):
            for j in range(3):
                dxp[:, i : i + 2 * ho : 2, j : j + 2 * wo : 2] += dcols[:, :, :, i, j].transpose(2, 0, 1)
        return dxp[:, 1:-1, 1:-1], dw, g.sum(axis=(1, 2))

    return tape.record("conv2d", out, (x, w, b), back)


def init_encoder(rng, in_channels=5, channels=CHANNELS):
    """Kaiming-uniform kernels, zero biases."""
    params = {}
    cin = in_channels
    for k, co in enumerate(channels, start=1):
        bound = np.sqrt(6.0 / (cin * 9))
        params[f"enc{k}.w"] = rng.uniform(-bound, bound, (co, cin, 3, 3))
        params[f"enc{k}.b"] = np.zeros(co)
        cin = co
    return params


def encoder_input(rgb, rendered_depth=None, edt_image=None, nominal_depth=1.0, variant="rgb_rd_edt"):
    """Stack the (C, H, W) network input; depth channels are scaled to order one.

    A rendered depth given as a Var keeps the stack on its tape.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown input variant {variant!r}; expected one of {sorted(VARIANTS)}")
    rgb = np.asarray(rgb, dtype=np.float64)
    h, w = rgb.shape[:2]
    chans = [rgb.transpose(2, 0, 1)]
    if variant in ("rgb_rd", "rgb_rd_edt"):
        if rendered_depth is None or np.shape(getattr(rendered_depth, "value", rendered_depth)) != (h, w):
            raise ShapeError(f"rendered depth must be {(h, w)}")
        if isinstance(rendered_depth, Var):
            chans.append(ad.reshape(ad.scale(rendered_depth, 1.0 / nominal_depth), (1, h, w)))
        else:
            chans.append(np.asarray(rendered_depth)[None] / nominal_depth)
    if variant == "rgb_rd_edt":
        if edt_image is None or np.shape(edt_image) != (h, w):
            raise ShapeError(f"distance image must be {(h, w)}, got {np.shape(edt_image)}")
        chans.append(np.asarray(edt_image)[None] / np.hypot(h, w))
    if any(isinstance(c, Var) for c in chans):
        return ad.concat(chans, axis=0)
    return np.concatenate(chans, axis=0)


def extract_features(x, params, n_stages=4):
    """Feature maps L1..L4 at strides 2, 4, 8, 16."""
    owners = [p for p in params.values() if isinstance(p, Var)]
    tape = owners[0].tape if owners else (x.tape if isinstance(x, Var) else ad.Tape())
    h = x if isinstance(x, Var) else tape.constant(np.asarray(x, dtype=np.float64))
    expected = np.shape(getattr(params["enc1.w"], "value", params["enc1.w"]))[1]
    if h.value.shape[0] != expected:
        raise ShapeError(f"encoder expects {expected} input channels, got {h.value.shape[0]}")
    pyramid = []
    for k in range(1, n_stages + 1):
        h = ad.relu(conv2d(h, params[f"enc{k}.w"], params[f"enc{k}.b"]))
        pyramid.append(h)
    return pyramid
