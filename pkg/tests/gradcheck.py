"""Central finite-difference oracle shared by the gradient tests."""
import numpy as np

from terramesh.autodiff import Tape


def numeric_grad(fn, x, h=1e-5, mask=None):
    """d fn(x) / dx by central differences; ``fn`` maps an ndarray to a float."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        if mask is not None and not mask[idx]:
            continue
        old = x[idx]
        x[idx] = old + h
        fp = fn(x.copy())
        x[idx] = old - h
        fm = fn(x.copy())
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def analytic_grad(build, *values):
    """Gradient of ``build(tape, *leaves)`` w.r.t. every leaf."""
    tape = Tape()
    leaves = [tape.leaf(np.array(v, dtype=np.float64)) for v in values]
    root = build(tape, *leaves)
    tape.backward(root)
    return [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value) for leaf in leaves]


def value_of(build, *values):
    tape = Tape()
    leaves = [tape.leaf(np.array(v, dtype=np.float64)) for v in values]
    return float(build(tape, *leaves).value)


def max_rel_err(a, b, floor=1e-6):
    a = np.asarray(a)
    b = np.asarray(b)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)).max(), floor)
    return float(np.abs(a - b).max() / scale)


def check_gradients(build, *values, h=1e-5, which=None, mask=None):
    """Max relative error between analytic and numeric gradients over all inputs."""
    grads = analytic_grad(build, *values)
    worst = 0.0
    for k, v in enumerate(values):
        if which is not None and k not in which:
            continue

        def f(x, k=k):
            args = list(values)
            args[k] = x
            return value_of(build, *args)

        num = numeric_grad(f, v, h=h, mask=None if mask is None else mask.get(k))
        ana = grads[k]
        if mask is not None and k in mask:
            ana = np.where(mask[k], ana, 0.0)
        worst = max(worst, max_rel_err(ana, num))
    return worst
