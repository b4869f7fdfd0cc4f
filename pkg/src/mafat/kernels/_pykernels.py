"""Pure NumPy kernels. Arithmetic order matches the compiled kernels bit for bit."""
import numpy as np

LEAKY_SLOPE = np.float32(0.1)


def _taps(o0, o1, stride, pad, f, dim, base, extent):
    """Local buffer index and in-image mask of tap ``f`` for outputs ``o0..o1``."""
    img = np.arange(o0, o1 + 1) * stride - pad + f
    inside = (img >= 0) & (img < dim)
    local = img - base
    if np.any(inside & ((local < 0) | (local >= extent))):
        raise ValueError("input buffer does not cover the receptive field")
    return np.where(inside, local, 0), inside


def conv2d_region(x, y0, x0, in_h, in_w, weights, bias, leaky, stride, pad,
                  oy0, oy1, ox0, ox1):
    f = weights.shape[0]
    c_in, c_out = weights.shape[2], weights.shape[3]
    acc = np.zeros((oy1 - oy0 + 1, ox1 - ox0 + 1, c_out), dtype=np.float32)
    rows = [_taps(oy0, oy1, stride, pad, fy, in_h, y0, x.shape[0]) for fy in range(f)]
    cols = [_taps(ox0, ox1, stride, pad, fx, in_w, x0, x.shape[1]) for fx in range(f)]
    for ci in range(c_in):
        plane = x[:, :, ci]
        for fy in range(f):
            ry, my = rows[fy]
            for fx in range(f):
                rx, mx = cols[fx]
                vals = plane[ry[:, None], rx[None, :]]
                prod = vals[:, :, None] * weights[fy, fx, ci][None, None, :]
                valid = (my[:, None] & mx[None, :])[:, :, None]
                acc = np.where(valid, acc + prod, acc)
    if bias is not None:
        acc = acc + bias[None, None, :]
    if leaky:
        acc = np.where(acc > 0, acc, acc * LEAKY_SLOPE)
    return acc.astype(np.float32, copy=False)


def maxpool_region(x, y0, x0, f, stride, oy0, oy1, ox0, ox1):
    ys = np.arange(oy0, oy1 + 1) * stride - y0
    xs = np.arange(ox0, ox1 + 1) * stride - x0
    if ys.min() < 0 or xs.min() < 0 or ys.max() + f > x.shape[0] or xs.max() + f > x.shape[1]:
        raise ValueError("input buffer does not cover the pooling window")
    out = None
    for fy in range(f):
        for fx in range(f):
            v = x[(ys + fy)[:, None], (xs + fx)[None, :], :]
            out = v.copy() if out is None else np.where(v > out, v, out)
    return out.astype(np.float32, copy=False)
