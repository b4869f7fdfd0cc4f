# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled conv/max kernels over rectangular output regions.

Must be built without FMA contraction so results match the NumPy fallback.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _tap_range(long o, long stride, long pad, long f, long dim,
                            long *lo, long *hi) noexcept nogil:
    cdef long start = o * stride - pad
    lo[0] = 0 if start >= 0 else -start
    hi[0] = f if start + f <= dim else dim - start


def conv2d_region(const float[:, :, ::1] x, long y0, long x0, long in_h, long in_w,
                  const float[:, :, :, ::1] weights, bias, bint leaky,
                  long stride, long pad, long oy0, long oy1, long ox0, long ox1):
    cdef long f = weights.shape[0]
    cdef long c_in = weights.shape[2]
    cdef long c_out = weights.shape[3]
    cdef long oh = oy1 - oy0 + 1
    cdef long ow = ox1 - ox0 + 1
    cdef long fy_lo, fy_hi, fx_lo, fx_hi, oy, ox, co, ci, fy, fx, iy, ix
    cdef float acc
    cdef float slope = 0.1
    cdef bint has_bias = bias is not None
    cdef const float[::1] b
    if has_bias:
        b = bias
    # Receptive field must lie inside the buffer wherever it lies inside the image.
    lo_y = max(oy0 * stride - pad, 0)
    hi_y = min(oy1 * stride - pad + f - 1, in_h - 1)
    lo_x = max(ox0 * stride - pad, 0)
    hi_x = min(ox1 * stride - pad + f - 1, in_w - 1)
    if lo_y < y0 or hi_y >= y0 + x.shape[0] or lo_x < x0 or hi_x >= x0 + x.shape[1]:
        raise ValueError("input buffer does not cover the receptive field")
    out = np.empty((oh, ow, c_out), dtype=np.float32)
    cdef float[:, :, ::1] o = out
    with nogil:
        for oy in range(oh):
            _tap_range(oy0 + oy, stride, pad, f, in_h, &fy_lo, &fy_hi)
            for ox in range(ow):
                _tap_range(ox0 + ox, stride, pad, f, in_w, &fx_lo, &fx_hi)
                for co in range(c_out):
                    acc = 0.0
                    for ci in range(c_in):
                        for fy in range(fy_lo, fy_hi):
                            iy = (oy0 + oy) * stride - pad + fy - y0
                            for fx in range(fx_lo, fx_hi):
                                ix = (ox0 + ox) * stride - pad + fx - x0
                                acc = acc + x[iy, ix, ci] * weights[fy, fx, ci, co]
                    if has_bias:
                        acc = acc + b[co]
                    if leaky and not acc > 0:
                        acc = acc * slope
                    o[oy, ox, co] = acc
    return out


def maxpool_region(const float[:, :, ::1] x, long y0, long x0, long f, long stride,
                   long oy0, long oy1, long ox0, long ox1):
    cdef long oh = oy1 - oy0 + 1
    cdef long ow = ox1 - ox0 + 1
    cdef long c = x.shape[2]
    cdef long oy, ox, ch, fy, fx, iy, ix
    cdef float m, v
    if (oy0 * stride - y0 < 0 or ox0 * stride - x0 < 0
            or oy1 * stride + f - y0 > x.shape[0] or ox1 * stride + f - x0 > x.shape[1]):
        raise ValueError("input buffer does not cover the pooling window")
    out = np.empty((oh, ow, c), dtype=np.float32)
    cdef float[:, :, ::1] o = out
    with nogil:
        for oy in range(oh):
            for ox in range(ow):
                iy = (oy0 + oy) * stride - y0
                ix = (ox0 + ox) * stride - x0
                for ch in range(c):
                    m = x[iy, ix, ch]
                    for fy in range(f):
                        for fx in range(f):
                            v = x[iy + fy, ix + fx, ch]
                            if v > m:
                                m = v
                    o[oy, ox, ch] = m
    return out
