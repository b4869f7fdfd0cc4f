"""Exact reference executor for monolithic and fused-tiled inference.

Feature maps are float32 arrays of shape ``(h, w, c)``. Every output element is
produced by the same kernel with the same summation order whichever way the
network is run, so tiled results are bitwise equal to monolithic ones.

Task regions are derived here by dilating boolean masks tap by tap, not by
:func:`mafat.geometry.back_project`; the trace therefore gives an independent
check of the predictor's accounting.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .geometry import grid_partition
from .network import ELEMENT_BYTES, NetworkSpec
from .predictor import group_spans
from .search import MafatConfig

TRACE_COLUMNS = ("input", "output", "scratch", "prev_output", "reuse_cache", "weights")
PREDICTOR_MASK = ("input", "output", "scratch", "prev_output")


class ScheduleMode(enum.Enum):
    RECOMPUTE = "recompute"
    REUSE = "reuse"


@dataclass(frozen=True)
class ConvWeights:
    kernel: np.ndarray  # (F, F, c_in, c_out) float32
    bias: Optional[np.ndarray] = None  # (c_out,) float32
    leaky: bool = False


WeightSet = Tuple[Optional[ConvWeights], ...]


def random_weights(net: NetworkSpec, seed: int, bias: bool = False,
                   leaky: bool = False) -> WeightSet:
    """Seeded uniform [-1, 1] weights for every conv layer (``None`` for max layers)."""
    rng = np.random.default_rng(seed)
    out = []
    for l, layer in enumerate(net.layers):
        if not layer.is_conv:
            out.append(None)
            continue
        shape = (layer.filter, layer.filter, net.channels[l], layer.out_channels)
        kernel = rng.uniform(-1.0, 1.0, size=shape).astype(np.float32)
        b = rng.uniform(-1.0, 1.0, size=layer.out_channels).astype(np.float32) if bias else None
        out.append(ConvWeights(kernel, b, leaky))
    return tuple(out)


def random_input(net: NetworkSpec, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(net.input_h, net.input_w, net.input_c)).astype(np.float32)


def _check_shapes(net: NetworkSpec, x: np.ndarray, weights: WeightSet) -> None:
    if x.shape != (net.input_h, net.input_w, net.input_c):
        raise ValueError(f"input shape {x.shape} != {(net.input_h, net.input_w, net.input_c)}")
    if len(weights) != len(net):
        raise ValueError(f"{len(weights)} weight entries for {len(net)} layers")
    for l, (layer, w) in enumerate(zip(net.layers, weights)):
        if layer.is_conv:
            want = (layer.filter, layer.filter, net.channels[l], layer.out_channels)
            if w is None or w.kernel.shape != want:
                raise ValueError(f"layer {l}: expected weights of shape {want}")
            if w.bias is not None and w.bias.shape != (layer.out_channels,):
                raise ValueError(f"layer {l}: bias must have {layer.out_channels} entries")


def _apply(net, weights, l, buf, y0, x0, oy0, oy1, ox0, ox1):
    layer = net.layers[l]
    if layer.is_conv:
        w = weights[l]
        return kernels.conv2d_region(np.ascontiguousarray(buf, dtype=np.float32), y0, x0,
                                     net.heights[l], net.widths[l], w.kernel, w.bias, w.leaky,
                                     layer.stride, layer.pad, oy0, oy1, ox0, ox1)
    return kernels.maxpool_region(np.ascontiguousarray(buf, dtype=np.float32), y0, x0,
                                  layer.filter, layer.stride, oy0, oy1, ox0, ox1)


def _taps_in_image(o, stride, pad, f, dim):
    start = np.asarray(o) * stride - pad
    return np.minimum(start + f, dim) - np.maximum(start, 0)


def _macs(net: NetworkSpec, l: int, ys: np.ndarray, xs: np.ndarray) -> int:
    """Multiply-accumulates to compute output pixels ``(ys, xs)`` of layer ``l``."""
    layer = net.layers[l]
    if not layer.is_conv or len(ys) == 0:
        return 0
    ty = _taps_in_image(ys, layer.stride, layer.pad, layer.filter, net.heights[l])
    tx = _taps_in_image(xs, layer.stride, layer.pad, layer.filter, net.widths[l])
    return int(np.sum(ty * tx)) * net.channels[l] * layer.out_channels


def run_monolithic(net: NetworkSpec, x: np.ndarray, weights: WeightSet) -> np.ndarray:
    _check_shapes(net, x, weights)
    cur = np.ascontiguousarray(x, dtype=np.float32)
    for l in range(len(net)):
        cur = _apply(net, weights, l, cur, 0, 0, 0, net.heights[l + 1] - 1, 0, net.widths[l + 1] - 1)
    return cur


def monolithic_macs(net: NetworkSpec) -> int:
    total = 0
    for l in range(len(net)):
        ys, xs = np.mgrid[0:net.heights[l + 1], 0:net.widths[l + 1]]
        total += _macs(net, l, ys.ravel(), xs.ravel())
    return total


def task_order(n: int, m: int, mode: ScheduleMode) -> List[Tuple[int, int]]:
    cells = [(i, j) for i in range(n) for j in range(m)]
    if mode is ScheduleMode.REUSE:
        return [c for c in cells if sum(c) % 2 == 0] + [c for c in cells if sum(c) % 2 == 1]
    return cells


@dataclass(frozen=True)
class MemTraceEvent:
    step: int
    group: int
    tile: Tuple[int, int]
    layer: int
    input: int
    output: int
    scratch: int
    prev_output: int
    reuse_cache: int
    weights: int

    @property
    def is_task(self) -> bool:
        return self.tile[0] >= 0

    def component(self, name: str) -> int:
        return getattr(self, name)

    @property
    def total(self) -> int:
        return sum(getattr(self, c) for c in TRACE_COLUMNS)


def peak_footprint(trace: Iterable[MemTraceEvent], include: Sequence[str] = PREDICTOR_MASK,
                   group: Optional[int] = None, tasks_only: bool = False) -> int:
    """Maximum over events of the summed ``include`` components (0 for an empty trace)."""
    peak = 0
    for ev in trace:
        if group is not None and ev.group != group:
            continue
        if tasks_only and not ev.is_task:
            continue
        peak = max(peak, sum(ev.component(c) for c in include))
    return peak


def task_peaks(trace: Iterable[MemTraceEvent], group: int,
               include: Sequence[str] = PREDICTOR_MASK) -> dict:
    """Per-tile peak footprint within one group."""
    out: dict = {}
    for ev in trace:
        if ev.group == group and ev.is_task:
            out[ev.tile] = max(out.get(ev.tile, 0), sum(ev.component(c) for c in include))
    return out


def trace_to_csv(trace: Iterable[MemTraceEvent]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "group", "tile_i", "tile_j", "layer", *TRACE_COLUMNS, "total"])
    for ev in trace:
        writer.writerow([ev.step, ev.group, ev.tile[0], ev.tile[1], ev.layer,
                         *(getattr(ev, c) for c in TRACE_COLUMNS), ev.total])
    return buf.getvalue()


def _bbox(mask: np.ndarray):
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if len(rows) == 0:
        return None
    return int(rows[0]), int(rows[-1]), int(cols[0]), int(cols[-1])


def _fill_bbox(mask: np.ndarray) -> np.ndarray:
    out = np.zeros_like(mask)
    box = _bbox(mask)
    if box is not None:
        out[box[0]:box[1] + 1, box[2]:box[3] + 1] = True
    return out


def _rect_mask(shape, region) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    mask[region.y1:region.y2 + 1, region.x1:region.x2 + 1] = True
    return mask


def receptive_mask(net: NetworkSpec, l: int, out_mask: np.ndarray) -> np.ndarray:
    """Input pixels of layer ``l`` read by the output pixels set in ``out_mask``."""
    layer = net.layers[l]
    h, w = net.heights[l], net.widths[l]
    need = np.zeros((h, w), dtype=bool)
    ys, xs = np.nonzero(out_mask)
    for fy in range(layer.filter):
        iy = ys * layer.stride - layer.pad + fy
        for fx in range(layer.filter):
            ix = xs * layer.stride - layer.pad + fx
            ok = (iy >= 0) & (iy < h) & (ix >= 0) & (ix < w)
            need[iy[ok], ix[ok]] = True
    return need


def _rects(mask: np.ndarray) -> List[Tuple[int, int, int, int]]:
    """Cover a mask with disjoint rectangles ``(y1, y2, x1, x2)`` built from row runs."""
    done, open_runs = [], {}
    for y in range(mask.shape[0] + 1):
        runs = set()
        if y < mask.shape[0]:
            row = np.concatenate(([False], mask[y], [False]))
            edges = np.flatnonzero(row[1:] != row[:-1])
            runs = {(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])}
        for run in list(open_runs):
            if run not in runs:
                done.append((open_runs.pop(run), y - 1, *run))
        for run in runs:
            open_runs.setdefault(run, y)
    return done


class _ReuseCache:
    """Per-layer overlap cache with per-pixel reference counts of pending tasks."""

    def __init__(self, net, top, bottom, static_needs):
        self.net = net
        self.layers = range(top, bottom)  # bottom-layer tiles never overlap
        self.pending = {l: sum(need[l].astype(np.int32) for need in static_needs) for l in self.layers}
        self.valid = {l: np.zeros(self.pending[l].shape, dtype=bool) for l in self.layers}
        self.data = {l: np.zeros(self.pending[l].shape + (net.channels[l + 1],), dtype=np.float32)
                     for l in self.layers}

    def start_task(self, need):
        for l in self.layers:
            self.pending[l] -= need[l]

    def store(self, l, mask, buf, y0, x0):
        if l not in self.pending:
            return
        keep = mask & (self.pending[l] > 0) & ~self.valid[l]
        ys, xs = np.nonzero(keep)
        self.data[l][ys, xs] = buf[ys - y0, xs - x0]
        self.valid[l] |= keep

    def end_task(self):
        for l in self.layers:
            self.valid[l] &= self.pending[l] > 0

    def cached(self, l):
        return self.valid.get(l)

    @property
    def nbytes(self) -> int:
        return sum(int(self.valid[l].sum()) * self.net.channels[l + 1] * ELEMENT_BYTES
                   for l in self.layers)


@dataclass
class MafatRun:
    output: np.ndarray
    trace: List[MemTraceEvent]
    macs: int
    # materialized output of each layer group
    group_outputs: List[np.ndarray]


class _Tracer:
    def __init__(self):
        self.events: List[MemTraceEvent] = []

    def emit(self, **kw):
        self.events.append(MemTraceEvent(step=len(self.events), **kw))


def _task_static_need(net, top, bottom, cell_mask):
    need = {bottom: cell_mask}
    for l in range(bottom, top, -1):
        need[l - 1] = _fill_bbox(receptive_mask(net, l, need[l]))
    return need


def _run_group(net, weights, g, top, bottom, n, m, group_in, mode, tracer, group_weights,
               order=None):
    h_out, w_out = net.heights[bottom + 1], net.widths[bottom + 1]
    result = np.zeros((h_out, w_out, net.channels[bottom + 1]), dtype=np.float32)
    order = order or task_order(n, m, mode)
    cells = {c: _rect_mask((h_out, w_out), grid_partition(n, m, w_out, h_out, *c)) for c in order}
    cache = None
    if mode is ScheduleMode.REUSE:
        static = [_task_static_need(net, top, bottom, cells[c]) for c in order]
        cache = _ReuseCache(net, top, bottom, static)
    macs = 0
    for cell in order:
        if cache is not None:
            cache.start_task(_task_static_need(net, top, bottom, cells[cell]))
        # Plan bottom-up: what each layer must compute given what is cached.
        need, missing, need_in = {bottom: cells[cell]}, {}, {}
        for l in range(bottom, top - 1, -1):
            hit = cache.cached(l) if cache is not None else None
            missing[l] = need[l] & ~hit if hit is not None else need[l]
            need_in[l] = receptive_mask(net, l, missing[l])
            if l > top:
                # tiles are dense rectangles even when the next layer reads them sparsely
                need[l - 1] = _fill_bbox(need_in[l])
        # Execute top-down.
        prev = None  # (buffer, y0, x0) of previous layer's output
        for l in range(top, bottom + 1):
            box = _bbox(need_in[l])
            c_in, c_out = net.channels[l], net.channels[l + 1]
            if l > top:
                inbuf, iy0, ix0 = prev
            elif box is None:
                inbuf, iy0, ix0 = np.zeros((0, 0, c_in), dtype=np.float32), 0, 0
            else:
                y1, y2, x1, x2 = box
                inbuf, iy0, ix0 = group_in[y1:y2 + 1, x1:x2 + 1].copy(), y1, x1
            oy1, oy2, ox1, ox2 = _bbox(need[l]) or (0, -1, 0, -1)
            outbuf = np.zeros((oy2 - oy1 + 1, ox2 - ox1 + 1, c_out), dtype=np.float32)
            hit = cache.cached(l) if cache is not None else None
            if hit is not None:
                reuse = need[l] & hit
                ys, xs = np.nonzero(reuse)
                outbuf[ys - oy1, xs - ox1] = cache.data[l][ys, xs]
            computed_px = 0
            for ry1, ry2, rx1, rx2 in _rects(missing[l]):
                tile = _apply(net, weights, l, inbuf, iy0, ix0, ry1, ry2, rx1, rx2)
                outbuf[ry1 - oy1:ry2 - oy1 + 1, rx1 - ox1:rx2 - ox1 + 1] = tile
                ys, xs = np.mgrid[ry1:ry2 + 1, rx1:rx2 + 1]
                macs += _macs(net, l, ys.ravel(), xs.ravel())
                computed_px += (ry2 - ry1 + 1) * (rx2 - rx1 + 1)
            layer = net.layers[l]
            scratch = (computed_px * layer.filter ** 2 * c_in * ELEMENT_BYTES // layer.stride
                       if layer.is_conv else 0)
            if cache is not None:
                cache.store(l, missing[l], outbuf, oy1, ox1)
            # The input buffer is a copy of the previous layer's output region, which
            # stays resident while this layer runs.
            tracer.emit(group=g, tile=cell, layer=l, input=inbuf.nbytes, output=outbuf.nbytes,
                        scratch=scratch, prev_output=inbuf.nbytes,
                        reuse_cache=cache.nbytes if cache is not None else 0,
                        weights=group_weights)
            prev = (outbuf, oy1, ox1)
        outbuf, oy1, ox1 = prev
        ys, xs = np.nonzero(cells[cell])
        result[ys, xs] = outbuf[ys - oy1, xs - ox1]
        if cache is not None:
            cache.end_task()
    return result, macs


def run_mafat(net: NetworkSpec, x: np.ndarray, weights: WeightSet, config: MafatConfig,
              mode: ScheduleMode = ScheduleMode.RECOMPUTE) -> MafatRun:
    """Run ``net`` as one or two fused, tiled layer groups."""
    _check_shapes(net, x, weights)
    spans = group_spans(net, config.cut)
    tracer = _Tracer()
    cur = np.ascontiguousarray(x, dtype=np.float32)
    outputs, macs = [], 0
    for g, ((top, bottom), (n, m)) in enumerate(zip(spans, config.groups())):
        gw = sum(net.weight_bytes(l) for l in range(top, bottom + 1))
        if g > 0:
            # Merged inter-group tensor, re-tiled by the next group.
            tracer.emit(group=g, tile=(-1, -1), layer=top, input=0, output=0, scratch=0,
                        prev_output=cur.nbytes, reuse_cache=0, weights=gw)
        cur, group_macs = _run_group(net, weights, g, top, bottom, n, m, cur, mode, tracer, gw)
        outputs.append(cur)
        macs += group_macs
    return MafatRun(cur, tracer.events, macs, outputs)


def first_difference(a: np.ndarray, b: np.ndarray) -> Optional[Tuple[int, ...]]:
    """Index of the first element whose bit pattern differs, or ``None``."""
    if a.shape != b.shape:
        return tuple(-1 for _ in a.shape)
    diff = a.view(np.uint32) != b.view(np.uint32)
    if not diff.any():
        return None
    return tuple(int(v) for v in np.argwhere(diff)[0])


def execute_task(net: NetworkSpec, x: np.ndarray, weights: WeightSet, top: int, bottom: int,
                 n: int, m: int, i: int, j: int) -> np.ndarray:
    """Output tile of one recompute-mode task; ``x`` is layer ``top``'s full input map."""
    h_out, w_out = net.heights[bottom + 1], net.widths[bottom + 1]
    region = grid_partition(n, m, w_out, h_out, i, j)
    out, _ = _run_group(net, weights, 0, top, bottom, n, m, np.ascontiguousarray(x, np.float32),
                        ScheduleMode.RECOMPUTE, _Tracer(), 0, order=[(i, j)])
    return out[region.y1:region.y2 + 1, region.x1:region.x2 + 1]
