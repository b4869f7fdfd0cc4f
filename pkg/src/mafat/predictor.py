"""Peak-memory prediction for fused, tiled layer groups.

Each task of a group is walked from its bottom layer upward; the footprint of
layer ``l`` in a task is ``scratch + output + 2 * input`` (the input buffer plus
the previous layer's output that produced it). A group's prediction is the
largest such footprint over every task and layer. The network prediction is
the larger of the two groups plus a constant bias covering weights, runtime and
OS overhead.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .geometry import GeometryError, build_tile_chain
from .network import ELEMENT_BYTES, MB, LayerKind, NetworkSpec, scratch_bytes

DEFAULT_BIAS_BYTES = 31 * MB


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PredictorParams:
    bias_bytes: int = DEFAULT_BIAS_BYTES
    element_bytes: int = ELEMENT_BYTES
    # Add the group's weight bytes to its prediction instead of relying on the bias.
    strict_weights: bool = False


@dataclass(frozen=True)
class TileMemBreakdown:
    layer: int
    tile: Tuple[int, int]
    scratch: int
    input: int
    output: int

    @property
    def mem(self) -> int:
        return self.scratch + self.output + 2 * self.input

    def as_dict(self) -> dict:
        return {"layer": self.layer, "tile": list(self.tile), "scratch": self.scratch,
                "input": self.input, "output": self.output, "mem": self.mem}


@dataclass(frozen=True)
class GroupReport:
    top: int
    bottom: int
    tiling: Tuple[int, int]
    witness: TileMemBreakdown
    group_max_bytes: int
    weight_bytes: int = 0

    def as_dict(self) -> dict:
        return {"top": self.top, "bottom": self.bottom, "tiling": list(self.tiling),
                "group_max_bytes": self.group_max_bytes, "weight_bytes": self.weight_bytes,
                "witness": self.witness.as_dict()}


@dataclass(frozen=True)
class MemoryReport:
    groups: Tuple[GroupReport, ...]
    bias_bytes: int
    network_max_bytes: int = field(init=False)

    def __post_init__(self):
        peak = max(g.group_max_bytes for g in self.groups)
        object.__setattr__(self, "network_max_bytes", peak + self.bias_bytes)

    @property
    def network_max_mb(self) -> float:
        return self.network_max_bytes / MB

    @property
    def dominant(self) -> GroupReport:
        return max(self.groups, key=lambda g: g.group_max_bytes)

    def as_dict(self) -> dict:
        return {"groups": [g.as_dict() for g in self.groups], "bias_bytes": self.bias_bytes,
                "network_max_bytes": self.network_max_bytes,
                "network_max_mb": round(self.network_max_mb, 4)}


def task_breakdowns(net: NetworkSpec, n: int, m: int, top: int, bottom: int, i: int, j: int,
                    element_bytes: int = ELEMENT_BYTES) -> List[TileMemBreakdown]:
    """Per-layer footprint terms of task ``(i, j)``, bottom layer first."""
    chain = build_tile_chain(net, top, bottom, n, m, i, j)
    rows = []
    for l in chain.layers():
        out_r, in_r = chain.outputs[l], chain.inputs[l]
        c_in, c_out = net.channels[l], net.channels[l + 1]
        rows.append(TileMemBreakdown(
            layer=l,
            tile=(i, j),
            scratch=scratch_bytes(net.layers[l], out_r.width, out_r.height, c_in, element_bytes),
            input=in_r.area * c_in * element_bytes,
            output=out_r.area * c_out * element_bytes,
        ))
    return rows


def predict_layer_group(net: NetworkSpec, n: int, m: int, top: int, bottom: int,
                        params: PredictorParams = PredictorParams()) -> Tuple[int, TileMemBreakdown]:
    """Largest per-task, per-layer footprint of layers ``[top, bottom]`` under an ``n x m`` grid.

    Returns the bias-free maximum and its witness. Ties go to the lowest layer,
    then the lowest grid index.
    """
    best: Optional[TileMemBreakdown] = None
    for i in range(n):
        for j in range(m):
            for row in task_breakdowns(net, n, m, top, bottom, i, j, params.element_bytes):
                if best is None or (-row.mem, row.layer, row.tile) < (-best.mem, best.layer, best.tile):
                    best = row
    assert best is not None
    return best.mem, best


def valid_cuts(net: NetworkSpec) -> List[int]:
    """Layer indices directly after a max layer (excluding the network end)."""
    return [l + 1 for l, layer in enumerate(net.layers)
            if layer.kind is LayerKind.MAX and l + 1 < len(net)]


def group_spans(net: NetworkSpec, cut: Optional[int]) -> List[Tuple[int, int]]:
    last = len(net) - 1
    if cut is None:
        return [(0, last)]
    if cut not in valid_cuts(net):
        raise ConfigError(f"cut {cut} not in valid cuts {{{', '.join(map(str, valid_cuts(net)))}}}")
    return [(0, cut - 1), (cut, last)]


def predict_mem(net: NetworkSpec, n1: int, m1: int, n2: int, m2: int, cut: Optional[int],
                params: PredictorParams = PredictorParams()) -> MemoryReport:
    """Predicted peak bytes of a two-group configuration; ``cut=None`` fuses everything."""
    spans = group_spans(net, cut)
    tilings = [(n1, m1), (n2, m2)]
    groups = []
    for (top, bottom), (n, m) in zip(spans, tilings):
        if n < 1 or m < 1:
            raise ConfigError(f"tiling {n}x{m} must be at least 1x1")
        try:
            peak, witness = predict_layer_group(net, n, m, top, bottom, params)
        except GeometryError as exc:
            raise ConfigError(f"layers {top}-{bottom}: {exc}") from None
        weights = sum(net.weight_bytes(l, params.element_bytes) for l in range(top, bottom + 1))
        if params.strict_weights:
            peak += weights
        groups.append(GroupReport(top, bottom, (n, m), witness, peak, weights))
    return MemoryReport(tuple(groups), params.bias_bytes)


def full_fuse_curve(net: NetworkSpec, sizes: Sequence[int] = (1, 2, 3, 4, 5),
                    params: PredictorParams = PredictorParams()) -> List[int]:
    return [predict_mem(net, k, k, 1, 1, None, params).network_max_bytes for k in sizes]
