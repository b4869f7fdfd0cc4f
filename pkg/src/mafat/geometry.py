"""Tile grids on feature maps and receptive-field back-projection through layers."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

from .network import LayerSpec, NetworkSpec


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class TileRegion:
    """Inclusive rectangle ``[x1, x2] x [y1, y2]`` on one layer's feature map."""

    x1: int
    y1: int
    x2: int
    y2: int

    @property
    def width(self) -> int:
        return self.x2 - self.x1 + 1

    @property
    def height(self) -> int:
        return self.y2 - self.y1 + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains(self, other: "TileRegion") -> bool:
        return (self.x1 <= other.x1 and other.x2 <= self.x2
                and self.y1 <= other.y1 and other.y2 <= self.y2)

    def intersect(self, other: "TileRegion"):
        x1, y1 = max(self.x1, other.x1), max(self.y1, other.y1)
        x2, y2 = min(self.x2, other.x2), min(self.y2, other.y2)
        if x1 > x2 or y1 > y2:
            return None
        return TileRegion(x1, y1, x2, y2)

    def as_dict(self) -> dict:
        return {"x1": self.x1, "y1": self.y1, "x2": self.x2, "y2": self.y2}


def _split(extent: int, parts: int, idx: int) -> Tuple[int, int]:
    return idx * extent // parts, (idx + 1) * extent // parts - 1


def grid_partition(n: int, m: int, w: int, h: int, i: int, j: int) -> TileRegion:
    """Cell ``(i, j)`` of an ``n`` rows by ``m`` cols floor-balanced grid on a ``w x h`` map."""
    if n < 1 or m < 1 or n > h or m > w:
        raise GeometryError(f"degenerate {n}x{m} grid on a {w}x{h} map")
    if not (0 <= i < n and 0 <= j < m):
        raise GeometryError(f"grid index ({i}, {j}) outside {n}x{m}")
    y1, y2 = _split(h, n, i)
    x1, x2 = _split(w, m, j)
    return TileRegion(x1, y1, x2, y2)


def _project_axis(lo: int, hi: int, layer: LayerSpec, dim: int) -> Tuple[int, int]:
    a = lo * layer.stride - layer.pad
    b = hi * layer.stride - layer.pad + layer.filter - 1
    return max(a, 0), min(b, dim - 1)


def back_project(out_region: TileRegion, layer: LayerSpec, in_w: int, in_h: int) -> TileRegion:
    """Input region of ``layer`` that the output region reads, clamped to the map."""
    x1, x2 = _project_axis(out_region.x1, out_region.x2, layer, in_w)
    y1, y2 = _project_axis(out_region.y1, out_region.y2, layer, in_h)
    return TileRegion(x1, y1, x2, y2)


@dataclass(frozen=True)
class TileChain:
    """Per-layer regions of one fused task.

    ``outputs[l]`` is the output-side region of layer ``l`` and ``inputs[l]`` the
    input-side region it reads. ``outputs[bottom]`` is the grid cell.
    """

    top: int
    bottom: int
    grid_index: Tuple[int, int]
    inputs: Dict[int, TileRegion]
    outputs: Dict[int, TileRegion]

    def layers(self):
        return range(self.bottom, self.top - 1, -1)


def build_tile_chain(net: NetworkSpec, top: int, bottom: int,
                     n: int, m: int, i: int, j: int) -> TileChain:
    if not 0 <= top <= bottom < len(net):
        raise GeometryError(f"invalid layer span [{top}, {bottom}] for {len(net)} layers")
    w_out, h_out, _ = net.out_dims(bottom)
    region = grid_partition(n, m, w_out, h_out, i, j)
    inputs, outputs = {}, {}
    for l in range(bottom, top - 1, -1):
        outputs[l] = region
        w_in, h_in, _ = net.in_dims(l)
        region = back_project(region, net.layers[l], w_in, h_in)
        inputs[l] = region
    return TileChain(top, bottom, (i, j), inputs, outputs)
