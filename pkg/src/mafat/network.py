"""Layer chains: parsing, derived dimensions and per-layer buffer sizes."""
from __future__ import annotations

import enum
from decimal import ROUND_HALF_UP, Decimal
from dataclasses import dataclass, field
from typing import List, Tuple

ELEMENT_BYTES = 4
MB = 1 << 20


class NetworkError(ValueError):
    """Raised for malformed network descriptions."""


class LayerKind(enum.Enum):
    CONV = "conv"
    MAX = "max"

    @property
    def label(self) -> str:
        return "Conv" if self is LayerKind.CONV else "Max"


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    filter: int
    stride: int
    out_channels: int
    pad: int

    @classmethod
    def conv(cls, out_channels: int, filter: int = 3, stride: int = 1) -> "LayerSpec":
        if filter < 1 or filter % 2 == 0:
            raise NetworkError(f"conv filter must be odd and >= 1, got {filter}")
        if stride < 1 or out_channels < 1:
            raise NetworkError("conv stride and channels must be positive")
        return cls(LayerKind.CONV, filter, stride, out_channels, (filter - 1) // 2)

    @classmethod
    def max(cls, filter: int, stride: int, channels: int) -> "LayerSpec":
        if filter != stride:
            raise NetworkError(f"max layer needs filter == stride, got {filter} != {stride}")
        if filter < 1 or channels < 1:
            raise NetworkError("max filter and channels must be positive")
        return cls(LayerKind.MAX, filter, stride, channels, 0)

    @property
    def is_conv(self) -> bool:
        return self.kind is LayerKind.CONV

    def out_dim(self, d: int) -> int:
        return (d + 2 * self.pad - self.filter) // self.stride + 1


@dataclass(frozen=True)
class NetworkSpec:
    """A chain of conv/max layers applied to a ``input_w x input_h x input_c`` map.

    ``widths[l]``/``heights[l]``/``channels[l]`` are the INPUT dims of layer ``l``;
    index ``len(layers)`` holds the final output dims.
    """

    input_w: int
    input_h: int
    input_c: int
    layers: Tuple[LayerSpec, ...]
    widths: Tuple[int, ...] = field(init=False, repr=False)
    heights: Tuple[int, ...] = field(init=False, repr=False)
    channels: Tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if min(self.input_w, self.input_h, self.input_c) < 1:
            raise NetworkError("input dims must be positive")
        object.__setattr__(self, "layers", tuple(self.layers))
        ws, hs, cs = [self.input_w], [self.input_h], [self.input_c]
        for l, layer in enumerate(self.layers):
            if layer.kind is LayerKind.MAX and layer.out_channels != cs[-1]:
                raise NetworkError(f"layer {l}: max layer must keep {cs[-1]} channels")
            w, h = layer.out_dim(ws[-1]), layer.out_dim(hs[-1])
            if w < 1 or h < 1:
                raise NetworkError(f"layer {l}: output dims underflow ({w}x{h})")
            ws.append(w)
            hs.append(h)
            cs.append(layer.out_channels)
        object.__setattr__(self, "widths", tuple(ws))
        object.__setattr__(self, "heights", tuple(hs))
        object.__setattr__(self, "channels", tuple(cs))

    def __len__(self) -> int:
        return len(self.layers)

    def in_dims(self, l: int) -> Tuple[int, int, int]:
        """(width, height, channels) of layer ``l``'s input."""
        return self.widths[l], self.heights[l], self.channels[l]

    def out_dims(self, l: int) -> Tuple[int, int, int]:
        return self.widths[l + 1], self.heights[l + 1], self.channels[l + 1]

    def weight_bytes(self, l: int, element_bytes: int = ELEMENT_BYTES) -> int:
        layer = self.layers[l]
        if not layer.is_conv:
            return 0
        return layer.filter ** 2 * self.channels[l] * layer.out_channels * element_bytes


@dataclass(frozen=True)
class SizeRow:
    layer: int
    weights_bytes: int
    input_bytes: int
    output_bytes: int
    scratch_bytes: int

    @property
    def total_bytes(self) -> int:
        return self.weights_bytes + self.input_bytes + self.output_bytes + self.scratch_bytes


def scratch_bytes(layer: LayerSpec, w_out: int, h_out: int, c_in: int,
                  element_bytes: int = ELEMENT_BYTES) -> int:
    """Convolution workspace: ``w_out * h_out * F^2 * c_in / S`` elements; zero for max."""
    if not layer.is_conv:
        return 0
    return w_out * h_out * layer.filter ** 2 * c_in * element_bytes // layer.stride


def layer_sizes(net: NetworkSpec, element_bytes: int = ELEMENT_BYTES) -> List[SizeRow]:
    rows = []
    for l, layer in enumerate(net.layers):
        w_in, h_in, c_in = net.in_dims(l)
        w_out, h_out, c_out = net.out_dims(l)
        rows.append(SizeRow(
            layer=l,
            weights_bytes=net.weight_bytes(l, element_bytes),
            input_bytes=w_in * h_in * c_in * element_bytes,
            output_bytes=w_out * h_out * c_out * element_bytes,
            scratch_bytes=scratch_bytes(layer, w_out, h_out, c_in, element_bytes),
        ))
    return rows


def parse_network(text: str) -> NetworkSpec:
    """Parse the line format ``input W H C`` / ``conv C F S`` / ``max F S``."""
    dims = None
    layers: List[LayerSpec] = []
    channels = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword = tokens[0].lower()
        try:
            values = [int(t) for t in tokens[1:]]
        except ValueError:
            raise NetworkError(f"line {lineno}: expected integers in {raw.strip()!r}") from None
        try:
            if dims is None:
                if keyword != "input" or len(values) != 3:
                    raise NetworkError("first line must be 'input <W> <H> <C>'")
                dims = values
                channels = values[2]
            elif keyword == "conv":
                if len(values) != 3:
                    raise NetworkError("expected 'conv <out_channels> <filter> <stride>'")
                layers.append(LayerSpec.conv(*values))
                channels = values[0]
            elif keyword == "max":
                if len(values) != 2:
                    raise NetworkError("expected 'max <filter> <stride>'")
                layers.append(LayerSpec.max(values[0], values[1], channels))
            else:
                raise NetworkError(f"unknown layer type {tokens[0]!r}")
        except NetworkError as exc:
            if str(exc).startswith("line "):
                raise
            raise NetworkError(f"line {lineno}: {exc}") from None
    if dims is None:
        raise NetworkError("missing 'input' line")
    return NetworkSpec(dims[0], dims[1], dims[2], tuple(layers))


def render_network(net: NetworkSpec) -> str:
    lines = [f"input {net.input_w} {net.input_h} {net.input_c}"]
    for layer in net.layers:
        if layer.is_conv:
            lines.append(f"conv {layer.out_channels} {layer.filter} {layer.stride}")
        else:
            lines.append(f"max {layer.filter} {layer.stride}")
    return "\n".join(lines) + "\n"


# First 16 layers of YOLOv2 at 608x608. The published weight count for layer 12
# (4,717,872 B) is 720 B short of 3*3*256*512*4; sizes here follow the formula.
YOLO16_TEXT = """\
input 608 608 3
conv 32 3 1
max 2 2
conv 64 3 1
max 2 2
conv 128 3 1
conv 64 1 1
conv 128 3 1
max 2 2
conv 256 3 1
conv 128 1 1
conv 256 3 1
max 2 2
conv 512 3 1
conv 256 1 1
conv 512 3 1
conv 256 1 1
"""


def builtin_yolo16() -> NetworkSpec:
    return parse_network(YOLO16_TEXT)


BUILTINS = {"yolo16": builtin_yolo16}


def to_mb(nbytes: int) -> str:
    """Bytes as MB (2**20) with two decimals, halves rounded up."""
    return str((Decimal(nbytes) / MB).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))
