from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pytest

from mafat.network import LayerSpec, NetworkError, NetworkSpec
from mafat.predictor import group_spans, valid_cuts
from mafat.search import MafatConfig

ACCEPTANCE_LINES: List[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@dataclass
class Case:
    seed: int
    net: NetworkSpec
    config: MafatConfig


def _random_layers(rng, channels):
    layers = []
    for _ in range(rng.integers(2, 7)):
        if layers and rng.random() < 0.35:
            k = int(rng.choice([2, 3], p=[0.8, 0.2]))
            layers.append(LayerSpec.max(k, k, channels))
        else:
            f = int(rng.choice([1, 3, 5], p=[0.25, 0.6, 0.15]))
            s = 2 if rng.random() < 0.15 else 1
            channels = int(rng.integers(1, 9))
            layers.append(LayerSpec.conv(channels, f, s))
    return layers


def group_has_overlap(net: NetworkSpec, top: int, bottom: int) -> bool:
    """True when some computed conv output is read by a later window wider than its stride."""
    for l in range(top, bottom):
        if net.layers[l].is_conv and any(net.layers[k].filter > net.layers[k].stride
                                         for k in range(l + 1, bottom + 1)):
            return True
    return False


def random_case(seed: int) -> Case:
    """Seeded tiny network (dims <= 64, <= 6 layers, <= 8 channels) with a valid config.

    Every group tiled finer than 1x1 has overlapping intermediate tiles.
    """
    rng = np.random.default_rng(seed)
    want_tiled = rng.random() < 0.85
    while True:
        w, h, c = int(rng.integers(6, 65)), int(rng.integers(6, 65)), int(rng.integers(1, 9))
        try:
            net = NetworkSpec(w, h, c, tuple(_random_layers(rng, c)))
        except NetworkError:
            continue
        cuts: List[Optional[int]] = valid_cuts(net)
        cut = cuts[int(rng.integers(len(cuts)))] if cuts and rng.random() < 0.6 else None
        tilings = []
        for top, bottom in group_spans(net, cut):
            if not group_has_overlap(net, top, bottom):
                tilings.append((1, 1))
                continue
            limit = min(4, net.heights[bottom + 1], net.widths[bottom + 1])
            n = int(rng.integers(1, limit + 1))
            m = int(rng.integers(1, limit + 1)) if rng.random() < 0.2 else n
            tilings.append((n, m))
        if want_tiled and all(n * m == 1 for n, m in tilings):
            continue
        if cut is None:
            return Case(seed, net, MafatConfig(tilings[0]))
        return Case(seed, net, MafatConfig(tilings[0], cut, tilings[1]))


@pytest.fixture
def yolo():
    from mafat.network import builtin_yolo16
    return builtin_yolo16()
