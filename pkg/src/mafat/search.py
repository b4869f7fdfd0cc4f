"""First-fit search over two-group tiling configurations."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .network import NetworkSpec
from .predictor import (ConfigError, MemoryReport, PredictorParams, predict_mem,
                        valid_cuts)

_TILING = r"(\d+)\s*x\s*(\d+)"
_CONFIG_RE = re.compile(rf"^{_TILING}(?:\s*/\s*(nocut|\d+)(?:\s*/\s*{_TILING})?)?$", re.I)


@dataclass(frozen=True)
class MafatConfig:
    top_tiling: Tuple[int, int]
    cut: Optional[int] = None
    bottom_tiling: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if self.cut is None and self.bottom_tiling is not None:
            raise ConfigError("a bottom tiling requires a cut")
        if self.cut is not None and self.bottom_tiling is None:
            raise ConfigError(f"cut {self.cut} needs a bottom tiling")
        for t in (self.top_tiling, self.bottom_tiling or (1, 1)):
            if min(t) < 1:
                raise ConfigError(f"tiling {t[0]}x{t[1]} must be at least 1x1")

    @classmethod
    def parse(cls, text: str) -> "MafatConfig":
        """Accept ``NxM``, ``NxM/NoCut`` or ``N1xM1/<cut>/N2xM2`` (case-insensitive)."""
        match = _CONFIG_RE.match(text.strip())
        if not match:
            raise ConfigError(f"malformed config {text!r}; expected e.g. 5x5/8/2x2 or 1x1/NoCut")
        n1, m1, cut, n2, m2 = match.groups()
        top = (int(n1), int(m1))
        if cut is None or cut.lower() == "nocut":
            if n2 is not None:
                raise ConfigError(f"malformed config {text!r}: NoCut takes no bottom tiling")
            return cls(top)
        if n2 is None:
            raise ConfigError(f"malformed config {text!r}: cut {cut} needs a bottom tiling")
        return cls(top, int(cut), (int(n2), int(m2)))

    def __str__(self) -> str:
        top = f"{self.top_tiling[0]}x{self.top_tiling[1]}"
        if self.cut is None:
            return f"{top}/NoCut"
        return f"{top}/{self.cut}/{self.bottom_tiling[0]}x{self.bottom_tiling[1]}"

    def groups(self) -> List[Tuple[int, int]]:
        return [self.top_tiling] if self.cut is None else [self.top_tiling, self.bottom_tiling]

    def predict(self, net: NetworkSpec, params: PredictorParams = PredictorParams()) -> MemoryReport:
        n2, m2 = self.bottom_tiling or (1, 1)
        return predict_mem(net, *self.top_tiling, n2, m2, self.cut, params)


YOLO_FALLBACK = MafatConfig((5, 5), 8, (2, 2))


@dataclass(frozen=True)
class SearchSpace:
    """Ordered candidate space. Iteration is cuts, then top tiles, then bottom tiles."""

    cuts: Tuple[Optional[int], ...] = (None, 12, 8)
    top_tiles: Tuple[int, ...] = (1, 2, 3, 4, 5)
    bottom_tiles: Tuple[int, ...] = (2,)
    # Groups cut at or after this layer (and NoCut) skip top tiles above prune_max_tile.
    prune_from_cut: Optional[int] = 12
    prune_max_tile: int = 2
    fallback: Optional[MafatConfig] = field(default=YOLO_FALLBACK)

    def pruned(self, cut: Optional[int], tile: int) -> bool:
        if self.prune_from_cut is None:
            return False
        late = cut is None or cut >= self.prune_from_cut
        return late and tile > self.prune_max_tile

    def candidates(self) -> List[MafatConfig]:
        out = []
        for cut in self.cuts:
            for tile in self.top_tiles:
                if self.pruned(cut, tile):
                    continue
                if cut is None:
                    out.append(MafatConfig((tile, tile)))
                else:
                    out.extend(MafatConfig((tile, tile), cut, (k, k)) for k in self.bottom_tiles)
        return out

    def check(self, net: NetworkSpec) -> None:
        allowed = set(valid_cuts(net))
        bad = [c for c in self.cuts if c is not None and c not in allowed]
        if bad:
            raise ConfigError(f"search cuts {bad} not valid for this network (valid: {sorted(allowed)})")
        if self.fallback is None:
            raise ConfigError("search space has no fallback configuration")
        if self.fallback.cut is not None and self.fallback.cut not in allowed:
            raise ConfigError(f"no fallback possible: cut {self.fallback.cut} is not valid for this "
                              "network; supply a SearchSpace with a suitable fallback")

    @classmethod
    def from_dict(cls, data: dict) -> "SearchSpace":
        def cut_value(c):
            return None if isinstance(c, str) and c.lower() == "nocut" else int(c)

        kwargs = {}
        if "cuts" in data:
            kwargs["cuts"] = tuple(cut_value(c) for c in data["cuts"])
        for key in ("top_tiles", "bottom_tiles"):
            if key in data:
                kwargs[key] = tuple(int(t) for t in data[key])
        if "prune_from_cut" in data:
            p = data["prune_from_cut"]
            kwargs["prune_from_cut"] = None if p is None else int(p)
        if "prune_max_tile" in data:
            kwargs["prune_max_tile"] = int(data["prune_max_tile"])
        if "fallback" in data:
            kwargs["fallback"] = None if data["fallback"] is None else MafatConfig.parse(data["fallback"])
        return cls(**kwargs)


@dataclass(frozen=True)
class SearchResult:
    config: MafatConfig
    report: MemoryReport
    fit: bool


def get_config(net: NetworkSpec, memory_limit_bytes: int, space: SearchSpace = SearchSpace(),
               params: PredictorParams = PredictorParams()) -> SearchResult:
    """Return the first candidate whose prediction is strictly below the limit.

    Falls back to ``space.fallback`` (with ``fit=False``) when nothing fits.
    """
    if memory_limit_bytes <= 0:
        raise ConfigError("memory limit must be positive")
    space.check(net)
    for config in space.candidates():
        report = config.predict(net, params)
        if report.network_max_bytes < memory_limit_bytes:
            return SearchResult(config, report, True)
    return SearchResult(space.fallback, space.fallback.predict(net, params), False)


def sweep_space(net: NetworkSpec, space: SearchSpace = SearchSpace(),
                params: PredictorParams = PredictorParams()) -> List[Tuple[MafatConfig, int]]:
    """All non-pruned candidates with predictions, largest prediction first."""
    allowed = set(valid_cuts(net))
    bad = [c for c in space.cuts if c is not None and c not in allowed]
    if bad:
        raise ConfigError(f"search cuts {bad} not valid for this network")
    rows = [(c, c.predict(net, params).network_max_bytes) for c in space.candidates()]
    return sorted(rows, key=lambda r: -r[1])

