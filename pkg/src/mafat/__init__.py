"""Memory-aware fusing and tiling (MAFAT) planner for conv/maxpool layer chains."""
from .geometry import TileChain, TileRegion, back_project, build_tile_chain, grid_partition
from .network import (LayerKind, LayerSpec, NetworkError, NetworkSpec, SizeRow, builtin_yolo16,
                      layer_sizes, parse_network, render_network)
from .predictor import (ConfigError, MemoryReport, PredictorParams, TileMemBreakdown,
                        predict_layer_group, predict_mem, valid_cuts)
from .search import MafatConfig, SearchSpace, get_config, sweep_space

__all__ = [
    "LayerKind", "LayerSpec", "NetworkError", "NetworkSpec", "SizeRow", "builtin_yolo16",
    "layer_sizes", "parse_network", "render_network",
    "TileChain", "TileRegion", "back_project", "build_tile_chain", "grid_partition",
    "ConfigError", "MemoryReport", "PredictorParams", "TileMemBreakdown",
    "predict_layer_group", "predict_mem", "valid_cuts",
    "MafatConfig", "SearchSpace", "get_config", "sweep_space",
]
