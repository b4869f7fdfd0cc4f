import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mafat.network import MB, parse_network
from mafat.predictor import ConfigError, predict_mem
from mafat.search import (YOLO_FALLBACK, MafatConfig, SearchSpace, get_config, sweep_space)


@pytest.mark.parametrize("text,want", [
    ("1x1/NoCut", MafatConfig((1, 1))),
    ("2x2", MafatConfig((2, 2))),
    ("5X5/8/2x2", MafatConfig((5, 5), 8, (2, 2))),
    (" 3x2 / nocut ", MafatConfig((3, 2))),
    ("2x3/12/4x1", MafatConfig((2, 3), 12, (4, 1))),
])
def test_parse(text, want):
    assert MafatConfig.parse(text) == want


@pytest.mark.parametrize("text", ["", "5x5/8", "1x1/NoCut/2x2", "0x1", "axb", "5x5/8/2"])
def test_parse_rejects(text):
    with pytest.raises(ConfigError):
        MafatConfig.parse(text)


@pytest.mark.parametrize("config", ["1x1/NoCut", "5x5/8/2x2", "2x3/12/4x1"])
def test_render_round_trip(config):
    assert str(MafatConfig.parse(config)) == config


def test_config_predict_delegates(yolo):
    cfg = MafatConfig((3, 3), 8, (2, 2))
    assert cfg.predict(yolo).network_max_bytes == predict_mem(yolo, 3, 3, 2, 2, 8).network_max_bytes


def test_large_limit_is_untiled(yolo):
    res = get_config(yolo, 256 * MB)
    assert str(res.config) == "1x1/NoCut" and res.fit


def test_tiny_limit_falls_back(yolo):
    res = get_config(yolo, 16 * MB)
    assert res.config == YOLO_FALLBACK and not res.fit
    assert res.report.network_max_bytes == YOLO_FALLBACK.predict(yolo).network_max_bytes


def test_default_space_order():
    got = [str(c) for c in SearchSpace().candidates()]
    assert got == ["1x1/NoCut", "2x2/NoCut", "1x1/12/2x2", "2x2/12/2x2",
                   "1x1/8/2x2", "2x2/8/2x2", "3x3/8/2x2", "4x4/8/2x2", "5x5/8/2x2"]


def test_no_prune_space_is_full_grid():
    assert len(SearchSpace(prune_from_cut=None).candidates()) == 15


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 300 * MB))
def test_first_fit_dominance(limit):
    from mafat.network import builtin_yolo16
    net = builtin_yolo16()
    res = get_config(net, limit)
    order = SearchSpace().candidates()
    if res.fit:
        assert res.report.network_max_bytes < limit
        for earlier in order[:order.index(res.config)]:
            assert earlier.predict(net).network_max_bytes >= limit
    else:
        assert all(c.predict(net).network_max_bytes >= limit for c in order)
        assert res.config == YOLO_FALLBACK


def test_fallback_stability(yolo):
    floor = min(p for _, p in sweep_space(yolo))
    results = {get_config(yolo, lim).config for lim in (1, MB, floor // 2, floor)}
    assert results == {YOLO_FALLBACK}


def test_limit_must_be_positive(yolo):
    with pytest.raises(ConfigError):
        get_config(yolo, 0)


def test_no_fallback_network():
    net = parse_network("input 32 32 3\nconv 4 3 1\nconv 4 3 1")
    with pytest.raises(ConfigError, match="not valid"):
        get_config(net, 10 * MB)
    space = SearchSpace(cuts=(None,), fallback=None)
    with pytest.raises(ConfigError, match="no fallback"):
        get_config(net, 10 * MB, space)
    space = SearchSpace(cuts=(None,), fallback=MafatConfig((2, 2)))
    assert get_config(net, 1, space).config == MafatConfig((2, 2))


def test_sweep_default(yolo):
    rows = sweep_space(yolo)
    assert len(rows) == 9
    preds = [p for _, p in rows]
    assert preds == sorted(preds, reverse=True)
    for cfg, p in rows:
        assert p == cfg.predict(yolo).network_max_bytes


def test_sweep_widened_includes_cut4(yolo):
    space = SearchSpace(cuts=(None, 12, 8, 4), bottom_tiles=(2, 3))
    rows = sweep_space(yolo, space)
    assert any(c.cut == 4 for c, _ in rows)
    assert len(rows) == 2 + 2 * 2 + 5 * 2 + 5 * 2


def test_space_from_dict():
    space = SearchSpace.from_dict({"cuts": ["NoCut", 8], "top_tiles": [1, 3],
                                   "bottom_tiles": [3], "prune_from_cut": None,
                                   "fallback": "3x3/8/3x3"})
    assert space.cuts == (None, 8)
    assert [str(c) for c in space.candidates()] == ["1x1/NoCut", "3x3/NoCut", "1x1/8/3x3", "3x3/8/3x3"]
    assert space.fallback == MafatConfig((3, 3), 8, (3, 3))


def test_deterministic(yolo):
    assert get_config(yolo, 70 * MB) == get_config(yolo, 70 * MB)
