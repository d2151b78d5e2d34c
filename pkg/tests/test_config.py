import numpy as np
import pytest
from hypothesis import given, strategies as st

from lnpair.config import (HEADER_BEGIN, PRESETS, ConfigError, extract_header_config,
                           load_config, parse_list, parse_number_list)


def test_defaults_load():
    cfg = load_config()
    assert cfg["optics"]["pump_nm"] == 780.0
    assert cfg["farfield"]["grid"] == [16]
    assert cfg["crystal"]["d_matrix"] is None
    assert cfg["optics"]["angles_deg"][:3] == [0.0, 5.0, 10.0]
    assert len(cfg["optics"]["angles_deg"]) == 72
    assert cfg["hbt"]["write_tags"] is False


@pytest.mark.parametrize("name,edge,rate", [("cube1", 4.1, 37), ("cube2", 2.3, 5.5),
                                            ("cube3", 3.4, 6.6), ("cube4", 4.0, 80)])
def test_presets(name, edge, rate):
    cfg = load_config(preset=name)
    assert cfg["geometry"]["edge_um"] == edge
    assert cfg["measured"]["rate_hz"] == rate
    assert name in PRESETS


def test_layering_order():
    cfg = load_config(preset="cube1", text="[geometry]\nedge_um = 3\n",
                      overrides={"geometry.edge_um": "2.5"})
    assert cfg["geometry"]["edge_um"] == 2.5
    assert load_config(preset="cube1", text="[geometry]\nedge_um = 3\n")["geometry"]["edge_um"] == 3


def test_list_grammar():
    assert parse_list("1, 2 3,4") == [1, 2, 3, 4]
    assert parse_list("0:1:0.25") == [0, 0.25, 0.5, 0.75]
    assert parse_list("") == []
    with pytest.raises(ConfigError):
        parse_list("0:1")
    with pytest.raises(ConfigError):
        parse_list("1:0:1")
    with pytest.raises(ConfigError):
        parse_number_list(" ", "--powers")


def test_inline_comments_and_multiline_matrix():
    text = ("[crystal]\nprojection_deg = 30   # from x\nd_matrix =\n"
            "    0 0 0 0 -4.88 -2.58\n    -2.58 2.58 0 -4.88 0 0\n    -4.88 -4.88 -34 0 0 0\n")
    cfg = load_config(text=text)
    assert cfg["crystal"]["projection_deg"] == 30
    d = cfg["crystal"]["d_matrix"].d
    assert d.shape == (3, 6) and d[2, 2] == -34 and d[0, 5] == -2.58


def _err(text):
    with pytest.raises(ConfigError) as e:
        load_config(text=text)
    return str(e.value)


def test_errors_carry_line_and_field():
    msg = _err("# c\n[optics]\nna = 1.5\n")
    assert "optics.na" in msg and "line 3" in msg
    msg = _err("[optics]\npower_mw = -1\n")
    assert "optics.power_mw" in msg and "line 2" in msg
    msg = _err("[geometry]\n\nbogus = 1\n")
    assert "geometry.bogus" in msg and "line 3" in msg
    msg = _err("[nope]\nx = 1\n")
    assert "nope" in msg and "line 1" in msg
    assert "hbt.seed" in _err("[hbt]\nseed = abc\n")
    assert "farfield.side" in _err("[farfield]\nside = water\n")


def test_cross_field_checks():
    assert "signal_nm" in _err("[optics]\nsignal_nm = 1500\n")
    assert "Sellmeier window" in _err("[optics]\npump_nm = 300\nsignal_nm = 600\nidler_nm = 600\n")
    assert "farfield.grid" in _err("[farfield]\ngrid = 4\n")
    assert "n_theta" in _err("[farfield]\nn_theta = 181\n")
    assert "transmissions" in _err("[measured]\ntransmissions = 0.5 1.5\n")
    assert "extraordinary_C" in _err("[sellmeier]\nextraordinary_C = 1 2\n")
    with pytest.raises(ConfigError):
        load_config(overrides={"optics.bogus": "1"})
    with pytest.raises(ConfigError):
        load_config(preset="cube9")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_header_round_trip(tmp_path):
    cfg = load_config(preset="cube2", overrides={"hbt.seed": "7", "farfield.grid": "8 16",
                                                  "output.dir": str(tmp_path)})
    lines = cfg.header_lines("hbt", "0.1.0")
    assert HEADER_BEGIN in lines and all(ln.startswith("#") for ln in lines)
    out = tmp_path / "x.csv"
    out.write_text("\n".join(lines) + "\na,b\n1,2\n")
    back = load_config(out)
    assert back.to_text() == cfg.to_text()
    assert back.raw == {**cfg.raw, "output": back.raw["output"]}
    assert extract_header_config("no header here") is None
    assert "[output]" not in cfg.to_text()


def test_replace_revalidates():
    cfg = load_config()
    assert cfg.replace({"optics.na": "0.5"})["optics"]["na"] == 0.5
    with pytest.raises(ConfigError):
        cfg.replace({"optics.na": "2"})


_chars = st.sampled_from(list("[]=:#,;.-+ e0123456789abcxyz_\n\t") +
                         ["[optics]", "[hbt]", "na", "seed", "grid", "inf", "nan"])


@given(st.lists(_chars, max_size=60).map("".join))
def test_parser_fuzz_only_config_errors(text):
    try:
        load_config(text=text)
    except ConfigError:
        pass


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), max_size=10))
def test_list_round_trip(vals):
    from lnpair.config import as_list_text
    assert parse_list(as_list_text(vals)) == vals
