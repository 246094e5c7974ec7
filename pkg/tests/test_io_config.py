import numpy as np
import pytest

from ekp.config import Config, ConfigError, parse_config_text
from ekp.fields import Grid
from ekp.seriesio import SeriesFormatError, read_field_series, write_field_series


def test_roundtrip_bit_exact(tmp_path, rng):
    grid = Grid(2, 16)
    times = np.linspace(0.0, 0.3, 7)
    fields = {
        "rho": rng.normal(size=(7,) + grid.shape),
        "j.0": rng.normal(size=(7,) + grid.shape),
        "j.1": rng.normal(size=(7,) + grid.shape),
    }
    path = tmp_path / "series.ekpf"
    write_field_series(path, grid, times, fields)
    g2, t2, f2 = read_field_series(path)
    assert g2 == grid
    assert np.array_equal(t2, times) or np.max(np.abs(t2 - times)) < 1e-15
    for name in fields:
        assert np.array_equal(f2[name], fields[name])
    # write the read-back data again: byte-identical files
    path2 = tmp_path / "series2.ekpf"
    write_field_series(path2, g2, t2, f2)
    assert path.read_bytes() == path2.read_bytes()


def test_truncation_reports_offset(tmp_path, rng):
    grid = Grid(1, 8)
    times = np.linspace(0, 1, 3)
    path = tmp_path / "s.ekpf"
    write_field_series(path, grid, times, {"rho": rng.normal(size=(3, 8))})
    raw = path.read_bytes()
    clipped = tmp_path / "clipped.ekpf"
    clipped.write_bytes(raw[: len(raw) - 10])
    with pytest.raises(SeriesFormatError, match="offset"):
        read_field_series(clipped)


def test_bad_magic_and_version(tmp_path, rng):
    grid = Grid(1, 8)
    path = tmp_path / "s.ekpf"
    write_field_series(path, grid, np.linspace(0, 1, 3), {"rho": rng.normal(size=(3, 8))})
    raw = bytearray(path.read_bytes())
    bad = tmp_path / "bad.ekpf"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(SeriesFormatError, match="magic"):
        read_field_series(bad)
    ver = bytearray(raw)
    ver[4] = 9
    badv = tmp_path / "badv.ekpf"
    badv.write_bytes(bytes(ver))
    with pytest.raises(SeriesFormatError, match="version"):
        read_field_series(badv)


def test_version_zero_accepted(tmp_path, rng):
    grid = Grid(1, 8)
    path = tmp_path / "s.ekpf"
    write_field_series(path, grid, np.linspace(0, 1, 3), {"rho": rng.normal(size=(3, 8))})
    assert path.read_bytes()[4] == 0
    read_field_series(path)


def test_config_grammar():
    cfg = parse_config_text(
        """
        # a comment
        scenario = simulate
        grid.n = 64    # trailing comment
        time.t = 0.5
        """
    )
    assert cfg == {"scenario": "simulate", "grid.n": "64", "time.t": "0.5"}
    with pytest.raises(ConfigError, match="key"):
        parse_config_text("BadKey = 1")
    with pytest.raises(ConfigError, match="expected"):
        parse_config_text("just words")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("a = 1\na = 2")


def test_config_typed_getters():
    cfg = Config({"a": "1.5", "b": "7", "c": "true", "d": "hello", "laws.x.k": "2.0"})
    assert cfg.get_float("a") == 1.5
    assert cfg.get_int("b") == 7
    assert cfg.get_bool("c") is True
    assert cfg.get_str("d") == "hello"
    assert cfg.get_float("missing", 3.0) == 3.0
    with pytest.raises(ConfigError, match="missing"):
        cfg.get_float("missing")
    with pytest.raises(ConfigError, match="'d'"):
        cfg.get_float("d")
    assert cfg.params_with_prefix("laws.x") == {"k": 2.0}
