import numpy as np
import pytest

from h2entangle.config import (
    DEFAULT_CONFIG_TEXT, ConfigError, default_config, load_config, parse_config, parse_orders, resolve_delays,
)


def test_default_text_parses_to_defaults():
    assert parse_config(DEFAULT_CONFIG_TEXT).canonical() == default_config().canonical()


@pytest.mark.parametrize("text, fragment", [
    ("[physics]\nphoton_energy = 0\n", "photon_energy"),
    ("[physics]\nbogus = 1\n", "unknown key"),
    ("[nonsense]\n", "unknown section"),
    ("[simulation]\nevents = lots\n", "cannot parse"),
    ("[simulation]\nevents = 1.5\n", "cannot parse"),
    ("[physics]\ncurves = files\n", "vg_file"),
    ("[physics]\ncurves = files\nvg_file = nope.dat\nvu_file = nope.dat\n", "not found"),
    ("[band.x]\nparity = odd\n", "needs 'q'"),
    ("[band.x]\nparity = odd\nq = 20\n", "odd"),
    ("[band.x]\nparity = sideways\nq = 21\n", "parity"),
    ("[output]\nformats = csv, gif\n", "gif"),
    ("[physics]\nintensity = 1\nintensity = 2\n", "intensity"),
])
def test_errors_name_the_problem(text, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text, "run.ini")
    assert fragment in str(err.value)
    assert "run.ini" in str(err.value)


def test_error_line_number():
    with pytest.raises(ConfigError, match=r"run.ini:3"):
        parse_config("[physics]\nphoton_energy = 1.2\nwhat = 1\n", "run.ini")


def test_bands_and_overrides(tmp_path):
    text = "[simulation]\nseed = 5\nevents = 1e5\n[band.a]\nparity = odd\nq = 21\nbs_width = 0.1\n"
    path = tmp_path / "c.ini"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.simulation.events == 100_000
    assert cfg.bands[0].q == 21
    assert cfg.with_seed(9).simulation.seed == 9
    assert cfg.with_seed(9).hash_hex != cfg.hash_hex


def test_hash_ignores_output_directory():
    cfg = default_config()
    assert cfg.with_output("/tmp/elsewhere").hash_hex == cfg.hash_hex
    assert len(cfg.digest()) == 32


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_delays_and_orders():
    cfg = default_config()
    d = resolve_delays(cfg, 1.7)
    assert len(d) == 32 and d[-1] < 2 * 1.7
    np.testing.assert_allclose(np.diff(d), 2 * 1.7 / 32)
    explicit = parse_config("[simulation]\ndelays = 0, 0.5, 1.0\n")
    np.testing.assert_array_equal(resolve_delays(explicit, 1.7), [0.0, 0.5, 1.0])
    assert parse_orders("15-23") == [15, 17, 19, 21, 23]
    assert parse_orders("17, 19") == [17, 19]
