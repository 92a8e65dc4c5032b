from pathlib import Path

import pytest

from timemux.config import ConfigError, load_config, parse_config, set_value
from timemux.params import Policy
from timemux.photon_stats import StatsModel

PAPER_CFG = Path(__file__).resolve().parents[1] / "configs" / "paper.cfg"

MINIMAL = """\
n_bins = 12
bin_spacing_ps = 200
clock_period_ns = 16.07
p = 0.046
eta_i = 0.079
eta_s = 0.011
eta_rt = 0.7
"""


def test_minimal_defaults():
    cfg = parse_config(MINIMAL)
    p = cfg.params
    assert p.source.stats_model is StatsModel.THERMAL
    assert p.policy is Policy.FIRST
    assert p.channel.dark_count_prob == 0.0
    assert p.source.pair_cutoff_kmax == 6
    assert p.clock.tick_ps == 25.0


def test_paper_config_file():
    cfg = load_config(PAPER_CFG)
    assert cfg.params.n_bins == 12
    assert cfg.params.channel.eta_roundtrip == 0.706592476
    assert cfg.seed == 42
    assert cfg.trials == 10_000_000


def test_comments_and_case():
    cfg = parse_config("# header\n" + MINIMAL.replace("p = 0.046", "p = 0.046  # per bin")
                       + "Policy = LAST\nstats_model = Poisson\n")
    assert cfg.params.policy is Policy.LAST
    assert cfg.params.source.stats_model is StatsModel.POISSON


def test_mu_instead_of_p():
    cfg = parse_config(MINIMAL.replace("p = 0.046", "mu = 0.05"))
    assert cfg.params.source.pair_prob_p == pytest.approx(0.05 / 1.05)


def test_missing_key_named():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("eta_i = 0.079\n", ""))
    assert any("eta_i" in e for e in info.value.errors)


def test_every_problem_listed():
    text = MINIMAL.replace("eta_s = 0.011\n", "").replace("p = 0.046\n", "") + "bogus = 1\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    msg = str(info.value)
    assert "eta_s" in msg and "p (or mu)" in msg and "bogus" in msg


def test_validation_errors_surface():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("clock_period_ns = 16.07", "clock_period_ns = 2.0")
                     .replace("eta_i = 0.079", "eta_i = 1.5"))
    assert len(info.value.errors) == 2


def test_unparseable_value():
    with pytest.raises(ConfigError, match="n_bins"):
        parse_config(MINIMAL.replace("n_bins = 12", "n_bins = twelve"))


def test_eta_rt_optional_for_calibration():
    text = MINIMAL.replace("eta_rt = 0.7\n", "")
    with pytest.raises(ConfigError):
        parse_config(text)
    assert parse_config(text, require_eta_rt=False).params.channel.eta_roundtrip == 1.0


def test_set_value_keeps_comment(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text(MINIMAL.replace("eta_rt = 0.7", "eta_rt = 0.7   # guess"))
    set_value(path, "eta_rt", "0.706592476")
    text = path.read_text()
    assert "eta_rt = 0.706592476   # guess\n" in text
    assert load_config(path).params.channel.eta_roundtrip == 0.706592476


def test_set_value_appends(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text(MINIMAL.replace("eta_rt = 0.7\n", "").rstrip("\n"))
    set_value(path, "eta_rt", "0.5")
    assert load_config(path).params.channel.eta_roundtrip == 0.5
