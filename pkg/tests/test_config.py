import math
from pathlib import Path

import pytest

from spreadsim.experiments import config as C

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
def test_shipped_configs_round_trip(path):
    cfg = C.load(path)
    assert C.parse(C.dump(cfg)) == cfg


def test_every_scenario_has_a_config():
    assert {C.load(p).scenario for p in CONFIGS} == set(C.SCENARIOS)


def test_delta_sweep_config_values():
    cfg = C.load(Path(__file__).parent.parent / "configs" / "sweep-delta.yaml")
    assert cfg.raising.M == 5.0 and cfg.raising.deadzone == 0.0
    assert cfg.sweep.delta_over_M == [0.2, 0.4, 0.6, 0.8, 1.0]
    assert (cfg.graph.width, cfg.graph.height, cfg.graph.radius, cfg.graph.node_count) == (4, 1, 0.25, 500)
    assert cfg.initial_high == pytest.approx(math.sqrt(17))


def test_defaults():
    cfg = C.parse("scenario: oracle-check\n")
    assert cfg.trials == 1 and cfg.initial.low == 0.0
    assert cfg.initial_high == math.sqrt(17.0)


def _error(text):
    with pytest.raises(C.ConfigError) as info:
        C.parse(text, "cfg.yaml")
    return info.value


def test_unknown_key_reports_line():
    err = _error("scenario: sweep-delta\nsweep:\n  delta_over_M: [1.0]\n  bogus: 3\n")
    assert err.line == 4
    assert "cfg.yaml:4:" in str(err) and "bogus" in str(err)


def test_missing_scenario():
    assert "scenario" in str(_error("trials: 2\n"))


def test_type_mismatch():
    err = _error("scenario: oracle-check\ntrials: many\n")
    assert err.line == 2 and "integer" in str(err)


@pytest.mark.parametrize("bad", ["0.0", "-1.0"])
def test_nonpositive_delta_rejected(bad):
    _error(f"scenario: sweep-delta\nraising:\n  delta: {bad}\nsweep:\n  delta_over_M: [1.0]\n")
    _error(f"scenario: sweep-delta\nsweep:\n  delta_over_M: [0.5, {bad}]\n")


@pytest.mark.parametrize("frac", ["1.0", "1.5"])
def test_eps_fraction_at_least_one_rejected(frac):
    err = _error("scenario: perturbation\nsweep:\n  deadzone_over_K: [1.0]\n"
                 f"perturbation:\n  kind: uniform_positive\n  eps_fraction: {frac}\n")
    assert "e_min" in str(err) and err.line == 6


def test_scenario_requirements():
    _error("scenario: sweep-delta\n")
    _error("scenario: sweep-deadzone\nsweep:\n  deadzone_over_K: [1.0]\n")
    _error("scenario: hazard\n")
    _error("scenario: perturbation\nsweep:\n  deadzone_over_K: [1.0]\nperturbation:\n  kind: uniform_positive\n")
    _error("scenario: nope\n")


def test_empty_list_and_bad_yaml():
    _error("scenario: sweep-delta\nsweep:\n  delta_over_M: []\n")
    _error("scenario: [unclosed\n")
    _error("")
