import json

import pytest

from spreadsim.experiments.cli import main

SMALL_SWEEP = """\
scenario: sweep-delta
trials: 3
seed: 8
graph: {width: 1.0, height: 0.4, radius: 0.25, node_count: 40}
raising: {M: 5.0}
sweep: {delta_over_M: [0.5, 1.0]}
"""

SMALL_PERTURB = """\
scenario: perturbation
trials: 2
seed: 8
max_rounds: 300
include_plain: true
graph: {width: 1.0, height: 0.4, radius: 0.25, node_count: 40}
raising: {M: 4.0}
sweep: {deadzone_over_K: [0.0, 1.0]}
perturbation: {kind: uniform_positive, eps_fraction: 0.05, seed: 3}
"""

SMALL_HAZARD = """\
scenario: hazard
trials: 2
seed: 8
max_rounds: 600
graph: {width: 4.0, height: 4.0, radius: 0.6, node_count: 150, source_position: [0.3, 0.3]}
raising: {M_over_xmax: 1.1}
hazard: {}
"""


def _run(tmp_path, text, scenario, name, *extra):
    cfg = tmp_path / f"{name}.yaml"
    cfg.write_text(text)
    out = tmp_path / name
    return main([scenario, "--config", str(cfg), "--out", str(out), *extra]), out


def _files(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


@pytest.mark.parametrize("text, scenario", [(SMALL_SWEEP, "sweep-delta"), (SMALL_PERTURB, "perturbation"),
                                            (SMALL_HAZARD, "hazard")])
def test_outputs_are_byte_identical(tmp_path, text, scenario):
    code_a, out_a = _run(tmp_path, text, scenario, "a")
    code_b, out_b = _run(tmp_path, text, scenario, "b", "--workers", "2")
    assert code_a == code_b
    assert _files(out_a) == _files(out_b)
    assert any(name.endswith(".csv") for name in _files(out_a))


def test_sweep_summary(tmp_path):
    code, out = _run(tmp_path, SMALL_SWEEP, "sweep-delta", "s")
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert [e["value"] for e in summary["sweep"]] == [0.5, 1.0]
    assert summary["violations"] == []
    assert all(e["unconverged"] == 0 for e in summary["sweep"])


def test_oracle_check_exit_zero(tmp_path):
    code, out = _run(tmp_path, "scenario: oracle-check\ntrials: 5\n", "oracle-check", "o")
    assert code == 0
    assert json.loads((out / "summary.json").read_text())["worst_difference"] <= 1e-9


def test_config_errors_exit_two(tmp_path, capsys):
    code, _ = _run(tmp_path, "scenario: oracle-check\nbogus: 1\n", "oracle-check", "bad")
    assert code == 2
    assert "bogus" in capsys.readouterr().err
    code, _ = _run(tmp_path, SMALL_SWEEP, "hazard", "mismatch")
    assert code == 2
    assert main(["oracle-check", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 2


def test_check_failure_exits_one(tmp_path):
    # an absolute eps above this deployment's e_min cannot be simulated
    text = SMALL_PERTURB.replace("eps_fraction: 0.05", "eps_abs: 5.0")
    code, _ = _run(tmp_path, text, "perturbation", "p")
    assert code == 1
