import json
import math
import os

import numpy as np
import pytest
import yaml

from sephydro import cli, harness, hydro
from sephydro.domain import build_domain
from sephydro.process import ProcessParams, nominal_time_scale


def small_config(tmp_path, **over):
    base = dict(d=2, m=1, alpha=1.0, L=[9, 16], tau=[0.4], replicas=40,
                master_seed=7, r_out_factor=6.0, bin_width=1.0,
                output_dir=str(tmp_path / "out"), workers=2)
    base.update(over)
    return harness.ExperimentConfig(**base)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        small_config(tmp_path, L=[16, 9])
    with pytest.raises(ValueError):
        small_config(tmp_path, L=[])
    with pytest.raises(ValueError):
        small_config(tmp_path, alpha=2.0)
    with pytest.raises(ValueError):
        small_config(tmp_path, tau=[])
    cfg = small_config(tmp_path, time_scale="2dm")
    assert cfg.scale_value() == nominal_time_scale(2, 1)
    assert small_config(tmp_path, time_scale="dm").scale_value() == 2.0
    assert small_config(tmp_path, time_scale=3.5).scale_value() == 3.5


def test_config_from_yaml_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({"d": 2, "bogus": 1}))
    with pytest.raises(ValueError):
        harness.ExperimentConfig.from_yaml(str(path))


def test_fit_time_scale_synthetic():
    # synthetic profile generated from phi at a known scale
    d, alpha, L, tau = 3, 1.0, 64, 0.5
    s0 = 3.0
    base = nominal_time_scale(d, 1)  # simulated-at scale
    chis = np.linspace(1.05, 3.5, 40)
    tau_true = tau * base / s0
    means = hydro.phi_profile(chis, tau_true, alpha, d)
    rng = np.random.default_rng(0)
    noisy = means + rng.normal(0, 0.004, means.shape)
    fitted = harness.fit_time_scale(chis, noisy, np.full_like(means, 0.004),
                                    tau, base, d, alpha)
    assert abs(fitted - s0) / s0 < 0.05


def test_fit_time_scale_non_identifiable():
    chis = np.linspace(1.1, 3, 20)
    with pytest.raises(harness.NonIdentifiable):
        harness.fit_time_scale(chis, np.zeros(20), np.full(20, 1e-4),
                               0.5, 4.0, 2, 0.0)


def test_run_experiment_alpha_zero(tmp_path):
    cfg = small_config(tmp_path, alpha=0.0, L=[9], replicas=10)
    report = harness.run_experiment(cfg, write_artifacts=False)
    entry = report.entries[0]
    assert entry["max_gap"] == 0.0
    assert report.fitted_scales[9] is None
    assert entry["n_frozen"] == 10  # empty sink system is frozen immediately


def test_run_experiment_tau_zero(tmp_path):
    cfg = small_config(tmp_path, tau=[0.0], L=[9], replicas=5)
    report = harness.run_experiment(cfg, write_artifacts=False)
    assert report.entries[0]["max_gap"] == 0.0
    assert report.entries[0]["tau_eff"] == 0.0


def test_run_experiment_writes_deterministic_artifacts(tmp_path):
    cfg = small_config(tmp_path, L=[9], replicas=25)
    harness.run_experiment(cfg)
    name = "density_d2_m1_L9_tau0.4.csv"
    first = (tmp_path / "out" / name).read_bytes()
    summary1 = json.loads((tmp_path / "out" / "summary.json").read_text())
    harness.run_experiment(cfg)
    assert (tmp_path / "out" / name).read_bytes() == first
    summary2 = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary1 == summary2
    header = first.decode().splitlines()[0]
    assert header == "bin_mid_chi,mean,stderr,n"


def test_compare_from_artifacts_roundtrip(tmp_path):
    cfg = small_config(tmp_path, L=[9], replicas=30)
    harness.simulate_to_csv(cfg)
    report = harness.compare_from_artifacts(cfg)
    assert len(report.entries) == 1
    assert os.path.exists(tmp_path / "out" / "summary.json")
    live = harness.run_experiment(cfg, write_artifacts=False)
    # CSVs carry 10 significant digits
    assert report.entries[0]["max_gap"] == pytest.approx(
        live.entries[0]["max_gap"], rel=1e-8, abs=1e-8)


def test_compare_missing_artifacts(tmp_path):
    cfg = small_config(tmp_path)
    with pytest.raises(FileNotFoundError):
        harness.compare_from_artifacts(cfg)


def test_thresholds(tmp_path):
    cfg = small_config(tmp_path, L=[9], replicas=30,
                       thresholds={"max_gap": 1e-9})
    report = harness.run_experiment(cfg, write_artifacts=False)
    ok, msgs = harness.thresholds_pass(cfg, report)
    assert not ok
    cfg.thresholds = {"max_gap": 0.5}
    ok, _ = harness.thresholds_pass(cfg, report)
    assert ok


def test_convergence_study_requires_three_L(tmp_path):
    cfg = small_config(tmp_path)
    with pytest.raises(ValueError):
        harness.convergence_study(cfg)


def test_duality_site_check_small():
    dom = build_domain(2, 2, 10)
    params = ProcessParams(m=1, alpha=1.0)
    rows = harness.duality_site_check(dom, params, 6.0, [(4, 0), (0, 5)],
                                      800, 99, workers=2)
    for row in rows:
        assert abs(row["z"]) < 4.0, row


def test_rout_sensitivity_smoke():
    res = harness.rout_sensitivity(1, 1, 1.0, 9, 0.3, 60, 5,
                                   factors=(4.0, 8.0), workers=2)
    assert math.isfinite(res["max_gap"])
    assert res["max_gap_over_se"] < 6.0


def test_cli_simulate_compare_roundtrip(tmp_path):
    cfgd = dict(d=2, m=1, alpha=1.0, L=[9], tau=[0.4], replicas=25,
                master_seed=3, r_out_factor=6.0,
                output_dir=str(tmp_path / "o"),
                thresholds={"max_gap": 0.5}, workers=2)
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump(cfgd))
    assert cli.main(["simulate", "--config", str(path)]) == 0
    assert cli.main(["compare", "--config", str(path)]) == 0
    cfgd["thresholds"] = {"max_gap": 1e-9}
    path.write_text(yaml.safe_dump(cfgd))
    assert cli.main(["compare", "--config", str(path)]) == 1


def test_cli_hitting_and_pde(tmp_path, capsys):
    assert cli.main(["hitting", "--d", "3", "--tau", "1", "--r", "2"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("r,tau,cdf")
    assert "0.1586552539" in out

    target = tmp_path / "pde.csv"
    assert cli.main(["pde", "--d", "3", "--alpha", "1", "--tau-end", "0.2",
                     "--dr", "0.05", "--dtau", "0.01",
                     "--out", str(target)]) == 0
    assert target.exists()
    meta = json.loads((str(target) + ".meta.json") and
                      open(str(target) + ".meta.json").read())
    assert meta["kind"] == "density"

    res = tmp_path / "res.csv"
    assert cli.main(["pde", "--residual", "--d", "1", "--alpha", "0.5",
                     "--r-range", "1.5:3:3", "--tau-range", "0.5:1:2",
                     "--out", str(res)]) == 0
    lines = res.read_text().splitlines()
    assert lines[0] == "r,tau,residual"
    assert len(lines) == 7


def test_cli_duality_check(capsys):
    code = cli.main(["duality-check", "--interior-sites", "3", "--m", "2",
                     "--alpha", "0.7", "--t", "1.0",
                     "--s", "0,1,2,0,0", "--s-prime", "0,1,0,1,0"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["gap"] <= 1e-8


def test_cli_duality_check_bad_length(capsys):
    code = cli.main(["duality-check", "--interior-sites", "3", "--m", "2",
                     "--alpha", "0.7", "--t", "1.0",
                     "--s", "0,1", "--s-prime", "0,1,0,1,0"])
    assert code == 2
