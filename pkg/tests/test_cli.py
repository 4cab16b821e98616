import json
import os

import pytest

from adaptcp.cli import EXIT_OK, EXIT_VALIDATION, main, run_experiment
from adaptcp.config import ExperimentConfig
from adaptcp.errors import ConfigError


def _write(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def test_minimal_simulate_adaptive_smoke(tmp_path):
    cfg = _write(
        tmp_path,
        {
            "kind": "simulate-adaptive",
            "model": {"d": 1, "N": 50, "lambda0": 2.0},
            "run": {"seed": 3},
            "output": {"directory": str(tmp_path / "out")},
        },
    )
    assert main(["--config", cfg]) == EXIT_OK
    out = tmp_path / "out"
    assert (out / "trajectory.csv").exists()
    assert (out / "metadata.json").exists()
    meta = json.loads((out / "metadata.json").read_text())
    sched = meta["config"]["resolved_schedule"]
    assert "50" in sched["delta_N"] and "50" in sched["t_N"]
    assert meta["schedule_report"]["separation_ok"]


def test_byte_identical_reruns(tmp_path):
    payload = {
        "kind": "estimate-r",
        "model": {"d": 1, "N": 20, "lambda0": 2.0, "lam": 2.0},
        "run": {"seed": 11, "trials": 5, "warmup": 3.0, "window": 3.0},
    }
    cfg = _write(tmp_path, payload)
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert main(["--config", cfg, "--out", str(out)]) == EXIT_OK
        outs.append((out / "results.csv").read_bytes())
    assert outs[0] == outs[1]


def test_different_seed_changes_numbers(tmp_path):
    payload = {
        "kind": "estimate-r",
        "model": {"d": 1, "N": 20, "lambda0": 2.0},
        "run": {"seed": 11, "trials": 5, "warmup": 3.0, "window": 3.0},
    }
    cfg = _write(tmp_path, payload)
    a = tmp_path / "a"
    b = tmp_path / "b"
    main(["--config", cfg, "--out", str(a)])
    main(["--config", cfg, "--out", str(b), "--seed", "12"])
    assert (a / "results.csv").read_bytes() != (b / "results.csv").read_bytes()


def test_unknown_keys_rejected(tmp_path):
    cfg = _write(tmp_path, {"kind": "estimate-r", "model": {"lambada": 2.0}})
    assert main(["--config", cfg]) == EXIT_VALIDATION
    with pytest.raises(ConfigError):
        ExperimentConfig({"kind": "estimate-r", "run": {"trails": 3}})
    with pytest.raises(ConfigError):
        ExperimentConfig({"kind": "not-a-kind"})


def test_override_paths(tmp_path):
    cfg = ExperimentConfig(
        {"kind": "estimate-r", "model": {"d": 1, "N": 10}, "run": {"trials": 2}}
    )
    cfg.apply_override("model.N", "24")
    assert cfg.model["N"] == 24
    with pytest.raises(ConfigError):
        cfg.apply_override("model.bogus", "1")


def test_override_flag_roundtrip(tmp_path):
    payload = {
        "kind": "oracle-check",
        "model": {"d": 1, "N": 3, "lam": 1.0},
        "run": {"trials": 2000, "seed": 5},
    }
    cfg = _write(tmp_path, payload)
    out = tmp_path / "out"
    code = main(
        ["--config", cfg, "--out", str(out), "--override", "run.trials=4000"]
    )
    assert code == EXIT_OK
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["run"]["trials"] == 4000
    assert meta["summary"]["pass"] in (True, False)


def test_oracle_check_passes(tmp_path):
    cfg = ExperimentConfig(
        {
            "kind": "oracle-check",
            "model": {"d": 1, "N": 3, "lam": 1.0},
            "run": {"trials": 20000, "seed": 1, "t": 1.0},
        }
    )
    bundle, code = run_experiment(cfg, out_dir=str(tmp_path / "o"))
    assert code == EXIT_OK
    rows = (tmp_path / "o" / "oracle_check.csv").read_text().splitlines()
    assert rows[0] == "oracle,empirical,sigma,pass"
    assert rows[1].endswith(",1")


def test_results_csv_format(tmp_path):
    cfg = ExperimentConfig(
        {
            "kind": "estimate-r",
            "model": {"d": 1, "N": 20, "lambda0": 2.0},
            "run": {"seed": 2, "trials": 4, "warmup": 2.0, "window": 2.0},
        }
    )
    bundle, code = run_experiment(cfg, out_dir=str(tmp_path / "r"))
    lines = (tmp_path / "r" / "results.csv").read_text().splitlines()
    assert lines[0] == "estimator,parameters,estimate,se,count,censored,seed"
    assert lines[1].startswith("estimate_R,")
    assert "\r" not in (tmp_path / "r" / "results.csv").read_text()


def test_rounds_experiment_tables(tmp_path):
    cfg = ExperimentConfig(
        {
            "kind": "rounds",
            "model": {
                "d": 1,
                "N": 20,
                "lambda0": 2.0,
                "schedule": {"gamma": 2.2, "epsilon0": 0.1},
                "overrides": {"t_resolution": 15.0, "density_radius": 4},
            },
            "run": {"seed": 4, "trials": 3, "rounds": 2},
        }
    )
    bundle, code = run_experiment(cfg, out_dir=str(tmp_path / "rounds"))
    text = (tmp_path / "rounds" / "rounds.csv").read_text().splitlines()
    assert text[0].startswith("N,run,round,")
    assert len(text) > 1


def test_landscape_kind(tmp_path):
    cfg = ExperimentConfig(
        {
            "kind": "landscape",
            "model": {"d": 1, "N": 30, "lambda0": 2.0,
                      "overrides": {"landscape_ell": 2}},
            "run": {"seed": 6, "samples": 300, "burn_in": 5.0},
        }
    )
    bundle, code = run_experiment(cfg, out_dir=str(tmp_path / "l"))
    assert code == EXIT_OK
    lines = (tmp_path / "l" / "landscape.csv").read_text().splitlines()
    assert lines[0] == "pattern_code,frequency,count"
    assert len(lines) > 2


def test_sbox_kind(tmp_path):
    cfg = ExperimentConfig(
        {
            "kind": "sbox",
            "model": {
                "d": 1,
                "lam": 1.0,
                "lam_prime": 4.0,
                "overrides": {"box_radius": 2, "type1_sites": [[-2], [-1], [1], [2]]},
            },
            "run": {"seed": 7, "trials": 2000},
        }
    )
    bundle, code = run_experiment(cfg, out_dir=str(tmp_path / "s"))
    assert code == EXIT_OK
    meta = json.loads((tmp_path / "s" / "metadata.json").read_text())
    assert 0.3 < meta["summary"]["estimate"] < 0.65


def test_estimate_acceptance_kind(tmp_path):
    cfg = ExperimentConfig(
        {
            "kind": "estimate-acceptance",
            "model": {
                "d": 1,
                "N": 40,
                "lam": 2.0,
                "lam_prime": 4.0,
                "overrides": {"box_radius": 5},
            },
            "run": {"seed": 8, "samples": 15, "inner_trials": 30, "burn_in": 5.0},
        }
    )
    bundle, code = run_experiment(cfg, out_dir=str(tmp_path / "a"))
    assert code == EXIT_OK
    text = (tmp_path / "a" / "results.csv").read_text()
    assert "estimate_acceptance" in text


def test_limit_sample_kind(tmp_path):
    cfg = ExperimentConfig(
        {
            "kind": "limit-sample",
            "model": {
                "d": 1,
                "lambda0": 2.0,
                "providers": {
                    "R": {"grid": [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
                          "values": [0.6] * 7},
                    "S": {"entries": [[lam, lam + 1.0, 0.5] for lam in
                                      [2.0, 3.0, 4.0, 5.0, 6.0, 7.0]]},
                },
            },
            "run": {"seed": 9, "trials": 50, "horizon": 5.0},
        }
    )
    bundle, code = run_experiment(cfg, out_dir=str(tmp_path / "lim"))
    assert code == EXIT_OK
    assert (tmp_path / "lim" / "limit_paths.csv").exists()
    assert (tmp_path / "lim" / "limit_attempts.csv").exists()


def test_diagnostics_kind(tmp_path):
    cfg = ExperimentConfig(
        {
            "kind": "diagnostics",
            "model": {"d": 1, "N": 30, "lam": 2.0},
            "run": {"seed": 10, "horizon": 8.0},
        }
    )
    bundle, code = run_experiment(cfg, out_dir=str(tmp_path / "d"))
    assert code == EXIT_OK
    rep = json.loads((tmp_path / "d" / "diagnostics.json").read_text())
    assert 0.0 <= rep["density_fraction"] <= 1.0


def test_compare_kind_small(tmp_path):
    cfg = ExperimentConfig(
        {
            "kind": "compare",
            "model": {
                "d": 1,
                "N": 40,
                "lambda0": 2.0,
                "schedule": {"gamma": 2.4, "epsilon0": 0.3},
                "kernel": {"variant": "two-point", "h_up": 1.0, "h_down": 0.5, "p": 0.5},
                "overrides": {"box_radius": 6, "density_radius": 3},
            },
            "run": {
                "seed": 11,
                "trials": 40,
                "samples": 10,
                "inner_trials": 20,
                "limit_paths": 2000,
                "warmup": 10.0,
                "window": 10.0,
                "burn_in": 5.0,
            },
        }
    )
    bundle, code = run_experiment(cfg, out_dir=str(tmp_path / "c"))
    assert code == EXIT_OK
    lines = (tmp_path / "c" / "compare.csv").read_text().splitlines()
    assert lines[0] == "statistic,value,band95,n_micro,n_limit"
    assert any(row.startswith("ks_sigma1") for row in lines[1:])


def test_capped_exit_status(tmp_path):
    from adaptcp.cli import EXIT_CAPPED

    cfg = ExperimentConfig(
        {
            "kind": "rounds",
            "model": {"d": 1, "N": 20, "lambda0": 2.0,
                      "schedule": {"gamma": 2.4, "epsilon0": 0.3},
                      "overrides": {"t_resolution": 10.0, "density_radius": 3}},
            "run": {"seed": 12, "trials": 1, "rounds": 50, "event_cap": 500},
        }
    )
    bundle, code = run_experiment(cfg, out_dir=str(tmp_path / "cap"))
    assert code == EXIT_CAPPED


def test_trajectory_export_roundtrip(tmp_path):
    import numpy as np

    from adaptcp.engines import export_trajectory_csv, run_one_type
    from adaptcp.torus import TorusSpec

    traj = run_one_type(TorusSpec(1, 8), 1.5, np.ones(8), 3.0, 77)
    csv_path = tmp_path / "traj.csv"
    meta_path = tmp_path / "traj.json"
    export_trajectory_csv(traj, csv_path, meta_path, parameters={"lam": 1.5})
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "time,site_index,old,new,cause,parent_site"
    assert len(lines) == 1 + traj.n_events
    meta = json.loads(meta_path.read_text())
    assert meta["seed"] == 77 and meta["stop_reason"] == "horizon"
    # times round-trip exactly through repr
    assert float(lines[1].split(",")[0]) == traj.events["time"][0]
