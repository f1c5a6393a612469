import json

import numpy as np
import pytest

from weakdrive import cli
from weakdrive.config import parse_config
from weakdrive.coupling import coupling_matrix
from weakdrive.errors import ConfigError
from weakdrive.geometry import Drive, PlaneWave, explicit_ensemble
from weakdrive.perturbation import steady_state
from weakdrive.reporting import config_hash
from weakdrive.runner import ResultBundle, run_validate

PAIR_CONFIG = {
    "geometry": {"mode": "explicit", "positions": [[0, 0, 0], [1.0, 0, 0]]},
    "dipole": [0, 0, 1],
    "beam": {"direction": [0, 1, 0]},
    "delta": 0.0,
    "eta": 0.05,
    "partition": {"A": [0], "B": [1]},
    "seed": 7,
}


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_solve_matches_closed_form(tmp_path, capsys):
    cfg = _write(tmp_path, PAIR_CONFIG)
    out = tmp_path / "out"
    assert cli.main(["solve", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    ens = explicit_ensemble(PAIR_CONFIG["geometry"]["positions"], [0, 0, 1])
    drive = Drive(delta=0.0, eta=0.05, beam=PlaneWave(np.array([0.0, 1.0, 0.0])))
    state = steady_state(coupling_matrix(ens), drive, ens)
    z12 = coupling_matrix(ens).dense()[0, 1]
    v_closed = -2.0 * z12 / (0.5 + z12) ** 2
    expected = drive.eta**2 * abs(v_closed)
    assert report["negativity"]["negativity2"] == pytest.approx(expected, rel=1e-12)
    assert "provenance" in report
    assert (out / "u.csv").exists() and (out / "v.csv").exists()


def test_solve_optional_coupling_dump(tmp_path):
    config = dict(PAIR_CONFIG)
    config["dump_coupling"] = True
    cfg = _write(tmp_path, config)
    out = tmp_path / "out"
    assert cli.main(["solve", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "z.csv").read_text().strip().splitlines()
    assert lines[0] == "mu,nu,re,im"
    assert len(lines) == 1 + 4  # full 2 x 2 table
    assert (out / "curve.csv").read_text().startswith("eta,N_model")


def test_seed_flag_overrides_config(tmp_path):
    config = {
        "geometry": {"mode": "random", "count": 3, "box": 30.0, "min_distance": 1.0},
        "dipole": [0, 0, 1],
        "beam": {"direction": [0, 1, 0]},
        "delta": 0.0,
        "eta": 0.05,
        "partition": {"A": [0], "B": [1, 2]},
        "seed": 1,
    }
    cfg = _write(tmp_path, config)
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert cli.main(["solve", "--config", cfg, "--out", str(out1)]) == 0
    assert cli.main(["solve", "--config", cfg, "--out", str(out2), "--seed", "2"]) == 0
    rep1 = json.loads((out1 / "report.json").read_text())
    rep2 = json.loads((out2 / "report.json").read_text())
    assert rep1["provenance"]["seed"] == 1
    assert rep2["provenance"]["seed"] == 2
    assert (out1 / "u.csv").read_text() != (out2 / "u.csv").read_text()


def test_sweep_exact_with_embedded_partition(tmp_path):
    # exact column must trace out the third atom before transposing
    config = {
        "geometry": {
            "mode": "explicit",
            "positions": [[0, 0, 0], [1.2, 0, 0], [0, 1.5, 0]],
        },
        "dipole": [0, 0, 1],
        "beam": {"direction": [0, 1, 0]},
        "delta": 0.0,
        "eta_sweep": {"min": 0.01, "max": 0.02, "points": 2},
        "partition": {"A": [0], "B": [1]},
        "seed": 1,
        "exact": True,
    }
    cfg = _write(tmp_path, config)
    out = tmp_path / "out"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "sweep.csv").read_text().strip().splitlines()[1:]
    for row in rows:
        eta, n_model, n_pt, n_exact = map(float, row.split(","))
        assert abs(n_exact - n_pt) <= 20.0 * eta**3


def test_rerun_is_bit_identical(tmp_path):
    cfg = _write(tmp_path, PAIR_CONFIG)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["solve", "--config", cfg, "--out", str(out1)]) == 0
    assert cli.main(["solve", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    assert (out1 / "v.csv").read_bytes() == (out2 / "v.csv").read_bytes()


def test_empty_partition_rejected(tmp_path, capsys):
    bad = dict(PAIR_CONFIG)
    bad["partition"] = {"A": [], "B": [1]}
    cfg = _write(tmp_path, bad)
    assert cli.main(["solve", "--config", cfg]) == 2
    assert "partition.A" in capsys.readouterr().err


def test_unknown_field_rejected(tmp_path, capsys):
    bad = dict(PAIR_CONFIG)
    bad["mystery"] = 1
    cfg = _write(tmp_path, bad)
    assert cli.main(["solve", "--config", cfg]) == 2
    assert "mystery" in capsys.readouterr().err


def test_dark_groups_still_correlated(tmp_path):
    config = {
        "geometry": {
            "mode": "explicit",
            "positions": [[0, 0, 0], [40.0, 0, 0], [0, 55.0, 0]],
        },
        "dipole": [0, 0, 1],
        "beam": {"direction": [0, 1, 0], "mask": [1, 2]},
        "delta": 0.0,
        "eta": 0.05,
        "partition": {"A": [1], "B": [2]},
        "seed": 1,
    }
    cfg = _write(tmp_path, config)
    out = tmp_path / "out"
    assert cli.main(["solve", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["negativity"]["negativity2"] > 0.0
    rows = (out / "v.csv").read_text().strip().splitlines()[1:]
    dark_pair = [r for r in rows if r.startswith("1,2,")][0]
    re_part, im_part = map(float, dark_pair.split(",")[2:])
    assert abs(complex(re_part, im_part)) > 0.0


def test_sweep_parallel_determinism(tmp_path):
    config = dict(PAIR_CONFIG)
    del config["eta"]
    config["eta_sweep"] = {"min": 0.01, "max": 0.05, "points": 9}
    config["exact"] = True
    cfg = _write(tmp_path, config)
    out1, out2 = tmp_path / "p1", tmp_path / "p2"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out1), "--parallel", "1"]) == 0
    assert cli.main(["sweep", "--config", cfg, "--out", str(out2), "--parallel", "2"]) == 0
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()
    header = (out1 / "sweep.csv").read_text().splitlines()[0]
    assert header == "eta,N_model,N_pt,N_exact"


def test_sweep_farfield_pair_threshold_matches_bound(tmp_path):
    # one atom per group at k0 D = 1e6; the transverse offset pi/3 sets the
    # drive phases so |w_1^2 + w_2^2| = 1, the normalisation behind the
    # guaranteed-entanglement window
    config = {
        "geometry": {
            "mode": "explicit",
            "positions": [[0, 0, 0], [1e6, np.pi / 3, 0]],
        },
        "dipole": [0, 0, 1],
        "beam": {"direction": [0, 1, 0]},
        "delta": 0.0,
        "eta_sweep": {"min": 0.0002, "max": 0.0008, "points": 31},
        "partition": {"A": [0], "B": [1]},
        "seed": 3,
    }
    cfg = _write(tmp_path, config)
    out = tmp_path / "out"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    omega_numeric = report["threshold"]["omega_sweep_estimate"]
    from weakdrive.farfield import bound_omega, farfield_parameters

    distance = np.hypot(1e6, np.pi / 3)
    bound = bound_omega(farfield_parameters(distance, np.pi / 2, 1, 1, delta=0.0))
    assert abs(omega_numeric - bound) / bound <= 0.01


def test_sweep_below_threshold_all_positive(tmp_path):
    config = dict(PAIR_CONFIG)
    del config["eta"]
    # closing amplitude for this pair sits near eta ~ 0.18; stay well under
    config["eta_sweep"] = {"min": 0.005, "max": 0.05, "points": 7}
    cfg = _write(tmp_path, config)
    out = tmp_path / "out"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "sweep.csv").read_text().strip().splitlines()[1:]
    for row in rows:
        eta, n_model, n_pt = map(float, row.split(","))
        assert n_model > 0.0
        assert n_pt > 0.0


def test_sweep_records_point_failures_and_continues(tmp_path, monkeypatch):
    import weakdrive.runner as runner_mod
    from weakdrive.errors import SolverConvergenceError

    real = runner_mod.steady_state_exact

    def flaky(liouv):
        # fail one grid point; the sweep must keep the others
        if flaky.calls == 1:
            flaky.calls += 1
            raise SolverConvergenceError(1.0, 0)
        flaky.calls += 1
        return real(liouv)

    flaky.calls = 0
    monkeypatch.setattr(runner_mod, "steady_state_exact", flaky)
    config = dict(PAIR_CONFIG)
    del config["eta"]
    config["eta_sweep"] = {"min": 0.01, "max": 0.03, "points": 3}
    config["exact"] = True
    cfg = parse_config(config, "sweep")
    bundle = runner_mod.run_sweep(cfg, parallelism=1)
    assert len(bundle.report["point_errors"]) == 1
    header, rows = bundle.tables["sweep"]
    assert len(rows) == 2
    assert bundle.report["threshold"]["eta_model"] is not None


def test_report_without_pt_spectrum():
    from weakdrive.geometry import Partition
    from weakdrive.negativity import negativity_report

    ens = explicit_ensemble(PAIR_CONFIG["geometry"]["positions"], [0, 0, 1])
    drive = Drive(delta=0.0, eta=0.05, beam=PlaneWave(np.array([0.0, 1.0, 0.0])))
    state = steady_state(coupling_matrix(ens), drive, ens)
    rep = negativity_report(state, Partition((0,), (1,)), include_pt=False)
    assert rep.pt_spectrum is None and rep.negativity_pt is None
    assert "pt_spectrum" not in rep.to_dict()
    assert rep.negativity2 > 0


def test_bounds_task(tmp_path):
    config = {
        "delta": 0.0,
        "farfield": {
            "k0_distance": 1e7,
            "theta": np.pi / 2,
            "n_a": 100,
            "n_b": 100,
            "omega_over_gamma": 0.1,
            "mean_spacing": 1.0,
        },
    }
    cfg = _write(tmp_path, config)
    out = tmp_path / "out"
    assert cli.main(["bounds", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert set(report) >= {"D0", "bound_omega", "N_max", "eta_max", "L_min", "n_min"}
    assert 48.0 <= report["L_min"] <= 54.0


def test_oracle_compare_errors(tmp_path, capsys):
    config = dict(PAIR_CONFIG)
    del config["eta"]
    config["eta_sweep"] = {"min": 0.01, "max": 0.04, "points": 3}
    config["partition"] = {"A": [0], "B": []}
    cfg = _write(tmp_path, config)
    assert cli.main(["oracle-compare", "--config", cfg]) == 2

    # partition not covering the ensemble
    config["geometry"] = {
        "mode": "explicit",
        "positions": [[0, 0, 0], [1.0, 0, 0], [0, 2.0, 0]],
    }
    config["partition"] = {"A": [0], "B": [1]}
    cfg = _write(tmp_path, config)
    assert cli.main(["oracle-compare", "--config", cfg]) == 2

    # too many atoms for the exact solver -> numerical failure
    config["geometry"] = {
        "mode": "explicit",
        "positions": [[float(i), 0.0, 0.0] for i in range(6)],
    }
    config["partition"] = {"A": [0, 1, 2], "B": [3, 4, 5]}
    cfg = _write(tmp_path, config)
    assert cli.main(["oracle-compare", "--config", cfg]) == 3


def test_oracle_compare_table(tmp_path):
    config = dict(PAIR_CONFIG)
    del config["eta"]
    config["eta_sweep"] = {"min": 0.01, "max": 0.03, "points": 3}
    cfg = _write(tmp_path, config)
    out = tmp_path / "out"
    assert cli.main(["oracle-compare", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "oracle.csv").read_text().strip().splitlines()
    assert lines[0] == "eta,N_exact,N_perturbative,abs_error"
    eta, n_exact, n_pt, err = map(float, lines[1].split(","))
    assert err == pytest.approx(abs(n_exact - n_pt), rel=1e-12)
    assert err < 1e-5


def test_validate_cli_and_fault_injection(capsys):
    assert cli.main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "PASS z_symmetry" in out
    bundle = run_validate(parse_config({"seed": 1}, "validate"), inject="z_asymmetry")
    broken = {c["name"]: c for c in bundle.report["checks"]}
    assert not broken["z_symmetry"]["passed"]
    assert not bundle.report["all_passed"]


def test_validate_exit_code_on_failure(monkeypatch, capsys):
    failing = ResultBundle(
        report={
            "checks": [
                {"name": "synthetic", "passed": False, "measured": 1.0, "threshold": 0.0}
            ],
            "all_passed": False,
        }
    )
    monkeypatch.setitem(cli.TASK_RUNNERS, "validate", lambda cfg, parallelism=1: failing)
    assert cli.main(["validate"]) == 4


def test_parallel_flag_must_be_positive(capsys):
    assert cli.main(["validate", "--parallel", "0"]) == 2


def test_seed_override_changes_hash(tmp_path):
    data = dict(PAIR_CONFIG)
    base = config_hash(parse_config(data, "solve").raw)
    data2 = dict(PAIR_CONFIG)
    data2["seed"] = 8
    other = config_hash(parse_config(data2, "solve").raw)
    assert base != other
    assert base == config_hash(parse_config(dict(PAIR_CONFIG), "solve").raw)


def test_config_validation_details():
    with pytest.raises(ConfigError, match="eta"):
        parse_config({**PAIR_CONFIG, "eta_sweep": {"min": 0.1, "max": 0.2, "points": 3}}, "solve")
    with pytest.raises(ConfigError, match=r"geometry\.mode"):
        parse_config({**PAIR_CONFIG, "geometry": {"mode": "ring"}}, "solve")
    with pytest.raises(ConfigError, match=r"eta_sweep\.min"):
        cfg = dict(PAIR_CONFIG)
        del cfg["eta"]
        parse_config({**cfg, "eta_sweep": {"min": 0.5, "max": 0.2, "points": 3}}, "sweep")
    with pytest.raises(ConfigError, match=r"beam\.mask"):
        bad = dict(PAIR_CONFIG)
        bad["beam"] = {"direction": [0, 1, 0], "mask": [-1]}
        parse_config(bad, "solve")
