import json
import subprocess
import sys

import pytest

from spatialrumor import cli, harris
from spatialrumor.lattice import Configuration

FAST = {
    "simulate": ["--side", "20", "--t-max", "5", "--events", "true", "--plot", "true"],
    "couple": ["--side", "16", "--t-max", "5", "--replicas", "3", "--dump-arrivals", "true", "--plot", "true"],
    "meanfield": ["--lambda", "2", "--alpha", "1", "--t-max", "5", "--record-every", "100", "--plot", "true"],
    "oracle-check": ["--side", "3", "--replicas", "3000", "--threshold", "0.1"],
    "sweep": ["--side", "16", "--T", "3", "--replicas", "10", "--lambdas", "1,3", "--alphas", "0,2",
              "--plot", "true"],
    "block": ["--L", "4", "--replicas", "10"],
}

EXPECTED = {
    "simulate": {"trajectory.csv", "events.csv", "summary.json", "trajectory.png"},
    "couple": {"rumor_trajectory.csv", "contact_trajectory.csv", "arrivals.csv", "dominance.json", "coupling.png"},
    "meanfield": {"meanfield.csv", "stability.json", "meanfield.png"},
    "oracle-check": {"oracle_check.json", "oracle.json"},
    "sweep": {"sweep.csv", "sweep.png"},
    "block": {"block.json"},
}


def run(command, tmp_path, name, *extra, seed="7"):
    out = tmp_path / name
    argv = [command, "--out", str(out), *FAST[command], *extra]
    if seed is not None:
        argv += ["--seed", seed]
    return cli.main(argv), out


@pytest.mark.parametrize("command", sorted(FAST))
def test_subcommand_outputs_are_reproducible(command, tmp_path):
    code_a, a = run(command, tmp_path, "a")
    code_b, b = run(command, tmp_path, "b")
    assert code_a == code_b == 0
    names = {p.name for p in a.iterdir()}
    assert names == EXPECTED[command]
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_csv_header_carries_config(tmp_path):
    _, out = run("simulate", tmp_path, "a")
    first, second = out.joinpath("trajectory.csv").read_text().splitlines()[:2]
    assert first.startswith("# config: ")
    cfg = json.loads(first[len("# config: "):])
    assert cfg["command"] == "simulate" and cfg["seed"] == 7 and cfg["side"] == 20
    assert second == "t,n_ignorant,n_spreader,n_stifler"
    summary = json.loads(out.joinpath("summary.json").read_text())
    assert summary["config"] == cfg


def test_json_format(tmp_path):
    _, out = run("simulate", tmp_path, "a", "--format", "json")
    data = json.loads(out.joinpath("trajectory.json").read_text())
    assert data["columns"] == ["t", "n_ignorant", "n_spreader", "n_stifler"]
    assert data["rows"][0] == {"t": 0.0, "n_ignorant": 19, "n_spreader": 1, "n_stifler": 0}


def test_zero_horizon_gives_one_record(tmp_path):
    out = tmp_path / "z"
    assert cli.main(["simulate", "--seed", "1", "--t-max", "0", "--out", str(out)]) == 0
    lines = [line for line in out.joinpath("trajectory.csv").read_text().splitlines() if not line.startswith("#")]
    assert len(lines) == 2


def test_meanfield_needs_no_seed(tmp_path):
    code, out = run("meanfield", tmp_path, "m", seed=None)
    assert code == 0
    stab = json.loads(out.joinpath("stability.json").read_text())
    assert stab["classification"] == "Unstable" and stab["eigenvalues"] == [1.0, -1.0]


def test_missing_seed(tmp_path, capsys):
    code, _ = run("simulate", tmp_path, "a", seed=None)
    assert code == 2
    assert "seed" in capsys.readouterr().err


@pytest.mark.parametrize("extra", [["--lambda", "-1"], ["--engine", "warp"], ["--side", "x"], ["--side", "2"]])
def test_bad_values_exit_2(tmp_path, extra):
    code, _ = run("simulate", tmp_path, "a", *extra)
    assert code == 2


def test_config_file(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# a comment\nside = 12\nt_max = 2  # inline\nlambda = 3\n")
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", str(conf), "--seed", "1", "--side", "14", "--out", str(out)]) == 0
    cfg = json.loads(out.joinpath("summary.json").read_text())["config"]
    # the flag overrides the file, the file overrides the default
    assert cfg["side"] == 14 and cfg["t_max"] == 2.0 and cfg["lambda"] == 3.0 and cfg["alpha"] == 0.0


def test_unknown_config_key(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("sidee = 12\n")
    assert cli.main(["simulate", "--config", str(conf), "--seed", "1", "--out", str(tmp_path / "o")]) == 2
    conf.write_text("no equals sign\n")
    assert cli.main(["simulate", "--config", str(conf), "--seed", "1", "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["simulate", "--config", str(tmp_path / "missing"), "--seed", "1"]) == 2


def test_oracle_cap_exceeded(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["oracle-check", "--seed", "1", "--side", "9", "--replicas", "10", "--out", str(out)]) == 4


def test_oracle_failure_exit_3(tmp_path):
    out = tmp_path / "o"
    argv = ["oracle-check", "--seed", "1", "--side", "3", "--replicas", "20", "--threshold", "0.001", "--out", str(out)]
    assert cli.main(argv) == 3
    assert json.loads(out.joinpath("oracle_check.json").read_text())["pass"] is False


def test_couple_violation_exit_3(tmp_path, monkeypatch):
    real = harris.drive

    def broken(eta0, stream, xi0=None, log=True):
        # start the contact copy empty so every infection breaks dominance
        if xi0 is not None:
            xi0 = Configuration.empty(eta0.lattice)
        return real(eta0, stream, xi0, log)

    monkeypatch.setattr(harris, "drive", broken)
    code, out = run("couple", tmp_path, "c")
    assert code == 3
    report = json.loads(out.joinpath("dominance.json").read_text())
    assert report["violations"] and all("replica" in v for v in report["violations"])


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "spatialrumor", "meanfield", "--t-max", "1", "--out", str(tmp_path / "m")],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0, res.stderr
