import hashlib
import io
import json
import subprocess
import sys

import pytest

from dtolab import cli


def run_main(argv):
    try:
        return cli.main(argv)
    except SystemExit as exc:
        return exc.code


def test_missing_required_flag_is_usage_error(capsys):
    assert run_main(["wilson2d"]) == cli.EXIT_USAGE
    assert "--L" in capsys.readouterr().err


def test_unknown_flag_is_usage_error():
    assert run_main(["perturb", "--bogus", "1"]) == cli.EXIT_USAGE


def test_bad_value_is_usage_error():
    assert run_main(["spectrum", "--L", "5"]) == cli.EXIT_USAGE
    assert run_main(["perturb", "--L", "1"]) == cli.EXIT_USAGE


def test_spectrum_manifest(tmp_path):
    assert run_main(["spectrum", "--L", "2", "--h", "0", "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "spectrum.json").read_text())
    assert man["report"]["null_dim"] == 4
    assert man["report"]["splitting"] < 1e-12
    text = (tmp_path / "spectrum.csv").read_text()
    assert man["sha256"] == hashlib.sha256(text.encode()).hexdigest()
    assert man["status"] == "ok"


def test_perturb_table(tmp_path):
    assert run_main(["perturb", "--L", "8,16", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "perturb.csv").read_text().splitlines()
    head = lines[0].split(",")
    assert head[:5] == ["L", "delta1", "delta2", "delta3", "delta4"]
    for line in lines[1:]:
        assert abs(float(line.split(",")[4])) < 1e-10


def test_config_precedence(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[perturb]\nL = 4,6\nh = 0.5\n")
    out1 = tmp_path / "a"
    assert run_main(["perturb", "--config", str(ini), "--out", str(out1)]) == 0
    cfg = json.loads((out1 / "perturb.json").read_text())["config"]
    assert cfg["L"] == [4, 6] and cfg["h"] == 0.5
    out2 = tmp_path / "b"
    assert run_main(["perturb", "--config", str(ini), "--h", "2", "--out", str(out2)]) == 0
    cfg = json.loads((out2 / "perturb.json").read_text())["config"]
    assert cfg["L"] == [4, 6] and cfg["h"] == 2.0
    bad = tmp_path / "bad.ini"
    bad.write_text("[perturb]\nnonsense = 1\n")
    assert run_main(["perturb", "--config", str(bad)]) == cli.EXIT_USAGE


def test_wilson2d_zero_field_is_exact():
    buf = io.StringIO()
    cfg = cli._resolve("wilson2d", cli._build_parser().parse_args(
        ["wilson2d", "--L", "6", "--h", "0", "--sweeps", "50"]))
    assert cli.run("wilson2d", cfg, None, stdout=buf) == 0
    rows = [r.split(",") for r in buf.getvalue().splitlines()[1:]]
    assert all(float(x) == 1.0 for r in rows for x in r[1:2] + r[3:])


def test_reproducible_and_thread_invariant(tmp_path):
    args = ["relax3d", "--L", "4", "--h", "0.05", "--n-traj", "6", "--t-max", "20",
            "--n-times", "8", "--baseline", "tail", "--tail-from", "30", "--tail-to", "40"]
    digests = []
    for i, threads in enumerate(["1", "1", "3"]):
        out = tmp_path / str(i)
        run_main(args + ["--threads", threads, "--out", str(out)])
        digests.append(json.loads((out / "relax3d.json").read_text())["sha256"])
    assert digests[0] == digests[1] == digests[2]
    out = tmp_path / "other"
    run_main(args + ["--seed", "1", "--out", str(out)])
    assert json.loads((out / "relax3d.json").read_text())["sha256"] != digests[0]


def test_entropy_and_oracle_check(tmp_path):
    assert run_main(["entropy", "--L", "2", "--h", "0.1", "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "entropy.json").read_text())
    assert man["n_regions"] == 4 and man["max_abs_difference"] < 1e-10
    assert run_main(["oracle-check", "--out", str(tmp_path)]) == 0


def test_lifetime_timeout_exit_code(tmp_path):
    code = run_main(["lifetime3d", "--L", "4", "--h", "0", "--n-traj", "2",
                     "--max-sweeps", "3", "--out", str(tmp_path)])
    assert code == cli.EXIT_TIMEOUT
    assert json.loads((tmp_path / "lifetime3d.json").read_text())["status"] == "Timeout"


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "dtolab", "perturb", "--L", "4"],
                       capture_output=True, text=True, check=True)
    assert r.stdout.startswith("L,delta1")
