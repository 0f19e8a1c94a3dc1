import math
import subprocess
import sys

import numpy as np
import pytest

from kthin.cli import main
from kthin.io import read_results, write_points


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def indices_of(text):
    return [int(ln) for ln in text.splitlines() if not ln.startswith("#")]


def test_thin_target_deterministic(capsys):
    argv = ["thin", "--target", "gaussian:d=2", "--n", "1024", "--m-rule", "half-log2",
            "--kernel", "gaussian:sigma2=2d", "--seed", "7"]
    code, out, _ = run(argv, capsys)
    assert code == 0
    assert len(indices_of(out)) == 32
    assert out.splitlines()[0].startswith("# meta: ")
    assert "seed=7" in out.splitlines()[0]
    assert run(argv, capsys)[1] == out


def test_thin_input_file(tmp_path, capsys):
    write_points(tmp_path / "pts.csv", np.random.default_rng(0).normal(size=(16, 2)))
    out_path = tmp_path / "idx.txt"
    code, _, _ = run(["thin", "--input", str(tmp_path / "pts.csv"), "--n", "16", "--m", "4", "--strict",
                      "--output", str(out_path)], capsys)
    assert code == 0
    idx = indices_of(out_path.read_text())
    assert len(idx) == 1 and 0 <= idx[0] < 16


@pytest.mark.parametrize("argv", [
    ["thin", "--target", "gaussian:d=2", "--m", "3", "--n", "12", "--strict"],
    ["thin", "--target", "gaussian:d=2", "--n", "32", "--m-rule", "half-log2"],
    ["thin", "--target", "cauchy:d=2", "--n", "16", "--m", "2"],
    ["thin", "--target", "gaussian:d=2", "--n", "16", "--m", "2", "--kernel", "matern:nu=1.5,gamma=1"],
    ["thin", "--target", "gaussian:d=2", "--n", "16", "--m", "2", "--delta", "1.5"],
    ["thin", "--n", "16", "--m", "2"],
    ["bench", "--target", "gaussian:d=2", "--sizes", "16,32"],
    ["nonsense"],
])
def test_argument_errors_exit_2(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    _, err = capsys.readouterr()
    assert code == 2
    assert err.strip()


def test_runtime_error_exit_1(tmp_path, capsys):
    code, _, err = run(["median-bandwidth", "--input", str(tmp_path / "missing.csv")], capsys)
    assert code == 1
    assert "failed" in err


def test_mmd_and_median(tmp_path, capsys):
    write_points(tmp_path / "a.csv", np.random.default_rng(1).normal(size=(10, 2)))
    code, out, _ = run(["mmd", "--x", str(tmp_path / "a.csv"), "--y", str(tmp_path / "a.csv"),
                        "--kernel", "gaussian:sigma=1"], capsys)
    assert code == 0 and float(out) == 0.0
    (tmp_path / "three.csv").write_text("0\n1\n3\n")
    code, out, _ = run(["median-bandwidth", "--input", str(tmp_path / "three.csv")], capsys)
    assert code == 0 and float(out) == 2.0


def test_balance_demo_bound_line(capsys):
    code, out, _ = run(["balance-demo", "--n", "64", "--d", "8", "--delta", "0.5", "--seed", "1"], capsys)
    assert code == 0
    vals = dict(line.split(" = ") for line in out.splitlines())
    assert float(vals["bound"]) == math.sqrt(2 * math.log(4 * 8 / 0.5) * math.log(4 * 64 / 0.5))
    assert float(vals["linf_norm"]) >= 0
    assert vals["exceeded"] in ("true", "false")


def test_bench_rows_slopes_and_rerun(tmp_path, capsys):
    argv = ["bench", "--target", "gaussian:d=2", "--sizes", "16,64,256,1024,4096", "--reps", "10", "--seed", "3"]
    code, out, _ = run(argv + ["--output", str(tmp_path / "r1.csv")], capsys)
    assert code == 0
    rows = read_results(tmp_path / "r1.csv")
    assert len(rows) == 10
    slopes = [ln for ln in out.splitlines() if ln.startswith("slope(")]
    assert [s.split(")")[0] for s in slopes] == ["slope(standard-thin", "slope(kt"]
    for s in slopes:
        float(s.split(" = ")[1])
    run(argv + ["--output", str(tmp_path / "r2.csv")], capsys)

    def strip_wall(p):
        return [ln.rsplit(",", 1)[0] for ln in p.read_text().splitlines()]

    assert strip_wall(tmp_path / "r1.csv") == strip_wall(tmp_path / "r2.csv")


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "kthin.cli", "median-bandwidth", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "--input" in res.stdout
