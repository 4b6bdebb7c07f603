import json
import subprocess
import sys

import pytest

from reactcoef.cli import main


def read_all(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_forward_writes_dumps(tmp_path):
    assert main(["forward", "--level", "4", "--out", str(tmp_path / "a")]) == 0
    lines = (tmp_path / "a" / "neumann.txt").read_text().splitlines()
    assert len(lines) == 25 and len(lines[0].split()) == 3
    assert main(["forward", "--level", "4", "--out", str(tmp_path / "b")]) == 0
    assert read_all(tmp_path / "a") == read_all(tmp_path / "b")


def test_forward_beta_from_dump(tmp_path):
    main(["forward", "--level", "4", "--out", str(tmp_path)])
    assert main(["forward", "--level", "4", "--beta", str(tmp_path / "neumann.txt"),
                 "--out", str(tmp_path / "c")]) == 2  # negative values are not admissible
    assert main(["forward", "--level", "8", "--beta", str(tmp_path / "neumann.txt"),
                 "--out", str(tmp_path / "d")]) == 2


@pytest.mark.parametrize("argv", [["forward", "--level", "0"], ["forward", "--gamma", "north"],
                                  ["forward", "--abcd", "1,2"], ["invert", "--rho-rule", "cubic"]])
def test_invalid_input_exit_code(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_gradcheck(capsys):
    assert main(["gradcheck", "--level", "4", "--directions", "5"]) == 0
    assert capsys.readouterr().out.count("direction") == 5
    assert main(["gradcheck", "--consistent", "--directions", "2"]) == 0
    norm = float(capsys.readouterr().out.splitlines()[0].split()[-1])
    assert norm <= 1e-9
    assert main(["gradcheck", "--flip-sign"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_invert_and_config(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"level": 4, "seed": 3, "max-iter": 4, "out": str(tmp_path / "x")}))
    assert main(["invert", "--config", str(cfg), "--seed", "5"]) == 0
    man = json.loads((tmp_path / "x" / "manifest.json").read_text())
    assert man["seed"] == 5 and man["max_iter"] == 4 and man["level"] == 4
    hist = (tmp_path / "x" / "history.csv").read_text().splitlines()
    assert hist[0] == "k,J,grad_norm,mu,Q,halvings" and len(hist) == 5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": 1}))
    assert main(["invert", "--config", str(bad)]) == 2


def test_example_commands(tmp_path):
    out = tmp_path / "missing" / "ex1"
    assert main(["example", "1", "--levels", "4,8", "--out", str(out)]) == 0
    assert len((out / "errors.csv").read_text().splitlines()) == 3
    out4 = tmp_path / "ex4"
    assert main(["example", "4", "--I", "1,6,16", "--levels", "4", "--max-iter", "3",
                 "--out", str(out4)]) == 0
    rows = (out4 / "measurements.csv").read_text().splitlines()
    assert len(rows) == 4 and [r.split(",")[0] for r in rows[1:]] == ["1", "6", "16"]
    assert main(["example", "2", "--levels", "4", "--max-iter", "2", "--rho-rule", "h2e-0,h2e-3",
                 "--out", str(tmp_path / "ex2")]) == 0
    assert len((tmp_path / "ex2" / "regularization.csv").read_text().splitlines()) == 3


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "reactcoef", "forward", "--level", "2",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "dirichlet.txt").exists()
