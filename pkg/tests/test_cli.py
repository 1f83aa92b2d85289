import json
import shutil
import subprocess
import sys

import pytest

from rayclass.cli import main


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def workdir(tmp_path):
    assert run("gen-scenes", "--count", 2, "--seed", 3, "--out", tmp_path / "s.json") == 0
    assert run("fingerprint", "--scenes", tmp_path / "s.json", "--rays", 5, "--length", 40, "--grid", 10,
               "--out", tmp_path / "d.jsonl") == 0
    return tmp_path


def test_pipeline(workdir):
    d = workdir
    assert run("train", "--data", d / "d.jsonl", "--arch", "8,4", "--epochs", 2, "--out", d / "m.json") == 0
    meta = json.loads((d / "m.json").read_text())["meta"]
    assert meta["M"] == 5 and meta["r"] == 40 and meta["dims"] == 2 and meta["gamma"] == {"kind": "reciprocal"}
    assert meta["directions"]["scheme"] == "evenly-spaced-2d" and len(meta["history"]) == 2
    assert run("eval", "--model", d / "m.json", "--data", d / "d.jsonl", "--out", d / "e.json") == 0
    ev = json.loads((d / "e.json").read_text())
    assert sum(map(sum, ev["confusion"])) == 200 == ev["n"]
    assert run("gen-scenes", "--count", 1, "--seed", 77, "--out", d / "t.json") == 0
    assert run("failure-map", "--model", d / "m.json", "--scenes", d / "t.json", "--grid", 5, "--out", d / "f.csv") == 0
    assert len((d / "f.csv").read_text().splitlines()) == 26
    assert run("class-means", "--data", d / "d.jsonl", "--out", d / "c.csv") == 0


def test_three_d_and_csv_format(tmp_path):
    assert run("gen-scenes", "--dim", 3, "--kind", "triple-dot", "--count", 1, "--out", tmp_path / "s.json") == 0
    assert run("fingerprint", "--scenes", tmp_path / "s.json", "--rays", 8, "--length", 20, "--grid", 4,
               "--gamma", "exponential:0.1", "--out", tmp_path / "d.csv") == 0
    assert (tmp_path / "d.csv").read_text().startswith("# meta: ")


def test_errors_are_one_line(workdir, capsys):
    assert run("eval", "--model", workdir / "missing.json", "--data", workdir / "d.jsonl", "--out",
               workdir / "e.json") == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "error" in err[0]

    bad = workdir / "bad.jsonl"
    lines = (workdir / "d.jsonl").read_text().splitlines()
    bad.write_text("\n".join(lines[:3] + ["{broken"]) + "\n")
    assert run("class-means", "--data", bad, "--out", workdir / "c.csv") == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "line 4" in err[0]

    assert run("gen-scenes", "--dim", 3, "--kind", "double-dot", "--count", 1, "--out", workdir / "x.json") == 1
    assert len(capsys.readouterr().err.strip().splitlines()) == 1


def test_eval_rejects_wrong_ray_count(workdir, capsys):
    d = workdir
    run("train", "--data", d / "d.jsonl", "--arch", "4", "--epochs", 1, "--out", d / "m.json")
    run("fingerprint", "--scenes", d / "s.json", "--rays", 6, "--length", 40, "--grid", 4, "--out", d / "d6.jsonl")
    assert run("eval", "--model", d / "m.json", "--data", d / "d6.jsonl", "--out", d / "e.json") == 1
    assert "M=5" in capsys.readouterr().err


def test_bad_arguments_exit_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--lengths", "80:10:10", "--out", "x.csv"])
    assert exc.value.code != 0
    with pytest.raises(SystemExit) as exc:
        main(["fingerprint", "--scenes", "s", "--gamma", "cubic", "--out", "x"])
    assert exc.value.code != 0


def test_console_script_installed(tmp_path):
    exe = shutil.which("rayclass")
    cmd = [exe] if exe else [sys.executable, "-m", "rayclass.cli"]
    out = subprocess.run(cmd + ["gen-scenes", "--count", "1", "--out", str(tmp_path / "s.json")],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    out = subprocess.run(cmd + ["class-means", "--data", str(tmp_path / "nope"), "--out", "x"],
                         capture_output=True, text=True)
    assert out.returncode == 1 and len(out.stderr.strip().splitlines()) == 1
