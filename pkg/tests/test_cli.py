import shlex

import pytest

from maxstab.cli import main


def _run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


BASE = ["--model", "br", "--alpha", "1.0", "--v", "1.0", "--grid", "-1:1:11"]


def test_simulate_ef(capsys):
    code, out, _ = _run(["simulate"] + BASE + ["--method", "ef", "--reps", "10", "--seed", "7"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# maxstab") and lines[1] == "# seed=7"
    assert lines[3].split(",")[-3:] == ["T", "N_W", "exact"]
    rows = lines[4:]
    assert len(rows) == 10 and all(r.endswith(",true") for r in rows)


def test_simulate_dm_exact(capsys):
    code, out, _ = _run(["simulate"] + BASE + ["--method", "dm", "--tau", "exact", "--reps", "3", "--seed", "1"],
                        capsys)
    assert code == 0 and all(r.endswith(",true") for r in out.splitlines()[4:])
    code, out, _ = _run(["simulate"] + BASE + ["--method", "dm", "--tau", "0.5N", "--reps", "3", "--seed", "1"],
                        capsys)
    assert all(r.endswith(",false") for r in out.splitlines()[4:])


def test_byte_identical(tmp_path):
    p = tmp_path / "a.csv"
    args = ["simulate"] + BASE + ["--method", "sn", "--reps", "5", "--seed", "3", "--out", str(p)]
    assert main(args) == 0
    first = p.read_bytes()
    assert main(args) == 0
    assert p.read_bytes() == first


def test_header_command_reproduces(tmp_path):
    p = tmp_path / "b.csv"
    assert main(["simulate"] + BASE + ["--method", "ef", "--reps", "4", "--out", str(p)]) == 0
    text = p.read_text()
    cmd = [l for l in text.splitlines() if l.startswith("# command: ")][0][len("# command: maxstab "):]
    p.unlink()
    assert main(shlex.split(cmd)) == 0
    assert p.read_text() == text


def test_assess_error(capsys):
    code, out, _ = _run(["assess-error"] + BASE + ["--method", "dm", "--tau", "0.1N,0.5N", "--reps", "50",
                                                   "--seed", "2", "--eps", "0.1"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[3].startswith("tau,rep,mode") and len(lines) == 6
    code, out, _ = _run(["assess-error"] + BASE + ["--method", "original", "--mode", "appendixB", "--tau", "2",
                                                   "--reps", "20", "--seed", "2"], capsys)
    assert code == 0 and ",appendixB," in out
    code, out, _ = _run(["assess-error"] + BASE + ["--method", "dm", "--mode", "formula", "--tau", "2",
                                                   "--reps", "20", "--inner", "40", "--seed", "2"], capsys)
    assert code == 0 and ",formula," in out


def test_calibrate_and_theta(capsys):
    code, out, _ = _run(["calibrate"] + BASE + ["--method", "DM", "--target", "0.1", "--reps", "200",
                                                "--seed", "1"], capsys)
    assert code == 0 and out.splitlines()[-1].startswith("DM,0.1,")
    code, out, _ = _run(["theta"] + BASE + ["--reps", "500", "--seed", "1"], capsys)
    assert code == 0 and out.splitlines()[3] == "theta,se,N,reps"


def test_bench(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("[a]\nmodel = br\nalpha = 1\nv = 1\ngrid = -1:1:11\nmethod = DM,EF\n"
                   "targets = 0,0.1\nreplications = 100\nseed = 1\n")
    out = tmp_path / "b.csv"
    assert main(["bench", "--scenarios", str(cfg), "--out", str(out), "--seed", "1"]) == 0
    lines = out.read_text().splitlines()
    assert lines[3].startswith("scenario_id,model_kind")
    assert len(lines) == 8


def test_errors(capsys):
    code, _, err = _run(["simulate", "--alpha", "3", "--v", "1"], capsys)
    assert code == 2 and "alpha" in err
    code, _, err = _run(["simulate"] + BASE + ["--method", "original", "--tau", "1e12", "--max-iter", "20"],
                        capsys)
    assert code == 1 and "RunawayStop" in err
    code, _, _ = _run(["simulate"] + BASE + ["--method", "original", "--tau", "exact"], capsys)
    assert code == 2
    with pytest.raises(SystemExit) as ei:
        main(["simulate", "--bogus"])
    assert ei.value.code == 2


def test_random_seed_recorded(capsys):
    code, out, _ = _run(["theta"] + BASE + ["--reps", "100"], capsys)
    seed = out.splitlines()[1].split("=")[1]
    assert f"--seed {seed}" in out.splitlines()[2]
