import re
import subprocess
import sys

import numpy as np
import pytest

from roughsf.cli import main
from roughsf.drivers import sample_fbm
from roughsf.io import read_path_csv, read_rough_path_csv, write_path_csv, write_rough_path_csv
from roughsf.roughpath import lift_piecewise_linear


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_lift_rejects_single_sample(tmp_path, capsys):
    (tmp_path / "p.csv").write_text("t,x1\n0,1\n")
    code, _, err = run(capsys, "lift", tmp_path / "p.csv", "--out", tmp_path)
    assert code == 1 and "need ≥ 2 samples" in err


def test_lift_of_linear_path(tmp_path, capsys):
    t = np.linspace(0, 1, 11)
    write_path_csv(tmp_path / "lin.csv", t, 3.0 * t)
    code, out, _ = run(capsys, "lift", tmp_path / "lin.csv", "--out", tmp_path)
    assert code == 0 and "homogeneous norm" in out
    rp = read_rough_path_csv(tmp_path / "lin_rp.csv")
    assert np.allclose(rp.s3[:, 0, 0, 0], 0.3**3 / 6, rtol=1e-14, atol=0)


def test_lift_then_check(tmp_path, capsys):
    b = sample_fbm(0.3, 2, 64, 1.0, 1)
    write_path_csv(tmp_path / "b.csv", b.times, b.values)
    run(capsys, "lift", tmp_path / "b.csv", "--output", tmp_path / "rp.csv")
    code, out, _ = run(capsys, "check", tmp_path / "rp.csv")
    assert code == 0
    chen = float(re.search(r"chen residual: (\S+)", out).group(1))
    shuffle = float(re.search(r"shuffle residual: (\S+)", out).group(1))
    assert chen <= 1e-12 and shuffle <= 1e-10
    assert "level3=" in out


def test_check_flags_non_geometric_file(tmp_path, capsys):
    rp = lift_piecewise_linear(np.linspace(0, 1, 2), np.array([[0.0, 0.0], [1.0, 2.0]]))
    bad = type(rp)(rp.times, rp.s1, np.zeros_like(rp.s2), rp.s3)
    write_rough_path_csv(tmp_path / "bad.csv", bad)
    code, out, _ = run(capsys, "check", tmp_path / "bad.csv")
    assert code == 1 and "FAIL" in out


def test_check_reports_parse_errors(tmp_path, capsys):
    (tmp_path / "x.csv").write_text("1,1,1.0\n0,1,abc,1,1\n")
    code, _, err = run(capsys, "check", tmp_path / "x.csv")
    assert code == 1 and ":2:" in err


def test_mixed_without_brownian_part(tmp_path, capsys):
    code, _, _ = run(capsys, "mixed", "--H", 0.3, "--d", 2, "--e", 0, "--N", 32, "--seed", 5, "--out", tmp_path)
    assert code == 0 and not (tmp_path / "bm.csv").exists()
    t, b = read_path_csv(tmp_path / "fbm.csv")
    xi = read_rough_path_csv(tmp_path / "ext.csv")
    ref = lift_piecewise_linear(t, b)
    assert np.array_equal(xi.s2, ref.s2) and np.array_equal(xi.s3, ref.s3)


def test_mixed_seed_repeat_and_rough_block(tmp_path, capsys):
    for name in ("a", "b"):
        code, _, _ = run(capsys, "mixed", "--N", 32, "--seed", 9, "--out", tmp_path / name)
        assert code == 0
    for f in ("fbm.csv", "bm.csv", "arp.csv", "ext.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    t, b = read_path_csv(tmp_path / "a" / "fbm.csv")
    xi = read_rough_path_csv(tmp_path / "a" / "ext.csv")
    ref = lift_piecewise_linear(t, b)
    assert np.array_equal(xi.s3[:, :1, :1, :1], ref.s3)


def test_mixed_config_file(tmp_path, capsys):
    (tmp_path / "m.cfg").write_text("H = 0.28\nd = 1\ne = 2\nN = 16\n")
    code, _, _ = run(capsys, "mixed", "--config", tmp_path / "m.cfg", "--out", tmp_path)
    assert code == 0 and read_rough_path_csv(tmp_path / "ext.csv").dim == 3
    (tmp_path / "bad.cfg").write_text("H = 0.28\nwidth = 3\n")
    code, _, err = run(capsys, "mixed", "--config", tmp_path / "bad.cfg", "--out", tmp_path)
    assert code == 1 and "bad.cfg:2" in err


def driver_file(tmp_path, n=64, dim=1, seed=2):
    b = sample_fbm(0.3, dim, n, 1.0, seed)
    rp = lift_piecewise_linear(b.times, b.values)
    write_rough_path_csv(tmp_path / "xi.csv", rp)
    return rp


def test_rde_zero_sigma_is_euler(tmp_path, capsys):
    driver_file(tmp_path)
    (tmp_path / "r.cfg").write_text("xi = 1.0\nsigma = zero\ndrift = linear\ndrift_scale = -2\n")
    code, _, _ = run(capsys, "rde", tmp_path / "xi.csv", "--config", tmp_path / "r.cfg", "--out", tmp_path)
    assert code == 0
    _, y = read_path_csv(tmp_path / "solution.csv")
    assert np.allclose(y[:, 0], (1 - 2 / 64) ** np.arange(65), rtol=1e-14, atol=0)


def test_rde_constant_sigma_and_self_convergence(tmp_path, capsys):
    rp = driver_file(tmp_path, dim=2)
    (tmp_path / "r.cfg").write_text(
        "xi = 0.5 -1\nsigma = constant\nsigma_matrix = 1 2 0 -1\nself_convergence = true\n"
    )
    code, out, _ = run(capsys, "rde", tmp_path / "xi.csv", "--config", tmp_path / "r.cfg", "--out", tmp_path)
    assert code == 0 and "self-convergence" in out
    _, y = read_path_csv(tmp_path / "solution.csv")
    expect = np.array([0.5, -1.0]) + rp.prefix[0] @ np.array([[1.0, 2.0], [0.0, -1.0]]).T
    assert np.max(np.abs(y - expect)) <= 1e-12
    lines = (tmp_path / "self_convergence.csv").read_text().splitlines()
    assert lines[0] == "n_fine,n_coarse,max_gap" and lines[1].startswith("64,32,")
    assert float(lines[1].split(",")[2]) <= 1e-12


def test_rde_explosion_exits_two(tmp_path, capsys):
    driver_file(tmp_path)
    (tmp_path / "r.cfg").write_text("xi = 1\nsigma = zero\ndrift = linear\ndrift_scale = 1000\n")
    code, _, err = run(capsys, "rde", tmp_path / "xi.csv", "--config", tmp_path / "r.cfg", "--out", tmp_path)
    assert code == 2 and "error" in err


def test_rde_rejects_unknown_key(tmp_path, capsys):
    driver_file(tmp_path)
    (tmp_path / "r.cfg").write_text("xi = 1\ncolour = red\n")
    code, _, err = run(capsys, "rde", tmp_path / "xi.csv", "--config", tmp_path / "r.cfg", "--out", tmp_path)
    assert code == 1 and "r.cfg:2" in err


AVG = "system = {system}\nN = 32\nepsilons = 0.2 0.1\nsamples = 30\nseed = 3\n"


def test_average_decoupled_is_zero(tmp_path, capsys):
    (tmp_path / "a.cfg").write_text(AVG.format(system="decoupled"))
    code, _, _ = run(capsys, "average", "--config", tmp_path / "a.cfg", "--out", tmp_path)
    assert code == 0
    rows = (tmp_path / "results.csv").read_text().splitlines()
    assert rows[0] == "epsilon,delta,estimate,stderr,samples_used,exploded"
    assert all(r.split(",")[2] == "0" for r in rows[1:])


def test_average_is_thread_independent(tmp_path, capsys):
    (tmp_path / "a.cfg").write_text(AVG.format(system="ou"))
    for k in (1, 2):
        code, _, _ = run(capsys, "average", "--config", tmp_path / "a.cfg", "--threads", k, "--out", tmp_path / str(k))
        assert code == 0
    assert (tmp_path / "1" / "results.csv").read_bytes() == (tmp_path / "2" / "results.csv").read_bytes()


def test_average_argument_errors(tmp_path, capsys):
    assert run(capsys, "average", "--out", tmp_path)[0] == 1
    (tmp_path / "a.cfg").write_text("beta = 0.4\n")
    assert run(capsys, "average", "--config", tmp_path / "a.cfg", "--out", tmp_path)[0] == 1
    assert run(capsys, "mixed", "--threads", 0, "--out", tmp_path)[0] == 1


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "roughsf", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "average" in res.stdout
