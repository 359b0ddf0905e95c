import numpy as np
import pytest

from skewfatou.cli import main
from skewfatou.render import read_pgm


def _report(d):
    return (d / "report.txt").read_text()


def test_example4_report(tmp_path):
    assert main(["example4", "--lambda", "0.5", "--x0", "5", "--delta", "0.01", "--out", str(tmp_path)]) == 0
    rep = _report(tmp_path)
    assert "n0 = 3" in rep and "y0 = 0.00262144" in rep and "check y_tilde_orbit_bounded = PASS" in rep
    assert (tmp_path / "orbit_ytilde.csv").exists()


def test_failed_invariant_gives_nonzero_exit(tmp_path):
    # a witness offset below y~0 sits on the positive side, so the escape-side check fails
    assert main(["example4", "--offset", "-1e-14", "--out", str(tmp_path)]) == 1
    assert "status = failed" in _report(tmp_path)


def test_orbit_rows(tmp_path):
    args = ["orbit", "--f", "poly(0,0,1)", "--g", "poly(0,0.5)", "--h", "poly(1)", "--w0", "0.001", "--steps", "20"]
    assert main(args + ["--z0", "0.5", "--out", str(tmp_path / "a")]) == 0
    assert len((tmp_path / "a" / "orbit_0.csv").read_text().splitlines()) == 1 + 21
    # from z0 = 2 the orbit overflows double precision at step 10 and the record is truncated there
    assert main(args + ["--z0", "2", "--out", str(tmp_path / "b")]) == 0
    assert len((tmp_path / "b" / "orbit_0.csv").read_text().splitlines()) == 1 + 10
    assert "termination = overflowed(step=10)" in _report(tmp_path / "b")


def test_render_command(tmp_path):
    args = ["render", "--f", "poly(0,0,1)", "--w-slice", "0", "--viewport", "-2,-2,2,2", "--size", "64x48",
            "--out", str(tmp_path)]
    assert main(args) == 0
    img = read_pgm(tmp_path / "image_0.pgm")
    assert img.shape == (48, 64)
    assert img[24, 32] == 255 and img[0, 0] < 255


def test_reports_identical_except_timestamp(tmp_path):
    for d in ("a", "b"):
        assert main(["baker-bulge", "--out", str(tmp_path / d), "--threads", "2"]) == 0
    a = _report(tmp_path / "a").splitlines()
    b = _report(tmp_path / "b").splitlines()
    assert a[0].startswith("# skewfatou report") and a[1:] == b[1:]


def test_parse_error_exit_code(tmp_path, capsys):
    assert main(["orbit", "--f", "z^+", "--out", str(tmp_path)]) == 2
    assert "column 3" in capsys.readouterr().err


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(f"[experiment]\nkind = order\noutput = {tmp_path / 'o'}\n[params]\nh = exp(z^2)\n")
    assert main(["order", "--config", str(cfg)]) == 0
    assert "estimate = 2." in _report(tmp_path / "o")
    assert main(["order", "--config", str(cfg), "--h", "exp(z)"]) == 0
    assert "estimate = 1." in _report(tmp_path / "o") or "estimate = 0.9" in _report(tmp_path / "o")
    with pytest.raises(SystemExit):
        main(["order", "--bogus", "1"])
    assert main(["series-test", "--config", str(cfg)]) == 2


def test_series_and_certify(tmp_path):
    assert main(["series-test", "--h", "1", "--out", str(tmp_path / "s")]) == 0
    assert "verdict = converged" in _report(tmp_path / "s")
    assert main(["certify", "--z0", "1", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "certificate_0.txt").exists()
    assert "verdict = complete" in _report(tmp_path / "c")


def test_classify_grid(tmp_path):
    assert main(["classify-grid", "--size", "6x6", "--out", str(tmp_path)]) == 0
    grid = _report(tmp_path).split("[grid]\n")[1].splitlines()[:6]
    assert all(len(r) == 6 for r in grid) and grid[0][0] == "E"


def test_runge_build_stage_one(tmp_path):
    assert main(["runge-build", "--K", "1", "--out", str(tmp_path)]) == 0
    rep = _report(tmp_path)
    assert "check stage_1_properties = PASS" in rep and "check dichotomy_1 = PASS" in rep
    fit = (tmp_path / "fit_1.txt").read_text()
    assert "premap = PowerMap" in fit and "[hessenberg]" in fit
