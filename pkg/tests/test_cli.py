import csv
import io

import numpy as np
import pytest

from kfoutage.cli import SWEEP_COLUMNS, main, read_config

BASE = ["--rho", "0.95", "--sigma-u2", "1", "--sigma-v2", "1"]


def read_csv(path):
    """Return (header comment lines, column names, rows as strings)."""
    lines = path.read_text().splitlines()
    comments = [l[2:] for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    rows = list(csv.reader(io.StringIO("\n".join(body))))
    return comments, rows[0], rows[1:]


def numeric(rows, col):
    return np.array([float(r[col]) if r[col] else np.nan for r in rows])


class TestSimulate:
    def test_byte_identical_reruns(self, tmp_path):
        for name in ("a", "b"):
            assert main(["simulate", *BASE, "--lambda", "0.5", "--steps", "50000", "--seed", "3",
                         "--mth", "0.5", "--out", str(tmp_path / name)]) == 0
        for f in ("histogram.csv", "outage.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    @pytest.mark.parametrize("lam", [1.0, 0.5, 0.25])
    def test_histogram_peaks_at_half_lambda(self, tmp_path, lam):
        assert main(["simulate", *BASE, "--lambda", str(lam), "--steps", "1000000", "--bins", "400",
                     "--seed", "1", "--out", str(tmp_path)]) == 0
        comments, cols, rows = read_csv(tmp_path / "histogram.csv")
        assert cols == ["bin_center", "density"]
        c, d = numeric(rows, 0), numeric(rows, 1)
        width = c[1] - c[0]
        assert abs(c[np.argmax(d)] - lam / 2) <= 3 * width
        assert f"lambda = {lam!r}" in comments and "seed = 1" in comments

    def test_outage_columns(self, tmp_path):
        assert main(["simulate", *BASE, "--snr-db", "6", "--steps", "20000", "--mth", "1", "--mth", "0.5",
                     "--out", str(tmp_path)]) == 0
        comments, cols, rows = read_csv(tmp_path / "outage.csv")
        assert cols == ["M_th", "p_hat", "ci_lo", "ci_hi"]
        assert [float(r[0]) for r in rows] == [0.5, 1.0]
        assert "mth = 0.5,1.0" in comments
        lam_line = next(l for l in comments if l.startswith("lambda = "))
        assert float(lam_line.split("=")[1]) == pytest.approx(10 ** -0.6)

    def test_missing_noise_variance(self, tmp_path, capsys):
        assert main(["simulate", "--rho", "0.95", "--sigma-u2", "1", "--lambda", "1", "--out", str(tmp_path)]) == 1
        assert "--sigma-v2" in capsys.readouterr().err

    def test_lambda_and_snr_exclusive(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["simulate", *BASE, "--lambda", "1", "--snr-db", "0"])
        assert info.value.code == 1

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as info:
            main(["simulate", "--bogus"])
        assert info.value.code == 1


class TestSolve:
    def test_outputs(self, tmp_path):
        assert main(["solve", *BASE, "--lambda", "0.25", "--mth", "0.5", "--out", str(tmp_path)]) == 0
        comments, cols, rows = read_csv(tmp_path / "density.csv")
        assert cols == ["M", "f_M"] and len(rows) == 1024
        report = (tmp_path / "solve_report.txt").read_text()
        assert "converged = True" in report and "kappa = " in report and "p_out[0.5]" in report

    def test_overlays_simulation(self, tmp_path):
        main(["solve", *BASE, "--lambda", "0.25", "--out", str(tmp_path / "s")])
        main(["simulate", *BASE, "--lambda", "0.25", "--steps", "1000000", "--seed", "2",
              "--bins", "1000", "--out", str(tmp_path / "m")])
        _, _, drows = read_csv(tmp_path / "s" / "density.csv")
        M, f = numeric(drows, 0), numeric(drows, 1)
        F = np.concatenate(([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(M))))
        _, _, hrows = read_csv(tmp_path / "m" / "histogram.csv")
        c, d = numeric(hrows, 0), numeric(hrows, 1)
        edges = np.concatenate(([0.0], 0.5 * (c[1:] + c[:-1]), [c[-1] + (c[-1] - c[-2]) / 2]))
        # use the right edge of every bin for the histogram cdf
        H = np.cumsum(d * np.diff(edges))
        assert np.max(np.abs(np.interp(edges[1:], M, F) - H)) < 0.01

    def test_grid_refinement(self, tmp_path):
        kappas = []
        for n in (512, 1024):
            main(["solve", *BASE, "--lambda", "0.25", "--grid-size", str(n), "--out", str(tmp_path / str(n))])
            line = next(l for l in (tmp_path / str(n) / "solve_report.txt").read_text().splitlines()
                        if l.startswith("kappa = "))
            kappas.append(float(line.split("=")[1]))
        assert abs(kappas[0] - kappas[1]) < 1e-4

    def test_unstable_refused(self, tmp_path, capsys):
        assert main(["solve", "--rho", "1.0", "--sigma-u2", "1", "--sigma-v2", "1", "--lambda", "1",
                     "--out", str(tmp_path)]) == 1
        assert "|rho| < 1" in capsys.readouterr().err

    def test_non_convergence_exit(self, tmp_path):
        assert main(["solve", *BASE, "--lambda", "0.25", "--max-iter", "1", "--out", str(tmp_path)]) == 2


class TestConfig:
    def test_file_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# nominal system\nrho = 0.95\nsigma_u2 = 1\nsigma-v2 = 1\nlambda = 0.5\nmth = 0.2, 0.5\n")
        assert read_config(cfg)["mth"] == [0.2, 0.5]
        assert main(["bounds", "--config", str(cfg), "--lambda", "0.25", "--out", str(tmp_path)]) == 0
        comments, cols, rows = read_csv(tmp_path / "bounds.csv")
        assert "lambda = 0.25" in comments and "mth = 0.2,0.5" in comments
        assert cols == ["M_th", "p_lower", "p_upper", "p_highsnr"]
        assert len(rows) == 2

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("rho: 0.95\n")
        assert main(["validate", "--config", str(cfg)]) == 1
        cfg.write_text("colour = blue\n")
        assert main(["validate", "--config", str(cfg)]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "nope.cfg")]) == 1


class TestValidate:
    def test_valid(self, capsys):
        assert main(["validate", *BASE, "--lambda", "0.25"]) == 0
        assert "valid" in capsys.readouterr().out

    def test_rho_zero_warns(self, capsys):
        assert main(["validate", "--rho", "0", "--sigma-u2", "1", "--sigma-v2", "1"]) == 0
        out = capsys.readouterr().out
        assert "rho_zero" in out and "valid with warnings" in out

    def test_invalid(self, capsys):
        assert main(["validate", "--rho", "0.95", "--sigma-u2", "0", "--sigma-v2", "1"]) == 1
        assert "non_positive_variance" in capsys.readouterr().out


class TestSweep:
    def test_threshold_sweep_brackets(self, tmp_path):
        assert main(["sweep", *BASE, "--lambda", "0.125", "--var", "mth", "--start", "0.05", "--stop", "1",
                     "--num", "20", "--steps", "1000000", "--seed", "5", "--out", str(tmp_path)]) == 0
        comments, cols, rows = read_csv(tmp_path / "sweep.csv")
        assert cols == SWEEP_COLUMNS and len(rows) == 20
        assert all(r[0] == "mth" for r in rows)
        lo, hi, p_den, p_mc = (numeric(rows, cols.index(k)) for k in ("p_lower", "p_upper", "p_density", "p_mc"))
        assert np.all(lo <= p_den + 1e-12) and np.all(p_den <= hi + 1e-12)
        assert np.max(np.abs(p_mc - p_den)) < 0.01
        assert "var = 'mth'" in comments

    def test_lambda_sweep_bounds_tighten(self, tmp_path):
        lams = ["2", "1", "0.5", "0.25", "0.125"]
        argv = ["sweep", *BASE, "--var", "lambda", "--mth", "0.5", "--steps", "200000", "--out", str(tmp_path)]
        for v in lams:
            argv += ["--values", v]
        assert main(argv) == 0
        _, cols, rows = read_csv(tmp_path / "sweep.csv")
        lo, hi = numeric(rows, cols.index("p_lower")), numeric(rows, cols.index("p_upper"))
        kl, ku = numeric(rows, cols.index("kappa_l")), numeric(rows, cols.index("kappa_u"))
        kd = numeric(rows, cols.index("kappa_density"))
        # the kappa gap shrinks with lam; the outage gap carries an extra exp(-lam/M_th)
        assert np.all(np.diff(ku - kl) < 0)
        assert np.all(np.diff((hi - lo)[1:]) < 0)
        assert np.all((kl < kd) & (kd < ku))
        p_mc = numeric(rows, cols.index("p_mc"))
        assert np.all((lo - 0.01 < p_mc) & (p_mc < hi + 0.01))

    def test_high_snr_sweep_slope(self, tmp_path):
        assert main(["sweep", *BASE, "--var", "lambda", "--start", "0.001", "--stop", "0.01", "--num", "10",
                     "--mth", "0.5", "--skip-mc", "--out", str(tmp_path)]) == 0
        _, cols, rows = read_csv(tmp_path / "sweep.csv")
        lam = numeric(rows, 1)
        slope_den = np.polyfit(lam, numeric(rows, cols.index("p_density")), 1)[0]
        slope_lin = np.polyfit(lam, numeric(rows, cols.index("p_highsnr")), 1)[0]
        assert slope_den / slope_lin == pytest.approx(1.0, abs=0.05)
        assert all(r[cols.index("p_mc")] == "" for r in rows)

    def test_kappa_gap_sweep(self, tmp_path):
        assert main(["sweep", *BASE, "--var", "lambda", "--start", "0.001", "--stop", "1", "--num", "8", "--log",
                     "--skip-mc", "--skip-density", "--out", str(tmp_path)]) == 0
        _, cols, rows = read_csv(tmp_path / "sweep.csv")
        gap = numeric(rows, cols.index("kappa_u")) - numeric(rows, cols.index("kappa_l"))
        assert np.all(np.diff(gap) > 0)
        assert all(r[cols.index(k)] == "" for r in rows for k in ("p_mc", "p_density", "kappa_density"))

    def test_usage_errors(self, tmp_path):
        base = ["sweep", *BASE, "--lambda", "0.5", "--out", str(tmp_path)]
        assert main(base + ["--values", "0.1", "--values", "0.2"]) == 1  # no --var
        assert main(base + ["--var", "mth", "--values", "0.1"]) == 1  # one point
        assert main(base + ["--var", "mth"]) == 1  # no points
        with pytest.raises(SystemExit) as info:
            main(base + ["--var", "rho", "--values", "0.1", "--values", "0.2"])
        assert info.value.code == 1
        assert main(["sweep", *BASE, "--var", "lambda", "--values", "0.1", "--values", "0.2",
                     "--mth", "0.1", "--mth", "0.2", "--out", str(tmp_path)]) == 1

    def test_deterministic(self, tmp_path):
        argv = ["sweep", *BASE, "--var", "lambda", "--values", "0.5", "--values", "0.25", "--mth", "0.3",
                "--steps", "20000", "--seed", "9"]
        main(argv + ["--out", str(tmp_path / "a")])
        main(argv + ["--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()
