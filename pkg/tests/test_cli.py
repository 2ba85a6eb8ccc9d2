import csv
import io
import json

import pytest

from noisesig.calibration import CutoffTable
from noisesig.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def csv_file(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("y,a,b\n1,0.1,2\n2,0.4,1\n3,0.9,5\n4,1.3,3\n"
                    "5,1.8,4\n6,2.2,8\n7,2.real,7\n"
                    .replace("2.real", "2.5"))
    return str(path)


class TestPvalues:
    def test_stdout_is_deterministic(self, capsys):
        args = ("pvalues", "--data", "stackloss", "--objective", "l1",
                "--method", "raw", "--sims", "200", "--seed", "1")
        code1, out1, _ = run(capsys, *args)
        code2, out2, _ = run(capsys, *args)
        assert code1 == code2 == 0
        assert out1 == out2

    def test_thread_count_does_not_change_bytes(self, capsys):
        base = ("pvalues", "--data", "stackloss", "--method", "raw",
                "--sims", "150", "--seed", "3")
        _, out1, _ = run(capsys, *base, "--threads", "1")
        _, out4, _ = run(capsys, *base, "--threads", "4")
        assert out1 == out4

    def test_full_subset_row_shows_one(self, capsys):
        code, out, _ = run(capsys, "pvalues", "--data", "stackloss",
                           "--method", "raw", "--sims", "100", "--seed", "0")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("pvalues: dataset=stackloss")
        full_row = [l for l in lines if l.startswith("7 ")]
        assert len(full_row) == 1 and " 1 " in full_row[0]

    def test_single_subset_matches_full_table(self, capsys):
        common = ("--data", "stackloss", "--method", "raw", "--sims", "200",
                  "--seed", "2")
        _, table, _ = run(capsys, "pvalues", *common)
        _, single, _ = run(capsys, "pvalues", *common, "--subset", "3")
        row = next(l for l in table.splitlines() if l.startswith("3 "))
        row_single = next(l for l in single.splitlines()
                          if l.startswith("3 "))
        assert row.split() == row_single.split()

    def test_out_of_range_subset_fails(self, capsys):
        code, _, err = run(capsys, "pvalues", "--data", "stackloss",
                           "--sims", "50", "--subset", "9")
        assert code == 2
        assert "out of range" in err

    def test_json_report(self, capsys, tmp_path):
        report = tmp_path / "report.json"
        code, _, _ = run(capsys, "pvalues", "--data", "stackloss",
                         "--method", "gamma", "--sims", "60", "--seed", "4",
                         "--noise", "uniform", "--out", str(report))
        assert code == 0
        payload = json.loads(report.read_text())
        assert payload["schema"] == 1
        assert payload["seed"] == 4
        assert payload["noise"] == "uniform"
        assert payload["objective"] == "l1"
        assert len(payload["rows"]) == 8
        assert payload["rows"][7]["p_gamma"] == 1.0
        assert "version" in payload

    def test_csv_input(self, capsys, csv_file):
        code, out, _ = run(capsys, "pvalues", "--data", csv_file,
                           "--response", "y", "--objective", "l2",
                           "--method", "gamma", "--sims", "60")
        assert code == 0
        assert "{a,b}" in out

    def test_csv_needs_response(self, capsys, csv_file):
        code, _, err = run(capsys, "pvalues", "--data", csv_file,
                           "--sims", "50")
        assert code == 2
        assert "--response" in err

    def test_bad_cell_reports_coordinates(self, capsys, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("y,a\n1,2\n3,oops\n")
        code, _, err = run(capsys, "pvalues", "--data", str(path),
                           "--response", "y", "--sims", "50")
        assert code == 2
        assert "row 3" in err and "column 2" in err

    def test_unknown_dataset(self, capsys):
        code, _, err = run(capsys, "pvalues", "--data", "nosuch",
                           "--sims", "50")
        assert code == 2
        assert "unknown dataset" in err


class TestSelect:
    def test_stackloss_selection(self, capsys):
        code, out, _ = run(capsys, "select", "--data", "stackloss",
                           "--objective", "l1", "--alpha", "0.05",
                           "--cutoff", "chisq", "--cutoff-sims", "20000",
                           "--sims", "400", "--seed", "1")
        assert code == 0
        assert "chosen: 3 {Air.Flow,Water.Temp}" in out
        assert "cutoffs:" in out

    def test_numeric_cutoff_and_report(self, capsys, tmp_path):
        report = tmp_path / "select.json"
        code, _, _ = run(capsys, "select", "--data", "stackloss",
                         "--objective", "l2", "--cutoff", "0.013",
                         "--sims", "300", "--seed", "1",
                         "--out", str(report))
        assert code == 0
        payload = json.loads(report.read_text())
        assert payload["command"] == "select"
        assert payload["chosen"] in list(range(8)) + [None]
        assert set(payload["cutoffs"]) == {"1", "2", "3"}


class TestCalibrate:
    def test_chisq_table_and_reload(self, capsys, tmp_path):
        table_file = tmp_path / "cutoffs.json"
        code, out, _ = run(capsys, "calibrate", "--method", "chisq",
                           "--k", "3", "2", "1",
                           "--alphas", "0.05", "0.1", "0.2",
                           "--sims", "2000", "--seed", "0",
                           "--out", str(table_file))
        assert code == 0
        assert out.count("\n") > 6  # entries plus the fitted-curve table
        table = CutoffTable.loads(table_file.read_text())
        assert table.lookup(None, 3, 0.05) > 0
        # the written table feeds straight back into selection
        code2, out2, _ = run(capsys, "select", "--data", "stackloss",
                             "--objective", "l2", "--cutoff",
                             str(table_file), "--sims", "200", "--seed", "1")
        assert code2 == 0
        assert "chosen:" in out2

    def test_single_alpha_skips_curve(self, capsys):
        code, out, _ = run(capsys, "calibrate", "--method", "chisq",
                           "--k", "2", "--alphas", "0.1",
                           "--sims", "1000")
        assert code == 0
        assert "c1" not in out

    def test_nested_needs_data(self, capsys):
        code, _, err = run(capsys, "calibrate", "--method", "nested",
                           "--k", "2")
        assert code == 2
        assert "--data" in err


class TestNonsig:
    def test_median_interval(self, capsys):
        args = ("nonsig", "--data", "stackloss", "--target", "median",
                "--sims", "300", "--seed", "1")
        code, out, _ = run(capsys, *args)
        assert code == 0
        assert out.splitlines()[-1].startswith("interval [")
        _, again, _ = run(capsys, *args)
        assert out == again

    def test_median_asymptotic_mode(self, capsys):
        code, out, _ = run(capsys, "nonsig", "--data", "stackloss",
                           "--target", "median", "--mode", "asymptotic",
                           "--f0", "0.1")
        assert code == 0
        assert "method asymptotic" in out

    def test_component_interval_with_report(self, capsys, tmp_path):
        report = tmp_path / "nonsig.json"
        code, out, _ = run(capsys, "nonsig", "--data", "stackloss",
                           "--target", "l1-component:Water.Temp",
                           "--sims", "150", "--seed", "2",
                           "--fast-quantile", "--out", str(report))
        assert code == 0
        payload = json.loads(report.read_text())
        assert payload["lower"] < payload["upper"]
        assert payload["method"] == "fixed-quantile-bisection"

    def test_component_asymptotic_mode_rejected(self, capsys):
        code, _, err = run(capsys, "nonsig", "--data", "stackloss",
                           "--target", "l1-component:Air.Flow",
                           "--mode", "asymptotic")
        assert code == 2
        assert "ellipsoid" in err

    def test_ellipsoid_membership(self, capsys):
        code, out, _ = run(capsys, "nonsig", "--data", "stackloss",
                           "--target", "ellipsoid", "--objective", "l2",
                           "--member=-39.9,0.72,1.3,-0.15")
        assert code == 0
        assert "radius2" in out
        assert "member -39.9,0.72,1.3,-0.15:" in out

    def test_member_length_checked(self, capsys):
        code, _, err = run(capsys, "nonsig", "--data", "stackloss",
                           "--target", "ellipsoid", "--objective", "l2",
                           "--member", "1,2")
        assert code == 2
        assert "4 values" in err

    def test_unknown_target(self, capsys):
        code, _, err = run(capsys, "nonsig", "--data", "stackloss",
                           "--target", "mode")
        assert code == 2
        assert "unknown target" in err

    def test_numerical_failures_exit_3(self, capsys, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("y,a,b,c\n1,4,2,7\n2,1,8,3\n3,6,5,9\n"
                        "4,2,3,1\n5,9,7,4\n")
        code, _, err = run(capsys, "nonsig", "--data", str(path),
                           "--response", "y", "--target", "ellipsoid",
                           "--objective", "l2")
        assert code == 3
        assert "error:" in err


class TestCover:
    def test_median_study_csv(self, capsys):
        code, out, _ = run(capsys, "cover", "--study", "median",
                           "--family", "normal", "--n", "20",
                           "--replicates", "100", "--sims", "60",
                           "--seed", "0")
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["family", "n", "alpha", "method",
                           "covering_frequency", "mean_length",
                           "replicates", "sims", "seed"]
        assert [r[3] for r in rows[1:]] == ["nonsig", "rank"]
        for r in rows[1:]:
            assert 0.0 <= float(r[4]) <= 1.0
            assert float(r[5]) > 0


class TestDatasets:
    def test_listing(self, capsys):
        code, out, _ = run(capsys, "datasets")
        assert code == 0
        assert "stackloss" in out
        row = next(l for l in out.splitlines() if l.startswith("stackloss"))
        assert row.split()[1:3] == ["21", "3"]
