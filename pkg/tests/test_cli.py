import json
import math
import subprocess
import sys

import numpy as np
import pytest

from betacoal import __version__
from betacoal.cli import main
from betacoal.io import read_csv


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def csv_rows(text):
    lines = text.strip().splitlines()
    meta = json.loads(lines[0][2:])
    cols = lines[1].split(",")
    rows = [dict(zip(cols, line.split(","))) for line in lines[2:]]
    return meta, rows


class TestRates:
    def test_beta_three(self, capsys):
        code, out, _ = run(capsys, "rates", "--measure", "beta", "--alpha", "1.5", "--b", "3")
        assert code == 0
        meta, rows = csv_rows(out)
        assert meta["schema"] == "rates" and meta["package_version"] == __version__
        assert [int(r["k"]) for r in rows] == [2, 3]
        assert float(rows[0]["lambda_bk"]) == pytest.approx(0.75, rel=1e-14)
        assert float(rows[1]["lambda_bk"]) == pytest.approx(0.25, rel=1e-14)
        assert float(rows[0]["lambda_b"]) == pytest.approx(2.5, rel=1e-14)

    def test_kingman(self, capsys):
        code, out, _ = run(capsys, "rates", "--measure", "kingman", "--b", "4")
        assert code == 0
        _, rows = csv_rows(out)
        assert float(rows[0]["lambda_bk"]) == 1.0
        assert float(rows[0]["lambda_b"]) == 6.0

    def test_json_and_k_range(self, capsys):
        code, out, _ = run(capsys, "rates", "--b", "10", "20", "--k-range", "2:3",
                           "--format", "json")
        doc = json.loads(out)
        assert code == 0 and doc["columns"][:2] == ["b", "k"]
        assert [r[:2] for r in doc["rows"]] == [[10, 2], [10, 3], [20, 2], [20, 3]]

    @pytest.mark.parametrize("argv", [
        ["rates", "--alpha", "2.5", "--b", "3"],
        ["rates", "--measure", "kingman", "--alpha", "1.5", "--b", "3"],
        ["rates", "--b", "1"],
    ])
    def test_errors(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 2
        assert "error" in err


class TestSimulate:
    def test_deterministic_files(self, capsys, tmp_path):
        outs = []
        for name in ("a", "b"):
            d = tmp_path / name
            d.mkdir()
            code, _, _ = run(capsys, "simulate", "--n", "500", "--to-count", "1", "--replicates",
                             "5", "--seed", "3", "--hit", "10", "50", "--events",
                             str(tmp_path / "ev.csv"), "--out", str(tmp_path / "sum.csv"))
            assert code == 0
            outs.append(((tmp_path / "ev.csv").read_bytes(), (tmp_path / "sum.csv").read_bytes()))
        assert outs[0] == outs[1]

    def test_summary_columns(self, capsys, tmp_path):
        p = tmp_path / "s.csv"
        run(capsys, "simulate", "--n", "300", "--replicates", "4", "--seed", "1",
            "--hit", "20", "--out", str(p))
        meta, cols, data = read_csv(p)
        assert meta["seed"] == 1 and meta["config"]["n"] == 300
        assert cols == ["replicate", "final_count", "tree_length", "T_20", "exact_20"]
        assert data.shape == (4, 5)
        assert np.all(data[:, 1] == 1)

    def test_event_log(self, capsys, tmp_path):
        ev = tmp_path / "ev.csv"
        run(capsys, "simulate", "--n", "200", "--replicates", "2", "--seed", "2",
            "--events", str(ev))
        meta, cols, data = read_csv(ev)
        assert meta["schema"] == "event_log"
        assert cols == ["replicate", "time", "count_after", "blocks_lost"]
        for rep in (0, 1):
            d = data[data[:, 0] == rep]
            assert d[:, 3].sum() == 199
            np.testing.assert_array_equal(np.diff(d[:, 2]), -d[1:, 3])

    def test_snapshot(self, capsys, tmp_path):
        snap = tmp_path / "snap.csv"
        code, _, _ = run(capsys, "simulate", "--n", "1000", "--t", "0.05", "--replicates", "3",
                         "--seed", "4", "--snapshot", str(snap))
        assert code == 0
        _, cols, data = read_csv(snap)
        assert cols == ["replicate", "t", "block_size"]
        for rep in range(3):
            assert data[data[:, 0] == rep, 2].sum() == 1000

    def test_tree_length_example(self, capsys):
        code, out, _ = run(capsys, "simulate", "--measure", "beta", "--alpha", "1.5", "--n",
                           "1000", "--to-count", "1", "--replicates", "100", "--seed", "7")
        _, rows = csv_rows(out)
        L = [float(r["tree_length"]) for r in rows]
        assert len(L) == 100
        assert np.mean(L) == pytest.approx(1.3293 * math.sqrt(1000), rel=0.10)

    def test_rejects_small_n(self, capsys):
        code, _, err = run(capsys, "simulate", "--n", "1", "--seed", "1")
        assert code == 2 and "--n" in err

    def test_seed_required(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--n", "10"])
        assert exc.value.code == 2

    def test_io_failure(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate", "--n", "10", "--seed", "1",
                           "--out", str(tmp_path / "missing" / "x.csv"))
        assert code == 1 and "I/O" in err


class TestCsbp:
    def test_clock_run(self, capsys, tmp_path):
        path = tmp_path / "path.csv"
        code, out, _ = run(capsys, "csbp", "--clock", "0.05", "--replicates", "2", "--seed", "1",
                           "--path-out", str(path))
        assert code == 0
        _, rows = csv_rows(out)
        assert len(rows) == 2
        meta, cols, data = read_csv(path)
        assert cols == ["replicate", "s", "Z", "R"]
        assert meta["schema"] == "time_change_path"

    def test_grid_run_with_atoms(self, capsys, tmp_path):
        atoms = tmp_path / "atoms.csv"
        code, out, _ = run(capsys, "csbp", "--s-max", "0.2", "--theta-cap", "1e4",
                           "--grid-step", "0.02", "--seed", "2", "--atoms", str(atoms))
        assert code == 0
        _, rows = csv_rows(out)
        _, cols, data = read_csv(atoms)
        assert cols == ["replicate", "grid_time", "atom_id", "mass"]
        assert data.shape[0] == int(rows[0]["atoms"])
        if data.shape[0]:
            assert data[:, 3].sum() == pytest.approx(float(rows[0]["Z"]), rel=1e-12)

    def test_deterministic(self, capsys):
        argv = ["csbp", "--clock", "0.05", "--replicates", "2", "--seed", "9"]
        assert run(capsys, *argv)[1] == run(capsys, *argv)[1]

    @pytest.mark.parametrize("argv", [
        ["csbp", "--seed", "1"],
        ["csbp", "--seed", "1", "--clock", "0.1", "--s-max", "1"],
        ["csbp", "--seed", "1", "--clock", "0.1", "--alpha", "2.2"],
    ])
    def test_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == 2


class TestCouple:
    def test_scale(self, capsys):
        code, out, _ = run(capsys, "couple", "--scale", "0.5", "--n", "60", "--replicates", "20",
                           "--seed", "1")
        meta, rows = csv_rows(out)
        assert code == 0
        assert meta["ordered_fraction"] == 1.0
        assert all(r["ordered"] == "1" for r in rows)

    def test_restrict_events(self, capsys, tmp_path):
        ev = tmp_path / "ev.csv"
        code, _, _ = run(capsys, "couple", "--restrict", "0.3", "--n", "40", "--replicates", "3",
                         "--seed", "2", "--events", str(ev))
        assert code == 0
        header = ev.read_text().splitlines()[1]
        assert header == "replicate,trajectory,time,count_after,blocks_lost"

    def test_kingman_rejected(self, capsys):
        code, _, err = run(capsys, "couple", "--measure", "kingman", "--scale", "0.5", "--n",
                           "10", "--seed", "1")
        assert code == 2


class TestVerify:
    def test_king(self, capsys, tmp_path):
        rep = tmp_path / "king.json"
        code, out, _ = run(capsys, "verify", "KING", "--seed", "1", "--out", str(rep))
        assert code == 0
        assert out.strip().splitlines()[-1].startswith("PASS KING")
        doc = json.loads(rep.read_text())
        assert doc["passed"] and doc["seed"] == 1
        assert doc["checks"][0]["estimate"] == pytest.approx(2.0, rel=0.05)

    def test_t18(self, capsys, tmp_path):
        rep = tmp_path / "t18.json"
        code, _, _ = run(capsys, "verify", "T1.8", "--alpha", "1.5", "--seed", "1",
                         "--out", str(rep))
        doc = json.loads(rep.read_text())
        assert doc["checks"][0]["estimate"] == pytest.approx(0.5, abs=0.02)
        assert code == 0 and doc["passed"]

    def test_exit_code_tracks_report(self, capsys, tmp_path):
        rep = tmp_path / "r.csv"
        code, _, _ = run(capsys, "verify", "T1.9", "--n", "300", "--replicates", "20",
                         "--seed", "2", "--out", str(rep), "--format", "csv")
        meta = json.loads(rep.read_text().splitlines()[0][2:])
        assert code == (0 if meta["passed"] else 1)

    def test_unknown_target(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "BOGUS", "--seed", "1"])
        assert exc.value.code == 2

    def test_policy_violation_is_usage_error(self, capsys):
        code, _, err = run(capsys, "verify", "T1.4", "--n", "100000", "--t", "0.01", "--seed", "1")
        assert code == 2 and "frequency window" in err


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "betacoal.cli", "--version"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == __version__
