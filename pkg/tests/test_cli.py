"""Command surface: parsing, reports, exit codes, determinism."""

import json

import pytest

import epnopt as ep
from epnopt.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_PARSE, load_document, main
from helpers import CONFIG_DIR

TABLE1 = str(CONFIG_DIR / "table1.yaml")
TABLE2 = str(CONFIG_DIR / "table2.yaml")
TABLE3 = str(CONFIG_DIR / "table3.yaml")


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    report = json.loads(captured.out) if captured.out.strip() else None
    return code, report, captured.err


class TestLoadDocument:
    def test_bundled_configs(self):
        net, alloc, sim = load_document(TABLE1)
        assert net.n == 2
        assert net.harvest_rate == 150.0
        assert net.stations[1].delivery_rate == 80.0
        assert alloc is not None and alloc.p[0] == 0.4594
        assert sim["replications"] == 10
        net2, alloc2, _ = load_document(TABLE2)
        assert net2.n == 3 and alloc2 is None

    def test_json_is_valid_yaml(self, tmp_path):
        doc = tmp_path / "net.json"
        doc.write_text(
            '{"gamma": 100.0, "stations": ['
            '{"lambda": 10.0, "w": 50.0, "delta": 5.0, "u": 0.2}]}'
        )
        net, _, _ = load_document(str(doc))
        assert net.harvest_rate == 100.0

    def test_pmf_station(self, tmp_path):
        doc = tmp_path / "net.yaml"
        doc.write_text(
            "gamma: 80.0\nstations:\n"
            "  - {lambda: 40.0, w: 90.0, delta: 5.0, pmf: {1: 0.4, 3: 0.6}}\n"
        )
        net, _, _ = load_document(str(doc))
        assert isinstance(net.stations[0].batch, ep.GeneralBatch)

    @pytest.mark.parametrize(
        "body, fragment",
        [
            ("gamma: 100.0\n", "stations"),
            ("gamma: 100.0\nstations: []\n", "stations"),
            (
                "gamma: 100.0\nstations:\n  - {lambda: 1.0, w: 5.0, delta: 0.0}\n",
                "u' or 'pmf",
            ),
            (
                "gamma: 100.0\nstations:\n"
                "  - {lambda: 1.0, w: 5.0, delta: 0.0, u: 0.2, pmf: {1: 1.0}}\n",
                "u' or 'pmf",
            ),
            (
                "gamma: 100.0\nstations:\n"
                "  - {lambda: -1.0, w: 5.0, delta: 0.0, u: 0.2}\n",
                "stations[0]",
            ),
            (
                "gamma: 100.0\nstations:\n"
                "  - {lambda: 1.0, w: 5.0, delta: 0.0, u: 0.2, extra: 3}\n",
                "unknown field",
            ),
            (
                "gamma: 100.0\nstations:\n"
                "  - {lambda: 1.0, w: 5.0, delta: 0.0, u: 0.2}\nalloc: [0.9]\n",
                "alloc",
            ),
        ],
    )
    def test_diagnostics(self, tmp_path, body, fragment):
        doc = tmp_path / "bad.yaml"
        doc.write_text(body)
        from epnopt.cli import ConfigError

        with pytest.raises(ConfigError) as err:
            load_document(str(doc))
        assert fragment in str(err.value)


class TestSolve:
    def test_table1_report(self, capsys):
        code, report, err = run_cli(capsys, "solve", "--config", TABLE1)
        assert code == EXIT_OK
        assert report["command"] == "solve"
        assert report["C"] == pytest.approx(55.157617, abs=1e-5)
        assert report["C"] == report["W"] + report["E"]
        assert report["q1"][0] == pytest.approx(0.68827, abs=5e-5)
        assert report["feasible_box"]["lower"][0] == pytest.approx(0.29333, abs=1e-5)
        assert report["tool"]["name"] == "epnopt"
        assert "C = " in err

    def test_round_trip_precision(self, capsys):
        code, report, _ = run_cli(capsys, "solve", "--config", TABLE1)
        net, alloc, _ = load_document(TABLE1)
        cb = ep.evaluate_cost(net, alloc)
        # JSON round-trips doubles losslessly
        assert report["C"] == cb.total
        assert report["W"] == cb.response_time

    def test_missing_alloc(self, capsys):
        code, report, err = run_cli(capsys, "solve", "--config", TABLE2)
        assert code == EXIT_PARSE
        assert report is None
        assert "alloc" in err

    def test_unstable_allocation(self, tmp_path, capsys):
        doc = tmp_path / "bad_alloc.yaml"
        doc.write_text(
            "gamma: 150.0\nstations:\n"
            "  - {lambda: 50.0, w: 100.0, delta: 10.0, u: 0.2}\n"
            "  - {lambda: 60.0, w: 80.0, delta: 6.0, u: 0.2}\n"
            "alloc: [0.29, 0.71]\n"
        )
        code, report, err = run_cli(capsys, "solve", "--config", str(doc))
        assert code == EXIT_INFEASIBLE
        assert "pair 1" in err

    def test_invalid_yaml(self, tmp_path, capsys):
        doc = tmp_path / "broken.yaml"
        doc.write_text("gamma: [unclosed\n")
        code, _, err = run_cli(capsys, "solve", "--config", str(doc))
        assert code == EXIT_PARSE
        assert "line" in err


class TestOptimize:
    def test_auto_three_pairs(self, capsys):
        code, report, _ = run_cli(capsys, "optimize", "--config", TABLE2)
        assert code == EXIT_OK
        assert report["method"] == "quartic_system"
        assert report["p"] == pytest.approx([0.5538, 0.3330, 0.1132], abs=5e-5)
        assert report["q1"] == pytest.approx([0.5847, 0.5835, 0.5827], abs=5e-5)
        assert report["C"] == pytest.approx(70.5602, abs=1e-4)
        assert report["residual"] <= 1e-8

    def test_large_gamma_method(self, capsys):
        code, report, _ = run_cli(
            capsys, "optimize", "--config", TABLE3, "--method", "large-gamma"
        )
        assert code == EXIT_OK
        assert report["method"] == "large_gamma_closed_form"
        assert report["p"] == pytest.approx([0.3100, 0.3429, 0.3471], abs=5e-5)
        assert report["C"] == pytest.approx(214.2789, abs=1e-4)

    def test_grid_method(self, capsys):
        code, report, _ = run_cli(
            capsys,
            "optimize", "--config", TABLE1, "--method", "grid", "--grid-step", "1e-3",
        )
        assert code == EXIT_OK
        assert report["method"] == "grid_oracle"
        assert report["p"][0] == pytest.approx(0.4572, abs=1e-3)

    def test_solve_reproduces_reported_cost(self, tmp_path, capsys):
        code, report, _ = run_cli(capsys, "optimize", "--config", TABLE2)
        assert code == EXIT_OK
        doc = tmp_path / "at_optimum.yaml"
        doc.write_text(
            json.dumps(
                {
                    "gamma": 150.0,
                    "stations": [
                        {"lambda": 50.0, "w": 100.0, "delta": 10.0, "u": 0.2},
                        {"lambda": 30.0, "w": 80.0, "delta": 8.0, "u": 0.2},
                        {"lambda": 10.0, "w": 50.0, "delta": 6.0, "u": 0.2},
                    ],
                    "alloc": report["p"],
                }
            )
        )
        code2, report2, _ = run_cli(capsys, "solve", "--config", str(doc))
        assert code2 == EXIT_OK
        assert abs(report2["C"] - report["C"]) <= 1e-12


class TestSweep:
    def test_table1_dataset(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code, report, _ = run_cli(
            capsys, "sweep", "--config", TABLE1, "--step", "0.01", "--out", str(out)
        )
        assert code == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "p1,W,E,C,optimum"
        assert any("INFEASIBLE" in line for line in lines)
        optimum_rows = [l for l in lines if l.endswith(",1")]
        assert len(optimum_rows) == 1
        assert float(optimum_rows[0].split(",")[0]) == pytest.approx(0.4572, abs=1e-4)
        # minimum over feasible rows sits near the optimum
        feasible = [
            (float(l.split(",")[0]), float(l.split(",")[3]))
            for l in lines[1:]
            if "INFEASIBLE" not in l
        ]
        best_p1 = min(feasible, key=lambda t: t[1])[0]
        assert best_p1 == pytest.approx(0.46, abs=0.01)
        assert report["optimum"]["C"] == pytest.approx(55.15740, abs=1e-4)

    def test_table3_surface(self, tmp_path, capsys):
        out = tmp_path / "surface.csv"
        code, report, _ = run_cli(
            capsys, "sweep", "--config", TABLE3, "--step", "0.01", "--out", str(out)
        )
        assert code == EXIT_OK
        header = out.read_text().splitlines()[0]
        assert header == "p1,p2,W,E,C,optimum"
        assert report["grid_min_C"] == pytest.approx(214.278, abs=1e-3)

    def test_step_validation(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "sweep", "--config", TABLE1, "--step", "-0.1",
            "--out", str(tmp_path / "x.csv"),
        )
        assert code == EXIT_PARSE
        assert "step" in err


class TestSimulate:
    def test_short_run_report(self, capsys):
        code, report, _ = run_cli(
            capsys,
            "simulate", "--config", TABLE1,
            "--horizon", "1500", "--warmup", "150", "--reps", "3", "--seed", "5",
        )
        assert code == EXIT_OK
        assert report["analytic_available"]
        assert not report["nonstationary"]
        assert report["rng"]["bit_generator"] == "Philox"
        for entry in report["estimates"]["q1"]:
            assert abs(entry["z"]) < 6.0
        w = report["estimates"]["W"]
        assert w["analytic"] == pytest.approx(0.039956, abs=1e-5)
        assert abs(w["mean"] - w["analytic"]) < 6 * max(w["se"], 1e-9)

    def test_determinism(self, capsys):
        args = (
            "simulate", "--config", TABLE1,
            "--horizon", "800", "--warmup", "80", "--reps", "2", "--seed", "11",
        )
        code1, report1, _ = run_cli(capsys, *args)
        code2, report2, _ = run_cli(capsys, *args)
        assert code1 == code2 == EXIT_OK
        assert report1 == report2

    def test_infeasible_allocation_flagged(self, tmp_path, capsys):
        doc = tmp_path / "starved.yaml"
        doc.write_text(
            "gamma: 150.0\nstations:\n"
            "  - {lambda: 50.0, w: 100.0, delta: 10.0, u: 0.2}\n"
            "  - {lambda: 60.0, w: 80.0, delta: 6.0, u: 0.2}\n"
            "alloc: [0.75, 0.25]\n"
            "sim: {horizon: 1500.0, seed: 3, replications: 2}\n"
        )
        code, report, _ = run_cli(capsys, "simulate", "--config", str(doc))
        assert code == EXIT_OK
        assert report["nonstationary"]
        assert not report["analytic_available"]
        assert report["estimates"]["W"]["z"] is None

    def test_missing_horizon(self, tmp_path, capsys):
        doc = tmp_path / "nohorizon.yaml"
        doc.write_text(
            "gamma: 150.0\nstations:\n"
            "  - {lambda: 50.0, w: 100.0, delta: 10.0, u: 0.2}\n"
            "  - {lambda: 60.0, w: 80.0, delta: 6.0, u: 0.2}\n"
            "alloc: [0.46, 0.54]\n"
        )
        code, _, err = run_cli(capsys, "simulate", "--config", str(doc))
        assert code == EXIT_PARSE
        assert "horizon" in err


class TestGeneralBatchConfigs:
    def test_solve_works_without_box(self, tmp_path, capsys):
        doc = tmp_path / "gen.yaml"
        doc.write_text(
            "gamma: 80.0\nstations:\n"
            "  - {lambda: 40.0, w: 90.0, delta: 5.0, pmf: {1: 0.3, 3: 0.5, 7: 0.2}}\n"
            "alloc: [1.0]\n"
        )
        code, report, _ = run_cli(capsys, "solve", "--config", str(doc))
        assert code == EXIT_OK
        assert report["feasible_box"] is None
        assert 0.0 < report["q1"][0] < 1.0

    def test_optimize_rejected(self, tmp_path, capsys):
        doc = tmp_path / "gen.yaml"
        doc.write_text(
            "gamma: 80.0\nstations:\n"
            "  - {lambda: 40.0, w: 90.0, delta: 5.0, pmf: {1: 1.0}}\n"
            "  - {lambda: 10.0, w: 50.0, delta: 5.0, u: 0.2}\n"
        )
        code, _, err = run_cli(capsys, "optimize", "--config", str(doc))
        assert code == EXIT_PARSE
        assert "geometric" in err
