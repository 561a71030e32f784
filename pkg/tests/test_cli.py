import json
import math

import pytest

from cbdsim import cli

G = 9.81


def run_ball(ball_path, tmp_path, mode="symbolic", fmt="csv", tag=""):
    out = tmp_path / f"trace_{mode}{tag}.{fmt}"
    imp = tmp_path / f"impulses_{mode}{tag}.{fmt}"
    argv = [
        "run", str(ball_path), "--top", "Main", "--mode", mode,
        "--step", "1e-3", "--end", "2", "--zc-tol", "1e-9",
        "--min-step", "1e-12", "--format", fmt,
        "--out", str(out), "--impulses", str(imp),
    ]
    code = cli.main(argv)
    return code, out, imp


class TestRun:
    def test_symbolic_run_writes_trace_and_impulses(self, ball_path, tmp_path,
                                                    capsys):
        code, out, imp = run_ball(ball_path, tmp_path)
        assert code == 0
        manifest = json.loads(capsys.readouterr().out)
        assert manifest["mode"] == "symbolic"
        assert manifest["impulse_events"] == 1
        assert manifest["watched"] == ["y", "v", "force"]
        assert len(manifest["source_sha256"]) == 64
        lines = imp.read_text().splitlines()
        assert lines[0] == "time,signal,order,coefficient"
        assert len(lines) == 2
        time_s, signal, order_s, coefficient_s = lines[1].split(",")
        assert signal == "force" and order_s == "0"
        assert abs(float(time_s) - math.sqrt(2 * 10 / G)) < 1e-3
        assert float(coefficient_s) == pytest.approx(
            2 * math.sqrt(2 * G * 10), rel=1e-3
        )

    def test_unknown_top_exits_one(self, ball_path, tmp_path, capsys):
        code = cli.main([
            "run", str(ball_path), "--top", "Nope", "--step", "1e-3",
            "--end", "1", "--out", str(tmp_path / "t.csv"),
        ])
        assert code == 1
        assert "Nope" in capsys.readouterr().err

    def test_bad_model_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.cbd"
        bad.write_text("cbd Main(out y){ block c = Quux(); c.out -> y; }")
        code = cli.main([
            "run", str(bad), "--top", "Main", "--step", "1e-3",
            "--end", "1", "--out", str(tmp_path / "t.csv"),
        ])
        assert code == 1
        assert "unknown block kind" in capsys.readouterr().err

    def test_runtime_error_exits_two(self, tmp_path, capsys):
        broken = tmp_path / "div.cbd"
        broken.write_text(
            "cbd Main(out y){ block z = Constant(0); block i = Inverter(); "
            "z.out -> i.in; i.out -> y; }"
        )
        code = cli.main([
            "run", str(broken), "--top", "Main", "--step", "0.1",
            "--end", "1", "--out", str(tmp_path / "t.csv"),
        ])
        assert code == 2
        assert "i:" in capsys.readouterr().err

    def test_numerical_impulse_file_is_header_only(self, ball_path, tmp_path,
                                                   capsys):
        code, out, imp = run_ball(ball_path, tmp_path, mode="numerical")
        assert code == 0
        capsys.readouterr()
        assert imp.read_text() == "time,signal,order,coefficient\n"

    def test_trace_text_round_trips_exactly(self, ball_path, tmp_path, capsys):
        code, out, imp = run_ball(ball_path, tmp_path)
        capsys.readouterr()
        trace = cli.read_trace(out, imp)
        reloaded = tmp_path / "reloaded.csv"
        cli.write_trace(trace, reloaded, "csv")
        assert reloaded.read_text() == out.read_text()

    def test_json_format_mirrors_csv(self, ball_path, tmp_path, capsys):
        code, out_json, imp_json = run_ball(ball_path, tmp_path, fmt="json")
        code, out_csv, imp_csv = run_ball(ball_path, tmp_path, tag="_c")
        capsys.readouterr()
        payload = json.loads(out_json.read_text())
        assert set(payload) == {"trace"}
        assert set(payload["trace"][0]) == {"time", "signal", "left", "right"}
        from_json = cli.read_trace(out_json, imp_json)
        from_csv = cli.read_trace(out_csv, imp_csv)
        assert from_json.times == from_csv.times
        assert from_json.signals == from_csv.signals
        assert from_json.impulses == from_csv.impulses

    def test_watch_selects_signals(self, ball_path, tmp_path, capsys):
        out = tmp_path / "watched.csv"
        code = cli.main([
            "run", str(ball_path), "--top", "Main", "--step", "1e-3",
            "--end", "0.01", "--watch", "y,det/contact",
            "--out", str(out),
        ])
        assert code == 0
        manifest = json.loads(capsys.readouterr().out)
        assert manifest["watched"] == ["y", "det/contact"]
        trace = cli.read_trace(out)
        assert set(trace.signals) == {"y", "det/contact"}

    def test_determinism_byte_identical(self, ball_path, tmp_path, capsys):
        _, out1, imp1 = run_ball(ball_path, tmp_path, tag="_a")
        _, out2, imp2 = run_ball(ball_path, tmp_path, tag="_b")
        capsys.readouterr()
        assert out1.read_bytes() == out2.read_bytes()
        assert imp1.read_bytes() == imp2.read_bytes()


class TestTable:
    def test_first_order(self, capsys):
        assert cli.main(["table", "--order", "1", "--step", "0.1"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "offset,order0,order1"
        assert out[1].startswith("-1,0,0")
        assert out[2].split(",")[2] == "10"
        assert any(line.startswith("max_magnitude,") for line in out)
        assert any(line.startswith("halforder_estimate,") for line in out)

    def test_order_zero_prints_step_column(self, capsys):
        assert cli.main(["table", "--order", "0", "--step", "1"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert [line.split(",")[1] for line in out[1:]] == ["0", "1"]

    def test_cascade_maximum_reported(self, capsys):
        assert cli.main(["table", "--order", "5", "--step", "0.1"]) == 0
        out = capsys.readouterr().out
        assert "max_magnitude,600000" in out

    def test_invalid_arguments(self, capsys):
        assert cli.main(["table", "--order", "2", "--step", "0"]) == 1


class TestCompare:
    def test_identical_files(self, ball_path, tmp_path, capsys):
        _, out1, imp1 = run_ball(ball_path, tmp_path, tag="_a")
        _, out2, imp2 = run_ball(ball_path, tmp_path, tag="_b")
        capsys.readouterr()
        code = cli.main([
            "compare", str(out1), str(out2),
            "--impulses-a", str(imp1), "--impulses-b", str(imp2),
        ])
        report = json.loads(capsys.readouterr().out)
        assert code == 0 and report["ok"]

    def test_symbolic_vs_numerical(self, ball_path, tmp_path, capsys):
        _, sym, sym_imp = run_ball(ball_path, tmp_path, mode="symbolic")
        _, num, _ = run_ball(ball_path, tmp_path, mode="numerical")
        capsys.readouterr()
        code = cli.main([
            "compare", str(sym), str(num),
            "--rel-tol", "1e-12", "--impulses-a", str(sym_imp),
        ])
        report = json.loads(capsys.readouterr().out)
        assert code == 0 and report["ok"]
        assert len(report["impulse_checks"]) == 1

    def test_mismatched_step_exits_three(self, ball_path, tmp_path, capsys):
        _, out1, _ = run_ball(ball_path, tmp_path, tag="_a")
        other = tmp_path / "coarse.csv"
        cli.main([
            "run", str(ball_path), "--top", "Main", "--step", "2e-3",
            "--end", "2", "--out", str(other),
        ])
        capsys.readouterr()
        assert cli.main(["compare", str(out1), str(other)]) == 3

    def test_unreadable_input(self, tmp_path, capsys):
        missing = tmp_path / "nope.csv"
        assert cli.main(["compare", str(missing), str(missing)]) == 2


class TestPlotData:
    def test_ball_segments_and_arrows(self, ball_path, tmp_path, capsys):
        _, out, imp = run_ball(ball_path, tmp_path)
        capsys.readouterr()
        plot = tmp_path / "plot.json"
        code = cli.main([
            "plotdata", "--trace", str(out), "--impulses", str(imp),
            "--out", str(plot),
        ])
        assert code == 0
        payload = json.loads(plot.read_text())["signals"]
        # The velocity jumps once: two polyline segments.  The position is
        # continuous: one segment.  The force carries the single arrow.
        assert len(payload["v"]["segments"]) == 2
        assert len(payload["y"]["segments"]) == 1
        assert len(payload["force"]["arrows"]) == 1
        arrow = payload["force"]["arrows"][0]
        assert arrow["order"] == 0

    def test_segment_count_matches_discontinuities(self, ball_path, tmp_path,
                                                   capsys):
        _, out, imp = run_ball(ball_path, tmp_path)
        capsys.readouterr()
        plot = tmp_path / "plot.json"
        cli.main(["plotdata", "--trace", str(out), "--impulses", str(imp),
                  "--out", str(plot)])
        trace = cli.read_trace(out, imp)
        payload = json.loads(plot.read_text())["signals"]
        for name, samples in trace.signals.items():
            jumps = sum(1 for s in samples if s.left != s.right)
            assert len(payload[name]["segments"]) == jumps + 1

    def test_empty_impulse_log_yields_no_arrows(self, ball_path, tmp_path,
                                                capsys):
        _, out, imp = run_ball(ball_path, tmp_path, mode="numerical")
        capsys.readouterr()
        plot = tmp_path / "plot.json"
        cli.main(["plotdata", "--trace", str(out), "--impulses", str(imp),
                  "--out", str(plot)])
        payload = json.loads(plot.read_text())["signals"]
        assert all(not entry["arrows"] for entry in payload.values())


class TestNumberFormat:
    def test_seventeen_significant_digits(self):
        value = 1.4278431229270645
        assert cli._fmt(value) == "1.4278431229270645"
        assert float(cli._fmt(value)) == value
        assert float(cli._fmt(1 / 3)) == 1 / 3
