import json
import subprocess
import sys

import pytest

from pgdnn import cli, harness


def files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_gen_data_byte_identical(tmp_path, capsys):
    assert cli.main(["gen-data", "--seed", "7", "--out-dir", str(tmp_path / "a")]) == 0
    assert cli.main(["gen-data", "--seed", "7", "--out-dir", str(tmp_path / "b")]) == 0
    a, b = files(tmp_path / "a"), files(tmp_path / "b")
    assert a == b
    assert {"grid.csv", "pool_261.csv", "test1.csv", "test2.csv", "train_030.csv", "validation_261.csv"} <= set(a)
    line_counts = {name: data.count(b"\n") - 1 for name, data in a.items()}
    assert line_counts["grid.csv"] == 500
    assert line_counts["pool_261.csv"] == 261 and line_counts["test1.csv"] == 239
    assert line_counts["test2.csv"] == 101
    assert [line_counts[f"subset_{n:03d}.csv"] for n in (117, 60, 30)] == [117, 60, 30]


def test_run_grid_filter_runs_one_config(tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(
        ["run-grid", "--train-size", "30", "--physics", "D", "--layers", "2,3,4", "--ensemble", "2", "--out-dir", str(out)]
    )
    assert code == 0
    assert [p.name for p in (out / "results").iterdir()] == ["n030-L2-4-PD.json"]
    rows = (out / "results.csv").read_text().splitlines()
    assert len(rows) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["run"]["configs_run"] == 1
    assert len(summary["configs"]["n030-L2-4-PD"]["seeds"]) == 2
    assert (out / "traces" / "n030-L2-4-PD.csv").exists()
    assert "1 configs, 2 training runs" in capsys.readouterr().out


def test_report_subcommand_reaggregates(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run-grid", "--train-size", "30", "--physics", "none", "--ensemble", "1", "--out-dir", str(out)]) == 0
    before = (out / "results.csv").read_bytes()
    (out / "results.csv").unlink()
    assert cli.main(["report", "--out-dir", str(out)]) == 0
    assert (out / "results.csv").read_bytes() == before


def test_train_one_outputs(tmp_path, capsys):
    out = tmp_path / "one"
    args = ["train-one", "--train-size", "30", "--physics", "W,D", "--layers", "1-4", "--ensemble", "2", "--out-dir", str(out)]
    assert cli.main(args) == 0
    text = capsys.readouterr().out
    assert "n030-L1-4-PWD test1: mean" in text and "test2" in text
    losses = sorted(p.name for p in (out / "loss").iterdir())
    assert losses == ["n030-L1-4-PWD_r00.csv", "n030-L1-4-PWD_r01.csv"]
    assert len((out / "loss" / losses[0]).read_text().splitlines()) == 501
    assert (out / "results" / "n030-L1-4-PWD.json").exists()


def test_default_grid_size():
    args = cli.build_parser().parse_args(["run-grid"])
    sizes, physics, schemes = cli._grid_filters(args)
    configs = harness.enumerate_grid(args.seed, args.ensemble, sizes, physics, schemes)
    assert len(configs) == 196
    assert len(configs) * args.ensemble == 9800


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["train-one"],
        ["train-one", "--train-size", "50"],
        ["train-one", "--train-size", "30", "--physics", "D"],
        ["train-one", "--train-size", "30", "--layers", "2"],
        ["train-one", "--train-size", "30", "--physics", "X", "--layers", "2"],
        ["run-grid", "--train-size", "31"],
        ["run-grid", "--layers", "7"],
        ["run-grid", "--ensemble", "0"],
        ["run-grid", "--physics", "none", "--layers", "2"],
        ["gen-data", "--seed", "abc"],
    ],
)
def test_usage_errors_exit_1(argv, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        code = cli.main(argv + (["--out-dir", str(tmp_path)] if argv and argv[0] in cli.COMMANDS else []))
        raise SystemExit(code)
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_report_without_results_is_usage_error(tmp_path, capsys):
    assert cli.main(["report", "--out-dir", str(tmp_path)]) == 1


def test_runtime_failure_exit_2(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["gen-data", "--out-dir", str(blocker / "sub")]) == 2
    assert "pgdnn:" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pgdnn", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("gen-data", "train-one", "run-grid", "report"):
        assert name in proc.stdout


def test_interrupt_flushes_partial_report(tmp_path, monkeypatch, capsys):
    def fake_run_grid(configs, jobs, target_scale, on_result):
        on_result(harness.run_ensemble(configs[0], target_scale=target_scale))
        raise KeyboardInterrupt

    monkeypatch.setattr(harness, "run_grid", fake_run_grid)
    out = tmp_path / "out"
    code = cli.main(["run-grid", "--train-size", "30", "--ensemble", "1", "--out-dir", str(out)])
    assert code == 2
    assert len((out / "results.csv").read_text().splitlines()) == 3
