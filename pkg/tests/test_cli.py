import hashlib
import subprocess
import sys

import pytest

from cervispec import cli
from cervispec.spectra import TEST_COUNTS, TRAIN_COUNTS, load_dataset

FAST = ["--pool-size", "2", "--repetitions", "2", "--set", "rbf.max_epochs=200",
        "--set", "mlp.max_epochs=200"]


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_generate_matches_table1_and_is_deterministic(tmp_path, capsys):
    assert cli.main(["generate", "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["generate", "--out", str(tmp_path / "b" / "nested")]) == 0
    tr = load_dataset(tmp_path / "a" / "train.csv")
    te = load_dataset(tmp_path / "a" / "test.csv")
    assert tr.tally() == TRAIN_COUNTS and te.tally() == TEST_COUNTS
    for name in ("train.csv", "test.csv", "manifest.txt", "synth_train.cfg"):
        assert digest(tmp_path / "a" / name) == digest(tmp_path / "b" / "nested" / name)
    assert "seed = 42" in (tmp_path / "a" / "manifest.txt").read_text()


def test_generate_path_is_a_file(tmp_path, capsys):
    f = tmp_path / "file"
    f.write_text("x")
    assert cli.main(["generate", "--out", str(f / "sub")]) == 1
    assert "error [" in capsys.readouterr().err


def test_run_one_step_outputs_and_config_echo(tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["run", "one-step", "--costs", "2.5", "--out", str(out)] + FAST) == 0
    csv_text = (out / "report.csv").read_text()
    rows = [l for l in csv_text.splitlines() if not l.startswith("#")]
    assert rows[0] == "method,combiner,cost,sensitivity,specificity,sens_std,spec_std"
    assert [r.split(",")[1] for r in rows[1:]] == ["single", "average", "median"]
    manifest = (out / "manifest.txt").read_text()
    for key in cli.DEFAULTS:
        assert f"\n{key} = " in manifest
        assert f"# {key} = " in csv_text
        assert f"# {key} = " in (out / "report.txt").read_text()
    assert "seeds (per repetition): 0..1; 2..3" in manifest


def test_repetitions_one_gives_zero_std(tmp_path):
    out = tmp_path / "r1"
    args = ["run", "--pool-size", "2", "--repetitions", "1", "--set", "rbf.max_epochs=100",
            "--out", str(out)]
    assert cli.main(args) == 0
    rows = [l.split(",") for l in (out / "report.csv").read_text().splitlines()[1:]
            if not l.startswith("#")]
    assert all(r[-1] == "0.0" and r[-2] == "0.0" for r in rows)


def test_manifest_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--out", str(a)] + FAST) == 0
    assert cli.main(["run", "--config", str(a / "manifest.txt"), "--out", str(b)]) == 0
    for name in ("report.csv", "report.txt", "manifest.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_sweep_rows_sorted_per_combiner(tmp_path):
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--costs", "3,1,2", "--out", str(out)] + FAST) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "combiner,cost,sensitivity,specificity,sens_std,spec_std"
    body = [l.split(",") for l in lines[1:]]
    assert [(r[0], r[1]) for r in body] == [("average", "1"), ("average", "2"), ("average", "3"),
                                            ("median", "1"), ("median", "2"), ("median", "3")]
    for comb in ("average", "median"):
        t = (out / f"tradeoff_{comb}.csv").read_text().splitlines()
        assert t[0] == "specificity,sensitivity" and len(t) == 4


def test_sweep_single_cost_one_combiner(tmp_path):
    out = tmp_path / "one"
    assert cli.main(["sweep", "--costs", "2", "--combiner", "med", "--out", str(out)] + FAST) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("median,2,")
    assert not (out / "tradeoff_average.csv").exists()


def test_default_sweep_costs_are_table5(monkeypatch):
    seen = {}

    def fake(args):
        seen["costs"] = args.opt_costs
        return 0
    monkeypatch.setattr(cli, "cmd_sweep", fake)
    assert cli.main(["sweep"]) == 0
    assert seen["costs"] == "1,2,2.5,3,4,5"


def test_validation_errors_exit_1(tmp_path, capsys):
    assert cli.main(["run", "--pipeline", "nope", "--out", str(tmp_path)]) == 1
    assert cli.main(["run", "--pool-size", "0", "--out", str(tmp_path)]) == 1
    assert cli.main(["run", "--set", "bogus=1", "--out", str(tmp_path)]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert cli.main(["run", "--dataset", "file", "--train-path", "nope.csv",
                     "--out", str(tmp_path)]) == 1
    assert cli.main(["sweep", "--costs", "1,-2", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "error [cervispec." in err


def test_numerical_failure_exit_2(tmp_path, capsys):
    args = ["run", "--pool-size", "1", "--repetitions", "1", "--set", "rbf.learning_rate=50",
            "--set", "rbf.max_epochs=3000", "--set", "rbf.stop_patience=3000",
            "--set", "rbf.min_rel_improvement=0", "--out", str(tmp_path)]
    assert cli.main(args) == 2
    err = capsys.readouterr().err
    assert "numerical failure [cervispec.models]" in err and "epoch" in err


def test_file_dataset_run(tmp_path):
    assert cli.main(["generate", "--out", str(tmp_path / "g")]) == 0
    out = tmp_path / "r"
    assert cli.main(["run", "--dataset", "file", "--train-path", str(tmp_path / "g/train.csv"),
                     "--test-path", str(tmp_path / "g/test.csv"), "--out", str(out)] + FAST) == 0
    synth = tmp_path / "s"
    assert cli.main(["run", "--out", str(synth)] + FAST) == 0
    body = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("#")]
    assert body(out / "report.csv") == body(synth / "report.csv")


def test_preprocess_and_reduce(tmp_path, capsys):
    assert cli.main(["generate", "--out", str(tmp_path)]) == 0
    fm_path = tmp_path / "fm.csv"
    assert cli.main(["preprocess", "--input", str(tmp_path / "train.csv"), "--output",
                     str(fm_path), "--mode", "normalized_mean_scaled", "--pairs", "algo2"]) == 0
    text = fm_path.read_text()
    assert text.startswith("# preprocessing_tag=normalized_mean_scaled")
    assert "I_460_660" in text.splitlines()[1]
    capsys.readouterr()
    assert cli.main(["reduce-wavelengths", "--input", str(tmp_path / "train.csv"),
                     "--top-k", "13"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    pairs = [tuple(map(int, l.split(","))) for l in lines if not l.startswith("#")]
    assert len(pairs) == 13 and pairs == sorted(pairs)


def test_report_subcommand(tmp_path, capsys):
    out = tmp_path / "r"
    assert cli.main(["run", "--out", str(out)] + FAST) == 0
    capsys.readouterr()
    assert cli.main(["report", "--input", str(out / "report.csv")]) == 0
    text = capsys.readouterr().out
    assert "Colposcopy" in text and "one-step-rbf average" in text
    assert text == (out / "report.txt").read_text().split("\n\n")[0] + "\n"


def test_env_var_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path))
    assert cli.main(["generate"]) == 0
    assert (tmp_path / "cervispec-generate" / "train.csv").exists()


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "cervispec", "generate", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "test.csv").exists()
