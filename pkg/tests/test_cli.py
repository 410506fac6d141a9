import subprocess
import sys

import pytest
import yaml

from safebo.harness.cli import EXIT_CONFIG, EXIT_OK, EXIT_SAFETY, main
from safebo.rkhs import load_function

BASE = dict(name="cli", seed=1, repetitions=2, iterations=4, functions=dict(count=2),
            algorithms=[{"type": "losbo"}, {"type": "safeopt", "label": "heuristic"}])


def _write(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def test_run_and_report(tmp_path, capsys):
    cfg = _write(tmp_path, BASE)
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out)]) == EXIT_OK
    steps = out / "cli_steps.csv"
    summary = out / "cli_summary.csv"
    assert steps.exists() and summary.exists()
    header = steps.read_text().splitlines()[0].split(",")
    for col in ("function_id", "rep", "step", "algorithm", "x", "y", "metric", "safe_set_size",
                "beta", "violation", "status"):
        assert col in header
    assert main(["report", str(steps), "--out", str(tmp_path / "again.csv")]) == EXIT_OK
    again = (tmp_path / "again.csv").read_text().splitlines()
    original = summary.read_text().splitlines()
    assert sorted(again) == sorted(original)


def test_rerun_is_byte_identical(tmp_path):
    cfg = _write(tmp_path, BASE)
    main(["run", cfg, "--out", str(tmp_path / "a")])
    main(["run", cfg, "--out", str(tmp_path / "b")])
    for name in ("cli_steps.csv", "cli_summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_zero_repetitions(tmp_path):
    cfg = _write(tmp_path, dict(BASE, repetitions=0))
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK


@pytest.mark.parametrize("cfg", [
    dict(BASE, algorithms=[{"type": "unknown"}]),
    dict(BASE, algorithms=[{"type": "safeopt", "bound": {"strategy": "chowdhury"}}]),
    "just a string",
])
def test_config_errors_exit_2(tmp_path, cfg):
    path = _write(tmp_path, cfg)
    assert main(["run", path, "--out", str(tmp_path / "o")]) in (EXIT_CONFIG,)


def test_missing_config_exit_2(tmp_path):
    assert main(["run", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG


def test_no_tripwire_outside_bounded_noise_regime(tmp_path):
    # with E below the noise bound the safety guarantee does not apply
    cfg = dict(BASE, repetitions=20, iterations=20, noise=dict(kind="uniform", magnitude=0.5),
               noise_margin_factor=0.0, algorithms=[{"type": "losbo"}])
    path = _write(tmp_path, cfg)
    assert main(["run", path, "--out", str(tmp_path / "o")]) == EXIT_OK


def test_safety_tripwire_fires(tmp_path, monkeypatch):
    import safebo.harness.cli as cli

    class Fake:
        records, summary = [], []

        def violations_where_forbidden(self):
            return 1

    monkeypatch.setattr(cli, "run_campaign", lambda cfg, workers=None: Fake())
    monkeypatch.setattr(cli, "write_outputs", lambda res, d: ("s", "t"))
    assert main(["run", _write(tmp_path, BASE)]) == EXIT_SAFETY


def test_generate(tmp_path):
    out = tmp_path / "fns"
    assert main(["generate", "--count", "3", "--out", str(out), "--seed", "4"]) == EXIT_OK
    files = sorted(out.iterdir())
    assert len(files) == 3
    f = load_function(files[0])
    assert f.rkhs_norm == 10.0
    assert main(["generate", "--kind", "pre_rkhs", "--family", "matern32", "--length-scale", "0.3",
                 "--count", "1", "--out", str(tmp_path / "pre")]) == EXIT_OK


def test_pinned_files_campaign(tmp_path):
    main(["generate", "--count", "2", "--out", str(tmp_path / "fns")])
    cfg = dict(BASE, functions=dict(source="files", files=["fns/function_000.txt", "fns/function_001.txt"]))
    assert main(["run", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_OK


def test_bound_check(tmp_path, capsys):
    out = tmp_path / "bc.csv"
    assert main(["bound-check", "--num-functions", "2", "--num-datasets", "3", "--out", str(out)]) == EXIT_OK
    assert "fraction" in capsys.readouterr().out
    assert len(out.read_text().splitlines()) == 3
    bad = _write(tmp_path, {"unknown_key": 1}, "bc.yaml")
    assert main(["bound-check", "--config", bad]) == EXIT_CONFIG


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "safebo", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("generate", "run", "report", "bound-check"):
        assert cmd in proc.stdout
