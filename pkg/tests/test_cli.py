"""End-to-end CLI behavior: exit codes, artifacts, determinism."""

import json
import os

import pytest

from sosgibbs.cli import (
    EXIT_CAPACITY,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_UNKNOWN_EXPERIMENT,
    main,
)
from sosgibbs.config import EXPERIMENTS


def write(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


VERIFY = """\
[experiment]
name = verify-sos
output_dir = out

[hamiltonian]
n = 2

[sampler]
betas = 0.5,2
"""


@pytest.fixture
def outroot(tmp_path, monkeypatch):
    root = tmp_path / "results"
    monkeypatch.setenv("SOSGIBBS_OUTPUT_ROOT", str(root))
    return root


def test_list_prints_registry(capsys):
    assert main(["list"]) == EXIT_OK
    out = capsys.readouterr().out.split()
    assert out == list(EXPERIMENTS)


def test_validate_ok(tmp_path, capsys):
    cfg = write(tmp_path, VERIFY)
    assert main(["validate", cfg]) == EXIT_OK
    assert "ok: verify-sos" in capsys.readouterr().out


def test_run_writes_csv_manifest_report(tmp_path, outroot, capsys):
    cfg = write(tmp_path, VERIFY)
    assert main(["run", cfg]) == EXIT_OK
    outdir = outroot / "out"
    names = sorted(os.listdir(outdir))
    assert "manifest.json" in names and "report.json" in names
    csvs = [n for n in names if n.endswith(".csv")]
    assert csvs
    # CSV: '#' preamble lines, then a header row
    lines = (outdir / csvs[0]).read_text().splitlines()
    k = 0
    while lines[k].startswith("# "):
        k += 1
    assert k >= 1 and "," in lines[k]
    # manifest echoes the fully resolved config (defaults included)
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["experiment"] == "verify-sos"
    assert manifest["config"]["experiment"]["seed"] == "1234"
    assert manifest["config"]["hamiltonian"]["model"] == "tfim"
    assert set(manifest["artifacts"]) >= {"report.json"} | set(csvs)
    report = json.loads((outdir / "report.json").read_text())
    assert report["passed"] is True
    assert "[PASS]" in capsys.readouterr().out


def test_rerun_is_byte_identical(tmp_path, outroot):
    cfg = write(tmp_path, VERIFY)
    assert main(["run", cfg]) == EXIT_OK
    outdir = outroot / "out"
    first = {n: (outdir / n).read_bytes() for n in os.listdir(outdir)
             if not n.endswith(".png")}
    assert main(["run", cfg]) == EXIT_OK
    for n, blob in first.items():
        assert (outdir / n).read_bytes() == blob


def test_output_root_env_is_respected(tmp_path, monkeypatch):
    other = tmp_path / "elsewhere"
    monkeypatch.setenv("SOSGIBBS_OUTPUT_ROOT", str(other))
    cfg = write(tmp_path, VERIFY)
    assert main(["run", cfg]) == EXIT_OK
    assert (other / "out" / "report.json").exists()


def test_unknown_experiment_exit_3(tmp_path, outroot, capsys):
    cfg = write(tmp_path, "[experiment]\nname = not-a-thing\n")
    assert main(["run", cfg]) == EXIT_UNKNOWN_EXPERIMENT
    assert "error:" in capsys.readouterr().err
    assert not outroot.exists()


def test_parse_error_exit_2_no_partial_output(tmp_path, outroot, capsys):
    cfg = write(tmp_path, VERIFY + "[bogus]\nx = 1\n")
    assert main(["run", cfg]) == EXIT_PARSE
    assert "error:" in capsys.readouterr().err
    assert not outroot.exists()


def test_malformed_ini_exit_2(tmp_path, outroot):
    cfg = write(tmp_path, "this is not ini\n")
    assert main(["run", cfg]) == EXIT_PARSE
    assert not outroot.exists()


def test_bad_value_exit_2(tmp_path, outroot):
    cfg = write(tmp_path, VERIFY.replace("betas = 0.5,2", "betas = a,b"))
    assert main(["run", cfg]) == EXIT_PARSE


def test_capacity_exit_4(tmp_path, outroot):
    cfg = write(tmp_path, VERIFY.replace("n = 2", "n = 9"))
    assert main(["run", cfg]) == EXIT_CAPACITY


def test_figures_are_rendered(tmp_path, outroot):
    cfg = write(tmp_path, VERIFY)
    assert main(["run", cfg]) == EXIT_OK
    manifest = json.loads((outroot / "out" / "manifest.json").read_text())
    figs = [a for a in manifest["artifacts"] if a.endswith(".png")]
    for f in figs:
        assert (outroot / "out" / f).exists()
