import json
import shutil
import subprocess

import pytest
import yaml
from click.testing import CliRunner

from pqdaf.cli import main
from pqdaf.config import load_config
from pqdaf.dataset_ops import read_manifest
from pqdaf.filtering import read_audit
from pqdaf.samples import CATEGORIES

TINY = {
    "data": {"fewshot_identities": 10, "eval_identities": 2},
    "generator": {"iterations": 3, "T": 50},
    "generate": {"n_per_class": 5, "steps": 2},
    "mix": {"k_shot": 2, "ratio": 1.0},
    "train": {"epochs": 1},
    "sweep": {"ratios": [0.5, 1.0], "seeds": [0]},
}


def write_config(path, **sections):
    cfg = {k: dict(v) for k, v in TINY.items()}
    for key, value in sections.items():
        cfg.setdefault(key, {}).update(value)
    path.write_text(yaml.safe_dump(cfg))
    return path


def run(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env, catch_exceptions=False)


def error_line(result):
    return json.loads(result.stderr.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root / "tiny.yaml")
    assert run("make-data", "--config", cfg, "--out-dir", root / "run").exit_code == 0
    assert run("train-generator", "--config", cfg, "--out-dir", root / "run").exit_code == 0
    return root, cfg


def test_make_data_and_generator_outputs(workspace):
    root, _ = workspace
    real = read_manifest(root / "run/data/real/manifest.jsonl")
    assert len(real) == 100
    assert (root / "run/generator/generator.pt").exists()
    assert (root / "run/data/real/config.yaml").exists()


def test_generate_count_and_reproducibility(workspace):
    root, cfg = workspace
    out_a, out_b = root / "ga/pool.jsonl", root / "gb/pool.jsonl"
    for out in (out_a, out_b):
        r = run("generate", "--config", cfg, "--out-dir", root / "run", "--output", out)
        assert r.exit_code == 0, r.output
    pool = read_manifest(out_a)
    assert len(pool) == 50
    assert {c: sum(r.category == c for r in pool) for c in CATEGORIES} == {c: 5 for c in CATEGORIES}
    assert all(r.provenance == "synthetic" and r.score is None for r in pool)
    for rec in pool:
        assert (out_a.parent / rec.path).read_bytes() == (out_b.parent / rec.path).read_bytes()


def test_generate_zero(workspace):
    root, cfg = workspace
    r = run("generate", "--config", cfg, "--out-dir", root / "run", "--n-per-class", 0, "--output", root / "g0/p.jsonl")
    assert r.exit_code == 0
    assert len(read_manifest(root / "g0/p.jsonl")) == 0


def _pool(workspace, n=5):
    root, cfg = workspace
    out = root / f"pool{n}/pool.jsonl"
    if not out.exists():
        r = run("generate", "--config", cfg, "--out-dir", root / "run", "--n-per-class", n, "--output", out)
        assert r.exit_code == 0, r.output
    return out


@pytest.mark.parametrize("response,expected", [("1.0", 50), ("0.5", 0)])
def test_filter_with_fixed_mock(workspace, response, expected, tmp_path):
    root, _ = workspace
    cfg = write_config(tmp_path / "c.yaml", filter={"mock_response": response})
    r = run("filter", "--config", cfg, "--out-dir", root / "run", "--pool", _pool(workspace),
            "--output", tmp_path / "kept.jsonl")
    assert r.exit_code == 0, r.output
    assert len(read_manifest(tmp_path / "kept.jsonl")) == expected


def test_printed_counts_match_audit(workspace, tmp_path):
    root, cfg = workspace
    r = run("filter", "--config", cfg, "--out-dir", root / "run", "--pool", _pool(workspace),
            "--output", tmp_path / "kept.jsonl", "--tau", 0.3)
    assert r.exit_code == 0
    audit = read_audit(tmp_path / "audit.jsonl")
    lines = {ln.split()[0]: ln for ln in r.output.splitlines() if ln.startswith("C")}
    for c in CATEGORIES:
        kept = sum(a.category == c and a.decision == "kept" for a in audit)
        assert f"kept={kept} " in lines[c.code]
    assert len(read_manifest(tmp_path / "kept.jsonl")) == sum(a.decision == "kept" for a in audit)
    assert yaml.safe_load((tmp_path / "config.yaml").read_text())["filter"]["tau"] == 0.3


def test_mix_one_to_two_and_provenance_chain(workspace, tmp_path):
    root, _ = workspace
    cfg = write_config(tmp_path / "c.yaml", filter={"mock_response": "0.9"})
    kept = tmp_path / "f/kept.jsonl"
    assert run("filter", "--config", cfg, "--out-dir", root / "run", "--pool", _pool(workspace, 20),
               "--output", kept).exit_code == 0
    r = run("mix", "--config", cfg, "--out-dir", root / "run", "--real", root / "run/data/real/manifest.jsonl",
            "--pool", kept, "--output", tmp_path / "m/mix.jsonl", "--k-shot", 10, "--ratio", 2)
    assert r.exit_code == 0, r.output
    mixed = read_manifest(tmp_path / "m/mix.jsonl")
    assert len(mixed) == 300
    audit = {a.sample_id: a for a in read_audit(tmp_path / "f/audit.jsonl")}
    for rec in mixed:
        if rec.provenance == "synthetic":
            assert audit[rec.id].decision == "kept" and audit[rec.id].s >= 0.8
            assert mixed.load_image(rec).height == 32


def test_shortfall_exit_code(workspace, tmp_path):
    root, _ = workspace
    cfg = write_config(tmp_path / "c.yaml", filter={"mock_response": "1.0"})
    kept = tmp_path / "kept.jsonl"
    run("filter", "--config", cfg, "--out-dir", root / "run", "--pool", _pool(workspace), "--output", kept)
    r = run("mix", "--config", cfg, "--out-dir", root / "run", "--real", root / "run/data/real/manifest.jsonl",
            "--pool", kept, "--output", tmp_path / "mix.jsonl", "--k-shot", 10, "--ratio", 1)
    assert r.exit_code == 4
    err = error_line(r)
    assert err["exit_code"] == 4 and "C0" in err["message"]


def test_remote_scorer_errors(workspace, tmp_path):
    root, cfg = workspace
    base = ("filter", "--config", cfg, "--out-dir", root / "run", "--pool", _pool(workspace),
            "--output", tmp_path / "k.jsonl", "--scorer", "remote")
    r = run(*base, env={"PQDAF_SCORER_ENDPOINT": None})
    assert r.exit_code == 2 and error_line(r)["error"] == "validation"
    r = run(*base, "--scorer-endpoint", "http://127.0.0.1:9/score")
    assert r.exit_code == 3 and error_line(r)["exit_code"] == 3


def test_bad_inputs_exit_two(workspace, tmp_path):
    root, cfg = workspace
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"format_version": 1, "split": "train", "seed": 0}\n{"id": "a"}\n')
    r = run("filter", "--config", cfg, "--out-dir", root / "run", "--pool", bad, "--output", tmp_path / "k.jsonl")
    assert r.exit_code == 2 and "line 2" in error_line(r)["message"]
    r = run("filter", "--config", cfg, "--tau", 1.5, "--pool", _pool(workspace))
    assert r.exit_code == 2
    r = run("mix", "--config", tmp_path / "missing.yaml")
    assert r.exit_code == 2


def test_endpoint_precedence(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", filter={"scorer": "remote", "scorer_endpoint": "http://file"})
    assert load_config(cfg, env={}).filter.scorer_endpoint == "http://file"
    env = {"PQDAF_SCORER_ENDPOINT": "http://env"}
    assert load_config(cfg, env=env).filter.scorer_endpoint == "http://env"
    flagged = load_config(cfg, {"filter.scorer_endpoint": "http://flag"}, env=env)
    assert flagged.filter.scorer_endpoint == "http://flag"


def test_train_eval_and_sweep(workspace, tmp_path):
    root, _ = workspace
    cfg = write_config(tmp_path / "c.yaml", filter={"mock_response": "1.0"})
    out = tmp_path / "run"
    common = ("--config", cfg, "--out-dir", out)
    real = root / "run/data/real/manifest.jsonl"
    ev = root / "run/data/eval/manifest.jsonl"
    assert run("filter", *common, "--pool", _pool(workspace)).exit_code == 0
    assert run("mix", *common, "--real", real).exit_code == 0
    r = run("train", *common, "--eval-manifest", ev)
    assert r.exit_code == 0 and r.output.startswith("top1=")
    metrics = json.loads((out / "train/metrics.json").read_text())
    r = run("eval", *common, "--manifest", ev)
    assert r.exit_code == 0 and f"top1={metrics['top1']:.6f}" in r.output
    r = run("sweep", *common, "--real", real, "--eval-manifest", ev)
    assert r.exit_code == 0, r.output
    assert len(r.output.strip().splitlines()) == 2
    assert (out / "sweep/results.csv").read_text().count("\n") == 3
    assert (out / "sweep/config.yaml").exists()


def test_console_script_installed():
    exe = shutil.which("pqdaf")
    assert exe is not None
    out = subprocess.run([exe, "--help"], capture_output=True, text=True, check=True).stdout
    for cmd in ("make-data", "train-generator", "generate", "filter", "mix", "train", "eval", "sweep"):
        assert cmd in out
