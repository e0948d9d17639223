import json
import subprocess
import sys

import pytest

from nbrescore.bench import validate_latency_report
from nbrescore.cli import run
from nbrescore.model import EncoderModel, ModelConfig, init_model

TINY = {
    "generator": {"n": 4},
    "train": 30, "dev": 20, "test": 20, "text_sentences": 60,
    "model": {"layers": 1, "hidden": 16, "heads": 2, "ffn": 32, "max_len": 24},
    "training": {"batch_size": 8, "steps": 4, "learning_rate": 1e-3},
    "student": {"layers": 1, "hidden": 8, "heads": 2, "ffn": 16, "max_len": 24},
    "md": {"steps": 3},
    "disc": {"steps": 3},
}


def ok(*argv):
    status = run([str(a) for a in argv])
    assert status == 0, argv
    return status


def error_of(capsys, *argv):
    status = run([str(a) for a in argv])
    line = capsys.readouterr().err.strip().splitlines()[-1]
    payload = json.loads(line)
    assert payload["status"] == status
    return status, payload


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Runs the whole recipe once on a toy config; later tests inspect the files."""
    d = tmp_path_factory.mktemp("recipe")
    cfg = d / "cfg.json"
    cfg.write_text(json.dumps(TINY))
    data = d / "data"
    ok("gen-data", "--config", cfg, "--out-dir", data, "--seed", 3)
    ok("train-mlm", "--text", data / "text.jsonl", "--vocab", data / "vocab.json", "--config", cfg,
       "--out", d / "mlm.json")
    ok("pll", "--model", d / "mlm.json", "--input", data / "text.jsonl", data / "train.jsonl",
       data / "dev.jsonl", data / "test.jsonl", "--out", d / "pll.jsonl")
    ok("train-md", "--init", d / "mlm.json", "--text", data / "text.jsonl", "--nbest", data / "train.jsonl",
       "--pll", d / "pll.jsonl", "--config", cfg, "--out", d / "md.json")
    ok("train-disc", "--init", d / "md.json", "--nbest", data / "train.jsonl", "--pll", d / "pll.jsonl",
       "--objective", "md-mwer", "--config", cfg, "--out", d / "disc.json")
    ok("search-beta", "--model", d / "disc.json", "--nbest", data / "dev.jsonl", "--grid", "0:2:0.5",
       "--out", d / "beta.json")
    ok("evaluate", "--model", d / "disc.json", "--nbest", data / "test.jsonl", "--beta-from", d / "beta.json",
       "--out", d / "eval.json")
    return d


# -- full recipe -----------------------------------------------------------------

def test_recipe_writes_every_artifact(workdir):
    data = workdir / "data"
    for name in ("train.jsonl", "dev.jsonl", "test.jsonl", "text.jsonl", "vocab.json"):
        assert (data / name).exists()
    for name in ("mlm.json", "pll.jsonl", "md.json", "disc.json", "beta.json", "beta.tsv", "beta.png",
                 "eval.json", "eval.png"):
        assert (workdir / name).stat().st_size > 0, name


def test_artifacts_embed_config_and_seed(workdir):
    meta = json.loads((workdir / "data" / "train.jsonl.meta.json").read_text())
    assert meta["seed"] == 3 and meta["config"]["train"] == 30
    ckpt = json.loads((workdir / "disc.json").read_text())
    assert ckpt["meta"]["training"]["objective"] == "md-mwer"
    assert ckpt["meta"]["config"]["training"]["steps"] == 4
    report = json.loads((workdir / "eval.json").read_text())
    assert report["config"]["config"]["beta"] == report["beta"]


def test_search_beta_report_consistent(workdir):
    report = json.loads((workdir / "beta.json").read_text())
    assert [b for b, _ in report["curve"]] == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert report["wer"] == min(w for _, w in report["curve"])
    lines = (workdir / "beta.tsv").read_text().splitlines()
    assert lines[0] == "beta\twer" and len(lines) == 6


def test_evaluate_beta_zero_equals_first_pass(workdir, tmp_path):
    ok("evaluate", "--model", workdir / "disc.json", "--nbest", workdir / "data" / "test.jsonl", "--beta", 0,
       "--out", tmp_path / "e.json", "--no-figure")
    report = json.loads((tmp_path / "e.json").read_text())
    assert report["wer"] == report["first_pass_wer"]
    assert not (tmp_path / "e.png").exists()


def test_same_argv_gives_identical_bytes(workdir, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(TINY))
    out = tmp_path
    outputs = []
    for _ in range(2):
        ok("train-disc", "--init", workdir / "md.json", "--nbest", workdir / "data" / "train.jsonl",
           "--pll", workdir / "pll.jsonl", "--objective", "md-mwed", "--seed", 5, "--config", cfg,
           "--out", out / "m.json")
        ok("evaluate", "--model", out / "m.json", "--nbest", workdir / "data" / "dev.jsonl", "--beta", 0.5,
           "--out", out / "e.json")
        outputs.append([(out / n).read_bytes() for n in ("m.json", "e.json", "e.png")])
    assert outputs[0] == outputs[1]


def test_gen_data_is_deterministic(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"train": 5, "dev": 5, "test": 5, "text_sentences": 5}))
    for d in ("a", "b"):
        ok("gen-data", "--config", cfg, "--out-dir", tmp_path / d, "--seed", 1)
    for name in ("train.jsonl", "test.jsonl", "text.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_annotate_and_pll_cache(workdir, tmp_path, capsys):
    raw = tmp_path / "raw"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"train": 4, "dev": 4, "test": 4, "text_sentences": 4}))
    ok("gen-data", "--config", cfg, "--out-dir", raw, "--no-annotate")
    assert "eps" not in json.loads((raw / "dev.jsonl").read_text().splitlines()[0])
    status, err = error_of(capsys, "search-beta", "--model", workdir / "disc.json", "--nbest", raw / "dev.jsonl",
                           "--out", tmp_path / "b.json")
    assert status == 5 and "annotate" in err["message"]
    ok("annotate", "--in", raw / "dev.jsonl", "--out", tmp_path / "dev.jsonl")
    assert "eps" in json.loads((tmp_path / "dev.jsonl").read_text().splitlines()[0])
    # second pll run over the same inputs adds nothing
    before = (workdir / "pll.jsonl").read_bytes()
    ok("pll", "--model", workdir / "mlm.json", "--input", workdir / "data" / "dev.jsonl", "--out",
       workdir / "pll.jsonl")
    assert (workdir / "pll.jsonl").read_bytes() == before


def test_distill_command(workdir, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(TINY))
    ok("distill", "--teacher", workdir / "md.json", "--text", workdir / "data" / "text.jsonl",
       "--nbest", workdir / "data" / "train.jsonl", "--pll", workdir / "pll.jsonl", "--config", cfg,
       "--out", tmp_path / "student.json")
    student = EncoderModel.load(tmp_path / "student.json")
    assert student.config.hidden == 8
    meta = json.loads((tmp_path / "student.json").read_text())["meta"]
    assert meta["distill"]["student_params"] < meta["distill"]["teacher_params"]


# -- exit statuses -------------------------------------------------------------------

def test_unknown_command_is_usage_error(capsys):
    status, err = error_of(capsys, "frobnicate")
    assert status == 2 and err["error"] == "usage"


def test_missing_command_is_usage_error(capsys):
    assert error_of(capsys)[0] == 2


def test_missing_file_status(capsys, tmp_path):
    status, err = error_of(capsys, "annotate", "--in", tmp_path / "nope.jsonl", "--out", tmp_path / "x.jsonl")
    assert status == 4 and "nope.jsonl" in err["message"]
    assert not (tmp_path / "x.jsonl").exists()


def test_malformed_config_status(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert error_of(capsys, "gen-data", "--config", bad, "--out-dir", tmp_path)[0] == 3
    bad.write_text(json.dumps({"generator": {"p_sub": 2.0}}))
    status, err = error_of(capsys, "gen-data", "--config", bad, "--out-dir", tmp_path)
    assert status == 3 and "p_sub" in err["message"]


def test_invalid_data_status(capsys, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a", "ref": ["x"], "hyps": []}\n')
    assert error_of(capsys, "annotate", "--in", bad, "--out", tmp_path / "o.jsonl")[0] == 5
    bad.write_text("not json\n")
    status, err = error_of(capsys, "annotate", "--in", bad, "--out", tmp_path / "o.jsonl")
    assert status == 5 and ":1" in err["message"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nbrescore", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "nbrescore" in proc.stdout


# -- bench ---------------------------------------------------------------------------

def test_bench_command_writes_valid_report(tmp_path):
    for name, hidden in (("small", 8), ("large", 32)):
        init_model(ModelConfig(layers=1, hidden=hidden, heads=2, ffn=2 * hidden, max_len=34, vocab_size=40,
                               seed=0)).save(tmp_path / f"{name}.json")
    ok("bench", "--models", tmp_path / "small.json", tmp_path / "large.json", "--baseline", tmp_path / "large.json",
       "--out", tmp_path / "lat.json")
    report = json.loads((tmp_path / "lat.json").read_text())
    validate_latency_report(report)
    assert report["backward_calls"] == 0 and report["config"]["seed"] == 0
    assert {r["relative"] for r in report["results"] if r["label"] == "large"} == {1.0}
    assert (tmp_path / "lat.tsv").exists() and (tmp_path / "lat.png").exists()


def test_bench_rejects_too_long_sequences(capsys, tmp_path):
    init_model(ModelConfig(vocab_size=40)).save(tmp_path / "m.json")
    status, err = error_of(capsys, "bench", "--models", tmp_path / "m.json", "--out", tmp_path / "lat.json")
    assert status == 5 and "max_len" in err["message"]
