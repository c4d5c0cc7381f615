import hashlib
import json

import pytest
from click.testing import CliRunner

from radnorm.cli import main, synthetic_corpus_path, synthetic_lexicon_path


@pytest.fixture
def runner():
    return CliRunner()


CORPUS = str(synthetic_corpus_path())
LEXICON = str(synthetic_lexicon_path())


def test_expand_command(runner):
    result = runner.invoke(main, ["expand", "--mention", "NGT"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["expanded"] == "nasogastric tube"
    assert payload["applied"] == ["abbreviation"]


def test_candidates_command(runner):
    result = runner.invoke(main, ["candidates", "--mention", "NGT"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["candidates"][0]["concept"] == "RID300"


def test_candidates_no_abbrev_flag(runner):
    result = runner.invoke(main, ["candidates", "--mention", "NGT",
                                  "--no-abbrev-expansion"])
    assert result.exit_code == 0
    assert json.loads(result.output)["candidates"] == []


def test_index_command(runner, tmp_path):
    out = tmp_path / "index.tsv"
    result = runner.invoke(main, ["index", "--corpus", CORPUS, "--out", str(out)])
    assert result.exit_code == 0
    assert out.exists()
    reload = runner.invoke(main, ["candidates", "--mention", "pleural effusion",
                                  "--index", str(out)])
    assert json.loads(reload.output)["candidates"][0]["concept"] == "RID200"


def test_stats_command(runner):
    result = runner.invoke(main, ["stats"])
    assert result.exit_code == 0
    assert "| Total entity mentions | 185 |" in result.output
    assert "| Unlinkable mentions | 9 |" in result.output


def test_folds_command(runner):
    result = runner.invoke(main, ["folds", "--k", "10", "--seed", "0"])
    assert result.exit_code == 0
    plans = json.loads(result.output)
    assert len(plans) == 10
    assert all(len(p["test"]) == 3 for p in plans)


def test_agreement_self(runner):
    result = runner.invoke(main, ["agreement", "--a", CORPUS, "--b", CORPUS])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["span_f1"] == 1.0
    assert payload["normalization_agreement"] == 1.0


def test_evaluate_reproducible(runner, tmp_path):
    args = ["evaluate", "--ranker", "bm25_top1", "--seed", "3"]
    hashes = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        result = runner.invoke(main, args + ["--out", str(out)])
        assert result.exit_code == 0, result.output
        hashes.append(hashlib.sha256(out.read_bytes()).hexdigest())
    assert hashes[0] == hashes[1]


def test_evaluate_markdown(runner):
    result = runner.invoke(main, ["evaluate", "--markdown"])
    assert result.exit_code == 0
    assert "| recall_at_n |" in result.output


def test_evaluate_tagging_task(runner):
    result = runner.invoke(main, ["evaluate", "--task", "tagging"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert "f1" in payload["averaged"]


def test_evaluate_rejects_rerank_without_scorer(runner, monkeypatch):
    monkeypatch.delenv("CONCEPT_NORM_SCORER", raising=False)
    result = runner.invoke(main, ["evaluate", "--ranker", "rerank"])
    assert result.exit_code == 2
    assert "--scorer" in result.output


def test_evaluate_builtin_lexical_substitute(runner):
    result = runner.invoke(main, ["evaluate", "--ranker", "rerank",
                                  "--scorer", "builtin-lexical"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["config"]["ranker"] == "lexical"


def test_evaluate_span_builtin(runner):
    result = runner.invoke(main, ["evaluate", "--ranker", "span",
                                  "--scorer", "builtin-lexical"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert "accuracy_span_first" in payload["averaged"]


def test_normalize_predictions(runner):
    result = runner.invoke(main, ["normalize", "--ranker", "bm25_top1"])
    assert result.exit_code == 0
    header, *rows = result.output.strip().splitlines()
    assert header == "report_id\tmention_id\tgold\tpredicted\tranker\tscore"
    assert len(rows) == 185


def test_normalize_dump_instances(runner, tmp_path):
    rerank_path = tmp_path / "rerank.jsonl"
    span_path = tmp_path / "span.jsonl"
    result = runner.invoke(main, ["normalize", "--dump-rerank", str(rerank_path),
                                  "--dump-span", str(span_path)])
    assert result.exit_code == 0
    rerank_rows = [json.loads(l) for l in rerank_path.read_text().splitlines()]
    assert all(row["label"] in (0, 1) for row in rerank_rows)
    assert any(row["label"] == 1 for row in rerank_rows)
    span_rows = [json.loads(l) for l in span_path.read_text().splitlines()]
    for row in span_rows[:20]:
        assert row["start"] >= row["segment_two_start"]
        assert row["sequence"].startswith("[CLS] ")


def test_tag_command(runner, tmp_path):
    txt = tmp_path / "note.txt"
    txt.write_text("There is pleural effusion at the costophrenic angle.\n")
    result = runner.invoke(main, ["tag", "--txt", str(txt), "--corpus", CORPUS])
    assert result.exit_code == 0
    lines = [l for l in result.output.splitlines() if l]
    tags = {l.split("\t")[0]: l.split("\t")[3] for l in lines}
    assert tags["pleural"] == "B" and tags["effusion"] == "I"


def test_config_file_precedence(runner, tmp_path):
    config = tmp_path / "run.toml"
    config.write_text("n_candidates = 2\n")
    result = runner.invoke(main, ["candidates", "--mention", "left",
                                  "--config", str(config)])
    assert result.exit_code == 0
    assert len(json.loads(result.output)["candidates"]) <= 2
    override = runner.invoke(main, ["candidates", "--mention", "left",
                                    "--config", str(config), "--n-candidates", "1"])
    assert len(json.loads(override.output)["candidates"]) == 1


def test_bad_config_value_exit_2(runner):
    result = runner.invoke(main, ["evaluate", "--b", "7"])
    assert result.exit_code == 2


def test_missing_file_exit_1(runner):
    result = runner.invoke(main, ["stats", "--corpus", "/nonexistent/meta.tsv"])
    assert result.exit_code == 1
