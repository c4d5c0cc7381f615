"""Command-line surface binding the pipeline modules.

Configuration precedence: flags > config file (``key = value`` lines) >
defaults. All defaults mirror the reference experimental setup (k1=1.2,
b=0.75, n=10, 10 folds)."""

from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import evaluation as eval_mod
from .expansion import expand_mention, load_abbreviations
from .lexicon import LexiconError, parse_lexicon
from .ranking import build_rerank_instances, build_span_instance
from .retrieval import (Bm25Params, RetrievalError, build_index, load_index,
                        retrieve_candidates, save_index)
from .scorers import make_scorer_client
from .span_detection import build_gazetteer, dictionary_tag, write_conll


def data_path(name: str) -> Path:
    return Path(str(resources.files("radnorm") / "data" / name))


def synthetic_corpus_path() -> Path:
    return data_path("synthetic") / "reports.tsv"


def synthetic_lexicon_path() -> Path:
    return data_path("synthetic") / "lexicon.tsv"


def _read_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.UsageError(f"--config {path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip().strip('"')
    return values


class DataError(click.ClickException):
    exit_code = 1


def _load_lexicon(path: str):
    try:
        with open(path, encoding="utf-8") as handle:
            return parse_lexicon(handle)
    except (OSError, LexiconError) as exc:
        raise DataError(f"--lexicon {path}: {exc}")


def _load_corpus(path: str):
    try:
        return corpus_mod.load_corpus(path)
    except (OSError, corpus_mod.CorpusError, KeyError) as exc:
        raise DataError(f"--corpus {path}: {exc}")


def _load_abbrev(path: str | None):
    source = Path(path) if path else data_path("abbreviations.tsv")
    try:
        return load_abbreviations(source)
    except OSError as exc:
        raise DataError(f"--abbrev {source}: {exc}")


def _apply_config(ctx, config_path, **flag_values):
    file_values = _read_config_file(config_path)
    merged = {}
    for key, value in flag_values.items():
        source = ctx.get_parameter_source(key)
        if source is not None and source.name == "DEFAULT" and key in file_values:
            merged[key] = type(value)(file_values[key]) if value is not None else file_values[key]
        else:
            merged[key] = value
    return merged


def common_options(fn):
    fn = click.option("--lexicon", "lexicon_path", default=str(synthetic_lexicon_path()),
                      show_default=False, help="Lexicon TSV path (default: bundled synthetic).")(fn)
    fn = click.option("--abbrev", "abbrev_path", default=None,
                      help="Abbreviation TSV path (default: bundled dictionary).")(fn)
    fn = click.option("--config", "config_path", default=None,
                      help="Config file with key = value lines; flags win.")(fn)
    return fn


def bm25_options(fn):
    fn = click.option("--k1", default=1.2, show_default=True, type=float)(fn)
    fn = click.option("--b", default=0.75, show_default=True, type=float)(fn)
    fn = click.option("--n-candidates", default=10, show_default=True, type=int)(fn)
    fn = click.option("--stemming", type=click.Choice(["on", "off"]), default="off",
                      show_default=True)(fn)
    return fn


def expansion_options(fn):
    fn = click.option("--no-synonym-expansion", is_flag=True, default=False)(fn)
    fn = click.option("--no-abbrev-expansion", is_flag=True, default=False)(fn)
    return fn


def _params(merged) -> Bm25Params:
    try:
        return Bm25Params(k1=merged["k1"], b=merged["b"],
                          n_candidates=merged["n_candidates"],
                          stemming=merged["stemming"] == "on")
    except RetrievalError as exc:
        raise click.UsageError(str(exc))


def _ranker_config(ranker: str, scorer_endpoint: str | None, span_order: str,
                   seed: int) -> eval_mod.RankerConfig:
    scorer = None
    if ranker in ("rerank", "span"):
        endpoint = scorer_endpoint or os.environ.get("CONCEPT_NORM_SCORER")
        if endpoint == "builtin-lexical":
            # marker resolved by the caller, which holds the lexicon
            return eval_mod.RankerConfig(ranker=ranker, span_order=span_order,
                                         scorer="builtin-lexical", synonym_seed=seed)
        if not endpoint:
            raise click.UsageError(
                f"--ranker {ranker} requires --scorer (or CONCEPT_NORM_SCORER), "
                "or --scorer builtin-lexical")
        scorer = make_scorer_client(endpoint)
    return eval_mod.RankerConfig(ranker=ranker, span_order=span_order,
                                 scorer=scorer, synonym_seed=seed)


@click.group()
def main():
    """Radiology entity normalization toolkit."""


@main.command()
@common_options
@bm25_options
@click.option("--corpus", "corpus_path", default=None,
              help="Metadata TSV; mentions are added to the index when given.")
@click.option("--out", "out_path", required=True)
@click.pass_context
def index(ctx, lexicon_path, abbrev_path, config_path, corpus_path, out_path, **flags):
    """Build and persist a BM25 index."""
    merged = _apply_config(ctx, config_path, **flags)
    lexicon = _load_lexicon(lexicon_path)
    mentions = []
    if corpus_path:
        for report in _load_corpus(corpus_path):
            mentions.extend(report.mentions)
    idx = build_index(lexicon, mentions, _params(merged))
    save_index(idx, out_path)
    click.echo(f"indexed {idx.n_docs} documents -> {out_path}")


@main.command()
@common_options
@expansion_options
@click.option("--mention", required=True)
@click.pass_context
def expand(ctx, lexicon_path, abbrev_path, config_path, mention,
           no_synonym_expansion, no_abbrev_expansion):
    """Expand one mention and print the result as JSON."""
    lexicon = _load_lexicon(lexicon_path)
    abbrev = _load_abbrev(abbrev_path)
    expanded = expand_mention(mention, lexicon, abbrev,
                              use_abbreviations=not no_abbrev_expansion,
                              use_synonyms=not no_synonym_expansion)
    click.echo(json.dumps({"original": expanded.original,
                           "expanded": expanded.expanded,
                           "applied": sorted(expanded.applied)}, sort_keys=True))


@main.command()
@common_options
@bm25_options
@expansion_options
@click.option("--mention", required=True)
@click.option("--index", "index_path", default=None,
              help="Use a persisted index instead of building from the lexicon.")
@click.pass_context
def candidates(ctx, lexicon_path, abbrev_path, config_path, mention, index_path,
               no_synonym_expansion, no_abbrev_expansion, **flags):
    """Retrieve ranked candidate concepts for one mention."""
    merged = _apply_config(ctx, config_path, **flags)
    lexicon = _load_lexicon(lexicon_path)
    abbrev = _load_abbrev(abbrev_path)
    params = _params(merged)
    idx = load_index(index_path) if index_path else build_index(lexicon, (), params)
    expanded = expand_mention(mention, lexicon, abbrev,
                              use_abbreviations=not no_abbrev_expansion,
                              use_synonyms=not no_synonym_expansion)
    result = retrieve_candidates(idx, expanded, params)
    click.echo(json.dumps({
        "mention": expanded.original, "expanded": expanded.expanded,
        "candidates": [{"concept": cid, "score": score}
                       for cid, score in result.candidates]}, sort_keys=True))


@main.command()
@common_options
@bm25_options
@expansion_options
@click.option("--corpus", "corpus_path", default=str(synthetic_corpus_path()))
@click.option("--ranker", type=click.Choice(["bm25_top1", "lexical", "rerank", "span"]),
              default="bm25_top1", show_default=True)
@click.option("--scorer", "scorer_endpoint", default=None)
@click.option("--span-order", type=click.Choice(["rank", "seeded_shuffle"]), default="rank")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--dump-rerank", "dump_rerank", default=None,
              help="Write labeled pairwise training instances (JSONL) and exit.")
@click.option("--dump-span", "dump_span", default=None,
              help="Write span training instances (JSONL) and exit.")
@click.option("--out", "out_path", default=None, help="Predictions TSV path.")
@click.pass_context
def normalize(ctx, lexicon_path, abbrev_path, config_path, corpus_path, ranker,
              scorer_endpoint, span_order, seed, dump_rerank, dump_span, out_path,
              no_synonym_expansion, no_abbrev_expansion, **flags):
    """Normalize every corpus mention, or dump scorer training instances."""
    merged = _apply_config(ctx, config_path, **flags)
    lexicon = _load_lexicon(lexicon_path)
    abbrev = _load_abbrev(abbrev_path)
    reports = _load_corpus(corpus_path)
    params = _params(merged)
    use_abbrev = not no_abbrev_expansion
    use_syn = not no_synonym_expansion

    if dump_rerank or dump_span:
        idx = build_index(lexicon, [m for r in reports for m in r.mentions], params)
        rerank_rows, span_rows = [], []
        for report in reports:
            for mention in report.mentions:
                expanded = expand_mention(mention.surface, lexicon, abbrev,
                                          use_abbreviations=use_abbrev,
                                          use_synonyms=use_syn)
                cands = retrieve_candidates(idx, expanded, params)
                if len(cands) == 0:
                    continue
                if dump_rerank:
                    for inst in build_rerank_instances(
                            expanded, cands, lexicon, gold=mention.gold_concept,
                            synonym_order_seed=seed):
                        rerank_rows.append({"sequence": inst.sequence,
                                            "label": inst.label})
                if dump_span:
                    inst = build_span_instance(expanded, cands, lexicon,
                                               order=span_order,
                                               gold=mention.gold_concept,
                                               shuffle_seed=seed)
                    if inst.gold_span is None:
                        continue
                    span_rows.append({"sequence": inst.sequence,
                                      "segment_two_start": inst.segment_two_start,
                                      "start": inst.gold_span[0],
                                      "end": inst.gold_span[1]})
        for path, rows in ((dump_rerank, rerank_rows), (dump_span, span_rows)):
            if path:
                with open(path, "w", encoding="utf-8") as handle:
                    for row in rows:
                        handle.write(json.dumps(row, sort_keys=True) + "\n")
                click.echo(f"wrote {len(rows)} instances -> {path}")
        return

    config = _ranker_config(ranker, scorer_endpoint, span_order, seed)
    if config.scorer == "builtin-lexical":
        from .ranking import LexicalScorer
        config.scorer = LexicalScorer(lexicon)
        if config.ranker == "rerank":
            config.ranker = "lexical"
    folds = [eval_mod.FoldPlan(fold_id=0, train=(), validation=(),
                               test=tuple(sorted(r.report_id for r in reports)))]
    report = eval_mod.evaluate_normalization(
        reports, lexicon, abbrev, config, folds, params,
        use_abbreviations=use_abbrev, use_synonyms=use_syn)
    tsv = eval_mod.predictions_tsv(report)
    if out_path:
        Path(out_path).write_text(tsv, encoding="utf-8")
    else:
        click.echo(tsv, nl=False)


@main.command()
@common_options
@click.option("--corpus", "corpus_path", default=None,
              help="Metadata TSV whose mentions seed the gazetteer.")
@click.option("--txt", "txt_path", required=True, help="Plain-text file to tag.")
@click.option("--out", "out_path", default=None)
@click.pass_context
def tag(ctx, lexicon_path, abbrev_path, config_path, corpus_path, txt_path, out_path):
    """Tag a text file with the dictionary baseline (CoNLL-style output)."""
    lexicon = _load_lexicon(lexicon_path)
    surfaces = []
    if corpus_path:
        for report in _load_corpus(corpus_path):
            surfaces.extend(m.surface for m in report.mentions)
    gazetteer = build_gazetteer(lexicon, surfaces)
    text = Path(txt_path).read_text(encoding="utf-8")
    sentences = [dictionary_tag(text[s:e], gazetteer, base_offset=s)
                 for s, e in corpus_mod.split_sentences(text)]
    output = write_conll(sentences)
    if out_path:
        Path(out_path).write_text(output, encoding="utf-8")
    else:
        click.echo(output, nl=False)


@main.command()
@common_options
@bm25_options
@expansion_options
@click.option("--corpus", "corpus_path", default=str(synthetic_corpus_path()))
@click.option("--ranker", type=click.Choice(["bm25_top1", "lexical", "rerank", "span", "oracle"]),
              default="bm25_top1", show_default=True)
@click.option("--scorer", "scorer_endpoint", default=None)
@click.option("--span-order", type=click.Choice(["rank", "seeded_shuffle"]), default="rank")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--folds", "k_folds", default=10, show_default=True, type=int)
@click.option("--task", type=click.Choice(["normalization", "tagging"]),
              default="normalization", show_default=True)
@click.option("--out", "out_path", default=None, help="Machine JSON output path.")
@click.option("--markdown", is_flag=True, default=False, help="Also print a metric table.")
@click.pass_context
def evaluate(ctx, lexicon_path, abbrev_path, config_path, corpus_path, ranker,
             scorer_endpoint, span_order, seed, k_folds, task, out_path, markdown,
             no_synonym_expansion, no_abbrev_expansion, **flags):
    """Cross-validated evaluation (recall@n + adjusted accuracy, or span F1)."""
    merged = _apply_config(ctx, config_path, **flags)
    lexicon = _load_lexicon(lexicon_path)
    abbrev = _load_abbrev(abbrev_path)
    reports = _load_corpus(corpus_path)
    try:
        folds = eval_mod.make_folds([r.report_id for r in reports], k_folds, seed)
    except eval_mod.EvaluationError as exc:
        raise click.UsageError(f"--folds: {exc}")
    if task == "tagging":
        report = eval_mod.evaluate_tagging(reports, folds, lexicon)
    else:
        config = _ranker_config(ranker, scorer_endpoint, span_order, seed)
        if config.scorer == "builtin-lexical":
            from .ranking import LexicalScorer
            config.scorer = LexicalScorer(lexicon)
            if config.ranker == "rerank":
                config.ranker = "lexical"
        try:
            report = eval_mod.evaluate_normalization(
                reports, lexicon, abbrev, config, folds, _params(merged),
                use_abbreviations=not no_abbrev_expansion,
                use_synonyms=not no_synonym_expansion)
        except eval_mod.EvaluationError as exc:
            raise DataError(str(exc))
    report.config["seed"] = seed
    report.config["task"] = task
    output = report.to_json()
    if out_path:
        Path(out_path).write_text(output, encoding="utf-8")
    else:
        click.echo(output, nl=False)
    if markdown:
        click.echo(eval_mod.markdown_table(report, title=f"{task} ({ranker})"))


@main.command()
@click.option("--corpus", "corpus_path", default=str(synthetic_corpus_path()))
@click.option("--k", default=10, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def folds(corpus_path, k, seed):
    """Print the report-level fold plan as JSON."""
    reports = _load_corpus(corpus_path)
    try:
        plans = eval_mod.make_folds([r.report_id for r in reports], k, seed)
    except eval_mod.EvaluationError as exc:
        raise click.UsageError(f"--k: {exc}")
    click.echo(json.dumps([asdict(p) for p in plans], sort_keys=True, indent=2))


@main.command()
@click.option("--corpus", "corpus_path", default=str(synthetic_corpus_path()))
def stats(corpus_path):
    """Corpus statistics table."""
    reports = _load_corpus(corpus_path)
    click.echo(corpus_mod.stats_table(corpus_mod.corpus_stats(reports)))


@main.command()
@click.option("--a", "path_a", required=True, help="Annotator A metadata TSV.")
@click.option("--b", "path_b", required=True, help="Annotator B metadata TSV.")
def agreement(path_a, path_b):
    """Inter-annotator span F1 and normalization agreement."""
    reports_a = _load_corpus(path_a)
    reports_b = _load_corpus(path_b)
    try:
        f1 = corpus_mod.span_agreement_f1(reports_a, reports_b)
        by_id_b = {r.report_id: r for r in reports_b}
        aligned_a, aligned_b = [], []
        for report_a in reports_a:
            spans_b = {(m.span_start, m.span_end): m
                       for m in by_id_b[report_a.report_id].mentions}
            for mention in report_a.mentions:
                other = spans_b.get((mention.span_start, mention.span_end))
                if other is not None:
                    aligned_a.append(mention)
                    aligned_b.append(other)
        accuracy = corpus_mod.normalization_agreement(aligned_a, aligned_b)
    except corpus_mod.CorpusError as exc:
        raise DataError(str(exc))
    click.echo(json.dumps({"span_f1": f1, "normalization_agreement": accuracy,
                           "aligned_mentions": len(aligned_a)}, sort_keys=True))


if __name__ == "__main__":
    main()
