"""Command-line entry point.

Subcommands: index, search, rerank, tune, eval, filter-queries.
Exit codes: 0 success, 1 usage error, 2 data error, 3 scorer error.
"""

import sys
from importlib import resources

import click

from . import config as cfgmod
from . import firststage, queryfilter, tuning, treceval
from .analysis import load_stopwords
from .corpus import FieldSelector, load_corpus
from .errors import DataError, ScorerError, SciretError
from .index import InvertedIndex, build_index
from .rerank import (CallableScorerClient, FirstStageEchoClient,
                     WireScorerClient, rerank)
from .treceval import Run, read_qrels, read_run, read_topics, write_run
from .util import atomic_write_text


@click.group()
def cli():
    """Two-stage search pipeline for scientific literature."""


# click parameter name -> flat config key (click rejects dotted names)
_FLAG_KEYS = {
    "stage1_model": "stage1.model",
    "stage1_k": "stage1.k",
    "stage1_date_min": "stage1.date_min",
    "stage1_query_field": "stage1.query_field",
    "bm25_k1": "bm25.k1",
    "bm25_b": "bm25.b",
    "run_tag": "run.tag",
    "stopwords_path": "analysis.stopwords_path",
    "rerank_endpoint": "rerank.endpoint",
    "rerank_query_field": "rerank.query_field",
    "rerank_doc_fields": "rerank.doc_fields",
    "rerank_max_passage_tokens": "rerank.max_passage_tokens",
    "rerank_aggregation": "rerank.aggregation",
    "rerank_batch_size": "rerank.batch_size",
}


def _config_options(fn):
    for opt in reversed([
        click.option("--config", "config_file", type=click.Path(exists=True),
                     default=None, help="Flat key=value config file."),
        click.option("--preset", type=click.Choice(sorted(cfgmod.PRESETS)),
                     default=None, help="Named pipeline preset."),
        click.option("--model", "stage1_model", default=None,
                     type=click.Choice(["bm25", "rm3", "sdm"])),
        click.option("--k1", "bm25_k1", type=float, default=None),
        click.option("--b", "bm25_b", type=float, default=None),
        click.option("--k", "stage1_k", type=int, default=None),
        click.option("--date-min", "stage1_date_min", default=None,
                     help="Drop documents published before this date (YYYY-MM-DD)."),
        click.option("--query-field", "stage1_query_field", default=None,
                     type=click.Choice(["query", "question", "narrative"])),
        click.option("--run-tag", "run_tag", default=None),
        click.option("--stopwords", "stopwords_path",
                     type=click.Path(exists=True), default=None),
    ]):
        fn = opt(fn)
    return fn


def _resolve(config_file, preset, kwargs):
    overrides = {_FLAG_KEYS[k]: v for k, v in kwargs.items() if k in _FLAG_KEYS}
    return cfgmod.resolve(config_file, preset, overrides)


def _stopwords(cfg):
    path = cfg["analysis.stopwords_path"]
    return load_stopwords(path or None)


def _first_stage_candidates(index, query_text, cfg):
    model, params = cfgmod.stage1_params(cfg)
    k = int(cfg["stage1.k"])
    date_min = cfgmod.parse_date_min(cfg["stage1.date_min"])
    stopwords = _stopwords(cfg)
    if model == "bm25":
        return firststage.bm25_search(index, query_text, params, k, date_min,
                                      stopwords)
    if model == "rm3":
        return firststage.rm3_search(index, query_text, firststage.BM25Params(),
                                     params, k, date_min, stopwords)
    return firststage.sdm_search(index, query_text, params, k, date_min, stopwords)


@cli.command("index")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--fields", default="full_text",
              help="Document fields to index (full_text, title_abstract, "
                   "or a +-joined list).")
@click.option("--stopwords", "stopwords_path", type=click.Path(exists=True),
              default=None)
@click.option("--no-positions", is_flag=True,
              help="Drop positions (index unusable for SDM).")
def cmd_index(corpus_dir, out_path, fields, stopwords_path, no_positions):
    """Build an inverted index over a corpus directory."""
    sel = FieldSelector.from_name(fields)
    docs = load_corpus(corpus_dir)
    index = build_index(docs, sel, load_stopwords(stopwords_path),
                        store_positions=not no_positions)
    index.save(out_path)
    click.echo(f"indexed {index.doc_count} documents "
               f"({len(list(index.vocabulary()))} terms) -> {out_path}")


@cli.command("search")
@click.option("--index", "index_path", type=click.Path(exists=True), required=True)
@click.option("--topics", "topics_path", type=click.Path(exists=True), default=None)
@click.option("--query", "adhoc_query", default=None,
              help="Ad-hoc query text instead of a topics file.")
@click.option("--output", "output_path", type=click.Path(dir_okay=False), default=None)
@_config_options
def cmd_search(index_path, topics_path, adhoc_query, output_path, config_file,
               preset, **kwargs):
    """First-stage retrieval only; writes a TREC run file."""
    cfg = _resolve(config_file, preset, kwargs)
    index = InvertedIndex.load(index_path)
    if adhoc_query is not None:
        for cand in _first_stage_candidates(index, adhoc_query, cfg):
            click.echo(f"{cand.rank}\t{cand.doc_id}\t{cand.score:.4f}")
        return
    if topics_path is None:
        raise click.UsageError("provide --topics or --query")
    if output_path is None:
        raise click.UsageError("--output is required with --topics")
    topics = read_topics(topics_path)
    per_topic = {
        t.topic_id: _first_stage_candidates(index, t.field(cfg["stage1.query_field"]), cfg)
        for t in topics
    }
    run = Run.from_candidates(per_topic, cfg["run.tag"])
    write_run(run, output_path)
    click.echo(f"wrote {output_path}")


def _make_scorer(endpoint):
    if endpoint == "echo":
        return FirstStageEchoClient()
    if endpoint.startswith("const:"):
        value = float(endpoint.split(":", 1)[1])
        return CallableScorerClient(lambda q, p: value)
    return WireScorerClient(endpoint)


@cli.command("rerank")
@click.option("--index", "index_path", type=click.Path(exists=True), required=True)
@click.option("--corpus-dir", type=click.Path(exists=True, file_okay=False),
              required=True, help="Corpus directory, for re-rank document text.")
@click.option("--topics", "topics_path", type=click.Path(exists=True), required=True)
@click.option("--output", "output_path", type=click.Path(dir_okay=False), required=True)
@click.option("--scorer", "rerank_endpoint", default=None,
              help="echo | const:<v> | host:port | exec:<command>")
@click.option("--rerank-query-field", "rerank_query_field", default=None,
              type=click.Choice(["query", "question", "narrative"]))
@click.option("--rerank-doc-fields", "rerank_doc_fields", default=None)
@click.option("--max-passage-tokens", "rerank_max_passage_tokens", type=int,
              default=None)
@click.option("--aggregation", "rerank_aggregation", default=None,
              type=click.Choice(["max", "mean"]))
@click.option("--batch-size", "rerank_batch_size", type=int, default=None)
@_config_options
def cmd_rerank(index_path, corpus_dir, topics_path, output_path, config_file,
               preset, **kwargs):
    """Full two-stage pipeline; writes a TREC run file."""
    cfg = _resolve(config_file, preset, kwargs)
    index = InvertedIndex.load(index_path)
    documents = {d.doc_id: d for d in load_corpus(corpus_dir)}
    topics = read_topics(topics_path)
    rr_cfg = cfgmod.rerank_config(cfg)
    scorer = _make_scorer(cfg["rerank.endpoint"])
    try:
        per_topic = {}
        for topic in topics:
            candidates = _first_stage_candidates(
                index, topic.field(cfg["stage1.query_field"]), cfg)
            per_topic[topic.topic_id] = rerank(candidates, topic, rr_cfg,
                                               scorer, documents)
        run = Run.from_candidates(per_topic, cfg["run.tag"])
    finally:
        scorer.close()
    write_run(run, output_path)
    click.echo(f"wrote {output_path}")


@cli.command("tune")
@click.option("--index", "index_path", type=click.Path(exists=True), required=True)
@click.option("--topics", "topics_path", type=click.Path(exists=True), required=True)
@click.option("--qrels", "qrels_path", type=click.Path(exists=True), required=True)
@click.option("--model", default="bm25", type=click.Choice(["bm25", "rm3", "sdm"]))
@click.option("--k1", "k1_spec", default="0.1:6.0:0.1", help="min:max:step")
@click.option("--b", "b_spec", default="0:1:0.05", help="min:max:step")
@click.option("--fb-terms", "fb_terms_spec", default="1:20:1")
@click.option("--fb-docs", "fb_docs_spec", default="1:20:1")
@click.option("--w-term", "w_term_spec", default="0:1:0.05")
@click.option("--w-ordered", "w_ordered_spec", default="0:1:0.05")
@click.option("--metric", default="recall@100")
@click.option("--k", "top_k", type=int, default=firststage.DEFAULT_TOP_K)
@click.option("--query-field", default="query",
              type=click.Choice(["query", "question", "narrative"]))
@click.option("--date-min", default=None)
@click.option("--heatmap-out", type=click.Path(dir_okay=False), default=None)
@click.option("--table-out", type=click.Path(dir_okay=False), default=None)
def cmd_tune(index_path, topics_path, qrels_path, model, k1_spec, b_spec,
             fb_terms_spec, fb_docs_spec, w_term_spec, w_ordered_spec, metric,
             top_k, query_field, date_min, heatmap_out, table_out):
    """Grid-search first-stage hyperparameters."""
    if model == "bm25":
        axes = (tuning.Axis.parse("k1", k1_spec), tuning.Axis.parse("b", b_spec))
    elif model == "rm3":
        axes = (tuning.Axis.parse("fb_terms", fb_terms_spec),
                tuning.Axis.parse("fb_docs", fb_docs_spec))
    else:
        axes = (tuning.Axis.parse("w_term", w_term_spec),
                tuning.Axis.parse("w_ordered", w_ordered_spec))
    spec = tuning.GridSpec(model=model, axes=axes, query_field=query_field,
                           metric=metric, k=top_k,
                           date_min=cfgmod.parse_date_min(date_min or ""))
    index = InvertedIndex.load(index_path)
    topics = read_topics(topics_path)
    judgments = read_qrels(qrels_path)
    best, results, heatmap = tuning.grid_search(index, topics, judgments, spec)
    best_str = " ".join(f"{k}={v:g}" for k, v in best.items())
    click.echo(f"best: {best_str}  {metric}="
               f"{results[tuple(best.values())]:.4f}")
    if heatmap_out:
        if heatmap is None:
            raise click.UsageError("--heatmap-out requires a 2-axis grid")
        tuning.emit_heatmap(heatmap, heatmap_out)
        click.echo(f"wrote {heatmap_out}")
    if table_out:
        atomic_write_text(table_out, tuning.format_results_table(
            results, [a.name for a in spec.axes], metric))
        click.echo(f"wrote {table_out}")


@cli.command("eval")
@click.argument("run_paths", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.option("--qrels", "qrels_path", type=click.Path(exists=True), required=True)
@click.option("--metrics", default="ndcg@10,p@5,p@5-rel,judged@5",
              help="Comma-separated metric names.")
@click.option("--baseline", "baseline_path", type=click.Path(exists=True),
              default=None, help="Baseline run for the paired t-test.")
@click.option("--deltas-out", type=click.Path(dir_okay=False), default=None,
              help="Per-query delta table vs the baseline (first metric).")
def cmd_eval(run_paths, qrels_path, metrics, baseline_path, deltas_out):
    """Evaluate run file(s) against qrels."""
    judgments = read_qrels(qrels_path)
    metric_names = [m.strip() for m in metrics.split(",") if m.strip()]
    baseline = read_run(baseline_path) if baseline_path else None
    baseline_values = {}
    if baseline is not None:
        for name in metric_names:
            baseline_values[name] = treceval.metric_by_name(name)(
                baseline, judgments).per_topic
    for path in run_paths:
        run = read_run(path)
        click.echo(f"run: {run.run_tag} ({path})")
        for name in metric_names:
            result = treceval.metric_by_name(name)(run, judgments)
            line = f"  {name:<10} {result.mean:.4f}"
            if baseline is not None:
                shared = sorted(set(result.per_topic) & set(baseline_values[name]))
                if len(shared) >= 2:
                    tt = treceval.paired_t_test(
                        [result.per_topic[t] for t in shared],
                        [baseline_values[name][t] for t in shared])
                    sig = "degenerate" if tt.degenerate else f"t={tt.t:.3f} p={tt.p:.4f}"
                    line += f"  vs baseline: {sig}"
            click.echo(line)
        if deltas_out and baseline is not None:
            table = treceval.per_query_deltas(run, baseline, judgments,
                                              metric_names[0])
            atomic_write_text(deltas_out,
                              treceval.format_deltas(table, metric_names[0]))
            click.echo(f"  wrote {deltas_out}")


@cli.command("filter-queries")
@click.argument("queries_path", type=click.Path(exists=True))
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True),
              required=True)
@click.option("--exclusions", "exclusions_path", type=click.Path(exists=True),
              default=None, help="Defaults to the shipped exclusion list.")
@click.option("--output", "output_path", type=click.Path(dir_okay=False),
              default=None, help="Write retained ids here instead of stdout.")
def cmd_filter_queries(queries_path, lexicon_path, exclusions_path, output_path):
    """Retain query ids whose text matches the lexicon.

    QUERIES_PATH is a TSV of id<TAB>text, one query per line.
    """
    if exclusions_path is None:
        exclusions_path = str(resources.files("sciret.data")
                              .joinpath("exclusions_default.txt"))
    lexicon = queryfilter.load_lexicon(lexicon_path, exclusions_path)
    queries = {}
    with open(queries_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise DataError(f"{queries_path}:{lineno}: expected id<TAB>text")
            qid, _, text = line.partition("\t")
            queries[qid] = text
    retained = queryfilter.filter_queries(queries, lexicon)
    body = "\n".join(retained) + ("\n" if retained else "")
    if output_path:
        atomic_write_text(output_path, body)
        click.echo(f"retained {len(retained)} of {len(queries)} queries "
                   f"-> {output_path}")
    else:
        click.echo(body, nl=False)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except ScorerError as exc:
        click.echo(f"scorer error: {exc}", err=True)
        return 3
    except (SciretError, OSError, ValueError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
