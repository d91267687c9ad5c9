"""Pipeline configuration: flat key=value files, presets, precedence.

Precedence, lowest to highest: built-in defaults < config file < preset
< explicit command-line flags. All values are stored as strings and
parsed where consumed.

Keys:
    stage1.model            bm25 | rm3 | sdm
    stage1.k                first-stage cutoff (default 500)
    stage1.date_min         YYYY-MM-DD, empty disables the filter
    stage1.query_field      query | question | narrative
    bm25.k1, bm25.b
    rm3.fb_terms, rm3.fb_docs, rm3.orig_weight
    sdm.w_term, sdm.w_ordered, sdm.w_unordered, sdm.window, sdm.mu
    rerank.endpoint         echo | host:port | exec:<command>
    rerank.batch_size
    rerank.max_passage_tokens
    rerank.aggregation      max | mean
    rerank.query_field
    rerank.doc_fields       e.g. title+abstract, full_text
    analysis.stopwords_path
    run.tag
"""

from datetime import date

from .corpus import FieldSelector
from .errors import FormatError
from .firststage import BM25Params, RM3Params, SDMParams

DEFAULTS = {
    "stage1.model": "bm25",
    "stage1.k": "500",
    "stage1.date_min": "",
    "stage1.query_field": "query",
    "bm25.k1": "0.9",
    "bm25.b": "0.4",
    "rm3.fb_terms": "10",
    "rm3.fb_docs": "10",
    "rm3.orig_weight": "0.5",
    "sdm.w_term": "0.85",
    "sdm.w_ordered": "0.1",
    "sdm.w_unordered": "0.05",
    "sdm.window": "8",
    "sdm.mu": "1000",
    "rerank.endpoint": "echo",
    "rerank.batch_size": "64",
    "rerank.max_passage_tokens": "400",
    "rerank.aggregation": "max",
    "rerank.query_field": "question",
    "rerank.doc_fields": "title+abstract",
    "analysis.stopwords_path": "",
    "run.tag": "sciret",
}

PRESETS = {
    # tuned first stage: keyword query over full text, post-2020 only,
    # question scored over title+abstract in the second stage
    "run1": {
        "stage1.model": "bm25",
        "bm25.k1": "3.9",
        "bm25.b": "0.55",
        "stage1.query_field": "query",
        "stage1.date_min": "2020-01-01",
        "rerank.query_field": "question",
        "rerank.doc_fields": "title+abstract",
        "run.tag": "run1",
    },
    # untuned first stage: default BM25 over the question field, no date
    # filter; expects an index built over title+abstract
    "run2": {
        "stage1.model": "bm25",
        "bm25.k1": "0.9",
        "bm25.b": "0.4",
        "stage1.query_field": "question",
        "stage1.date_min": "",
        "rerank.query_field": "question",
        "rerank.doc_fields": "title+abstract",
        "run.tag": "run2",
    },
}


def read_config_file(path):
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise FormatError(f"{path}:{lineno}: expected key = value")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key not in DEFAULTS:
                raise FormatError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = value.strip()
    return values


def resolve(config_file=None, preset=None, overrides=None):
    """Merge the four layers into one flat dict."""
    merged = dict(DEFAULTS)
    if config_file:
        merged.update(read_config_file(config_file))
    if preset:
        if preset not in PRESETS:
            raise FormatError(f"unknown preset {preset!r}; available: "
                              f"{', '.join(sorted(PRESETS))}")
        merged.update(PRESETS[preset])
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in DEFAULTS:
            raise FormatError(f"unknown config key {key!r}")
        merged[key] = str(value)
    return merged


def parse_date_min(value):
    if not value:
        return None
    try:
        return date.fromisoformat(value)
    except ValueError:
        raise FormatError(f"bad stage1.date_min {value!r}; expected YYYY-MM-DD") from None


def stage1_params(cfg):
    """(model name, model params) from a resolved config."""
    model = cfg["stage1.model"]
    if model == "bm25":
        return model, BM25Params(k1=float(cfg["bm25.k1"]), b=float(cfg["bm25.b"]))
    if model == "rm3":
        return model, RM3Params(fb_terms=int(cfg["rm3.fb_terms"]),
                                fb_docs=int(cfg["rm3.fb_docs"]),
                                orig_weight=float(cfg["rm3.orig_weight"]))
    if model == "sdm":
        return model, SDMParams(w_term=float(cfg["sdm.w_term"]),
                                w_ordered=float(cfg["sdm.w_ordered"]),
                                w_unordered=float(cfg["sdm.w_unordered"]),
                                window=int(cfg["sdm.window"]),
                                mu=float(cfg["sdm.mu"]))
    raise FormatError(f"unknown stage1.model {model!r}")


def rerank_config(cfg):
    from .rerank import RerankConfig
    return RerankConfig(
        query_field=cfg["rerank.query_field"],
        doc_fields=FieldSelector.from_name(cfg["rerank.doc_fields"]),
        max_passage_tokens=int(cfg["rerank.max_passage_tokens"]),
        aggregation=cfg["rerank.aggregation"],
        batch_size=int(cfg["rerank.batch_size"]),
    )
