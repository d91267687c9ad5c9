"""First-stage candidate generation: BM25, RM3 expansion, and QL-SDM.

Scoring conventions, pinned for reproducibility:

- BM25 uses Robertson tf saturation with the non-negative idf
  ln(1 + (N - df + 0.5) / (df + 0.5)). Documents scoring 0 (no query
  term) are not returned.
- SDM scores every document with Dirichlet-smoothed log-likelihoods:
  w_term * unigram + w_ordered * ordered-window + w_unordered *
  unordered-window over adjacent query-term pairs. An ordered-window
  match is pos(b) - pos(a) in [1, window-1]; unordered uses
  |pos(a) - pos(b)| in [1, window-1] (both terms inside a `window`-token
  span). Features with zero collection frequency are skipped.
- An active date filter drops documents published before the minimum
  date and documents without a date, before ranking.
- Ties always break by doc_id ascending.
"""

import math
from dataclasses import dataclass

from .analysis import Analyzer
from .errors import DataError, EmptyQueryError

DEFAULT_TOP_K = 500


@dataclass(frozen=True)
class BM25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0 <= self.b <= 1:
            raise ValueError("b must be in [0, 1]")


@dataclass(frozen=True)
class RM3Params:
    fb_terms: int = 10
    fb_docs: int = 10
    orig_weight: float = 0.5

    def __post_init__(self):
        if not 1 <= self.fb_terms <= 20:
            raise ValueError("fb_terms must be in [1, 20]")
        if not 1 <= self.fb_docs <= 20:
            raise ValueError("fb_docs must be in [1, 20]")
        if not 0 <= self.orig_weight <= 1:
            raise ValueError("orig_weight must be in [0, 1]")


@dataclass(frozen=True)
class SDMParams:
    w_term: float = 0.85
    w_ordered: float = 0.1
    w_unordered: float = 0.05
    window: int = 8
    mu: float = 1000.0

    def __post_init__(self):
        if min(self.w_term, self.w_ordered, self.w_unordered) < 0:
            raise ValueError("SDM weights must be >= 0")
        if abs(self.w_term + self.w_ordered + self.w_unordered - 1.0) > 1e-9:
            raise ValueError("SDM weights must sum to 1")
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.mu <= 0:
            raise ValueError("mu must be > 0")


@dataclass(frozen=True)
class Candidate:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class WeightedQuery:
    """RM3 output: term -> weight, a probability distribution."""
    weights: dict
    expanded: bool  # False when feedback was empty and the original query returned


def allowed_doc_ords(index, min_date):
    """Document ordinals surviving the date filter (all, when disabled).

    Normalized partial dates are the earliest day consistent with the raw
    value, so `normalized >= min_date` is already a conservative test; a
    document without any date is excluded while the filter is active.
    """
    if min_date is None:
        return None
    return {
        i for i in range(index.doc_count)
        if index.dates[i] is not None and index.dates[i] >= min_date
    }


def _analyze_query(query_text, stopwords=None):
    stems = Analyzer(stopwords).analyze(query_text)
    if not stems:
        raise EmptyQueryError(f"query analyzed to zero terms: {query_text!r}")
    return stems


def _ranked(scores_by_ord, index, k):
    items = sorted(scores_by_ord.items(),
                   key=lambda kv: (-kv[1], index.doc_id(kv[0])))[:k]
    return [Candidate(index.doc_id(o), s, rank) for rank, (o, s) in enumerate(items, 1)]


def bm25_term_scores(index, term, params):
    """Per-document BM25 contribution of one query term: doc_ord -> score."""
    postings = index.lookup(term)
    if not postings:
        return {}
    n, avgdl = index.doc_count, index.avg_doc_len
    df = len(postings)
    idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
    out = {}
    for p in postings:
        dl = index.doc_lens[p.doc_ord]
        norm = 1 - params.b + params.b * (dl / avgdl if avgdl > 0 else 0.0)
        out[p.doc_ord] = idf * p.tf * (params.k1 + 1) / (p.tf + params.k1 * norm)
    return out


def bm25_search(index, query_text, params=BM25Params(), k=DEFAULT_TOP_K,
                date_filter=None, stopwords=None):
    """Top-k BM25 candidates, highest score first."""
    if k < 1:
        raise ValueError("k must be >= 1")
    stems = _analyze_query(query_text, stopwords)
    return _bm25_rank(index, stems, params, k, date_filter)


def _bm25_rank(index, stems, params, k, date_filter):
    allowed = allowed_doc_ords(index, date_filter)
    scores = {}
    for term in stems:
        for doc_ord, s in bm25_term_scores(index, term, params).items():
            if allowed is not None and doc_ord not in allowed:
                continue
            scores[doc_ord] = scores.get(doc_ord, 0.0) + s
    return _ranked(scores, index, k)


def weighted_bm25_search(index, query: WeightedQuery, params=BM25Params(),
                         k=DEFAULT_TOP_K, date_filter=None):
    """Rank with an RM3-expanded query: per-term BM25 scores scaled by
    the query-model weights."""
    if k < 1:
        raise ValueError("k must be >= 1")
    allowed = allowed_doc_ords(index, date_filter)
    scores = {}
    for term, weight in query.weights.items():
        for doc_ord, s in bm25_term_scores(index, term, params).items():
            if allowed is not None and doc_ord not in allowed:
                continue
            scores[doc_ord] = scores.get(doc_ord, 0.0) + weight * s
    return _ranked(scores, index, k)


def rm3_expand(index, query_text, base=BM25Params(), rm3=RM3Params(),
               stopwords=None, date_filter=None):
    """RM3 pseudo-relevance feedback.

    First pass: BM25 with `base` parameters. The relevance model is
    p(w|R) proportional to sum_d p(w|d) * s(d), where p(w|d) is the
    maximum-likelihood document model and s(d) the BM25 scores of the top
    fb_docs normalized to sum 1. The top fb_terms terms are kept and the
    result interpolated with the original query model.
    """
    stems = _analyze_query(query_text, stopwords)
    query_model = {}
    for t in stems:
        query_model[t] = query_model.get(t, 0) + 1
    total = sum(query_model.values())
    query_model = {t: c / total for t, c in query_model.items()}

    feedback = _bm25_rank(index, stems, base, rm3.fb_docs, date_filter)
    feedback = [c for c in feedback if index.doc_lens[index.doc_ord(c.doc_id)] > 0]
    if not feedback:
        return WeightedQuery(dict(query_model), expanded=False)

    score_sum = sum(c.score for c in feedback)
    doc_weights = {
        index.doc_ord(c.doc_id):
            (c.score / score_sum if score_sum > 0 else 1.0 / len(feedback))
        for c in feedback
    }
    rel_model = {}
    for term in index.vocabulary():
        for p in index.lookup(term):
            if p.doc_ord in doc_weights:
                contribution = doc_weights[p.doc_ord] * p.tf / index.doc_lens[p.doc_ord]
                rel_model[term] = rel_model.get(term, 0.0) + contribution

    top = sorted(rel_model.items(), key=lambda kv: (-kv[1], kv[0]))[:rm3.fb_terms]
    top_sum = sum(w for _, w in top)
    rel_model = {t: w / top_sum for t, w in top}

    weights = {}
    for t, w in query_model.items():
        weights[t] = rm3.orig_weight * w
    for t, w in rel_model.items():
        weights[t] = weights.get(t, 0.0) + (1 - rm3.orig_weight) * w
    weights = {t: w for t, w in weights.items() if w > 0}
    return WeightedQuery(weights, expanded=True)


def rm3_search(index, query_text, base=BM25Params(), rm3=RM3Params(),
               k=DEFAULT_TOP_K, date_filter=None, stopwords=None):
    expanded = rm3_expand(index, query_text, base, rm3, stopwords, date_filter)
    return weighted_bm25_search(index, expanded, base, k, date_filter)


# -- SDM ------------------------------------------------------------------

def _dirichlet_log_prob(tf, dl, cf, collection_size, mu):
    return math.log((tf + mu * cf / collection_size) / (dl + mu))


def _window_counts(positions_a, positions_b, window, ordered):
    """Count co-occurrences of two terms within a `window`-token span."""
    count = 0
    for pa in positions_a:
        for pb in positions_b:
            delta = pb - pa
            if ordered:
                if 1 <= delta <= window - 1:
                    count += 1
            else:
                if 1 <= abs(delta) <= window - 1:
                    count += 1
    return count


def _pair_feature_tfs(index, term_a, term_b, window, ordered):
    """Per-document window-match counts plus the collection frequency."""
    postings_a = {p.doc_ord: p for p in index.lookup(term_a)}
    postings_b = {p.doc_ord: p for p in index.lookup(term_b)}
    tfs = {}
    cf = 0
    for doc_ord in postings_a.keys() & postings_b.keys():
        c = _window_counts(postings_a[doc_ord].positions,
                           postings_b[doc_ord].positions, window, ordered)
        if c:
            tfs[doc_ord] = c
        cf += c
    return tfs, cf


def sdm_search(index, query_text, params=SDMParams(), k=DEFAULT_TOP_K,
               date_filter=None, stopwords=None):
    """QL Sequential Dependence Model ranking.

    Every document surviving the date filter is scored (background
    probabilities make non-matching documents comparable); features whose
    collection frequency is zero are skipped.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not index.has_positions:
        raise DataError("SDM requires an index built with positions")
    stems = _analyze_query(query_text, stopwords)
    allowed = allowed_doc_ords(index, date_filter)
    ords = range(index.doc_count) if allowed is None else sorted(allowed)
    collection_size = index.total_terms
    if collection_size == 0:
        raise DataError("cannot run SDM over an empty collection")

    unigram_tfs = []
    for t in stems:
        cf = index.cf(t)
        if cf == 0:
            continue
        unigram_tfs.append(({p.doc_ord: p.tf for p in index.lookup(t)}, cf))
    pair_feats = []  # (tfs, cf, ordered?)
    for a, b in zip(stems, stems[1:]):
        for ordered in (True, False):
            tfs, cf = _pair_feature_tfs(index, a, b, params.window, ordered)
            if cf:
                pair_feats.append((tfs, cf, ordered))

    scores = {}
    for doc_ord in ords:
        dl = index.doc_lens[doc_ord]
        s = 0.0
        for tfs, cf in unigram_tfs:
            s += params.w_term * _dirichlet_log_prob(
                tfs.get(doc_ord, 0), dl, cf, collection_size, params.mu)
        for tfs, cf, ordered in pair_feats:
            w = params.w_ordered if ordered else params.w_unordered
            if w == 0:
                continue
            s += w * _dirichlet_log_prob(
                tfs.get(doc_ord, 0), dl, cf, collection_size, params.mu)
        scores[doc_ord] = s
    return _ranked(scores, index, k)
