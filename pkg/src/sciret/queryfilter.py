"""Medical-domain training-query filter.

A query is retained when it contains a lexicon term that is not on the
exclusion list. Single-word terms are matched on analyzed (stemmed,
stopword-free) tokens; multiword phrases are matched as contiguous
subsequences of the raw lowercase token stream.
"""

from dataclasses import dataclass

from .analysis import Analyzer, porter_stem, tokenize
from .errors import DataError


@dataclass(frozen=True)
class Lexicon:
    single_stems: frozenset     # stemmed single-word terms
    phrases: frozenset          # tuples of raw lowercase tokens, length >= 2

    def __post_init__(self):
        if not self.single_stems and not self.phrases:
            raise DataError("lexicon is empty after applying exclusions")


def build_lexicon(terms, exclusions=()):
    """Build a Lexicon from raw term strings, dropping excluded terms.

    Exclusion entries are compared on the raw lowercase term."""
    excluded = {e.strip().lower() for e in exclusions if e.strip()}
    single = set()
    phrases = set()
    for raw in terms:
        term = raw.strip().lower()
        if not term or term in excluded:
            continue
        tokens = tokenize(term)
        if not tokens:
            continue
        if len(tokens) == 1:
            single.add(porter_stem(tokens[0]))
        else:
            phrases.add(tuple(tokens))
    return Lexicon(frozenset(single), frozenset(phrases))


def load_lexicon(path, exclusions_path=None):
    """One term per line; lines are lowercased and deduplicated."""
    with open(path, encoding="utf-8") as f:
        terms = [line.strip() for line in f if line.strip()]
    exclusions = []
    if exclusions_path:
        with open(exclusions_path, encoding="utf-8") as f:
            exclusions = [line.strip() for line in f if line.strip()]
    return build_lexicon(terms, exclusions)


def query_matches(query_text, lexicon, analyzer=None):
    analyzer = analyzer or Analyzer()
    stems = set(analyzer.analyze(query_text))
    if stems & lexicon.single_stems:
        return True
    if lexicon.phrases:
        raw = tokenize(query_text)
        for phrase in lexicon.phrases:
            n = len(phrase)
            for i in range(len(raw) - n + 1):
                if tuple(raw[i:i + n]) == phrase:
                    return True
    return False


def filter_queries(queries, lexicon):
    """queries: mapping id -> text. Returns the sorted retained id list."""
    analyzer = Analyzer()
    return sorted(qid for qid, text in queries.items()
                  if query_matches(text, lexicon, analyzer))
