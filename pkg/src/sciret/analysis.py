"""Text analysis chain: tokenization, stopword removal, Porter stemming.

The same chain is applied to documents at index time and to queries at
search time, so term matching is consistent. All functions are pure.
"""

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from . import porter

_TOKEN_RE = re.compile(r"[0-9a-z]+")

DEFAULT_STOPWORDS_RESOURCE = "stopwords.txt"


def tokenize(text):
    """Lowercase and split into maximal alphanumeric runs.

    Punctuation and any other non-alphanumeric characters act as
    separators and are discarded.
    """
    return _TOKEN_RE.findall(text.lower())


@lru_cache(maxsize=4)
def _stopwords_from_file(path):
    with open(path, encoding="utf-8") as f:
        return frozenset(line.strip() for line in f if line.strip())


def load_stopwords(path=None):
    """Load the stopword set; defaults to the list shipped with the package."""
    if path is None:
        text = (
            resources.files("sciret.data")
            .joinpath(DEFAULT_STOPWORDS_RESOURCE)
            .read_text(encoding="utf-8")
        )
        return frozenset(line.strip() for line in text.splitlines() if line.strip())
    return _stopwords_from_file(str(path))


_DEFAULT_STOPWORDS = None


def default_stopwords():
    global _DEFAULT_STOPWORDS
    if _DEFAULT_STOPWORDS is None:
        _DEFAULT_STOPWORDS = load_stopwords()
    return _DEFAULT_STOPWORDS


def remove_stopwords(tokens, stopwords=None):
    if stopwords is None:
        stopwords = default_stopwords()
    return [t for t in tokens if t not in stopwords]


def porter_stem(token):
    """Stem one lowercase token; non-alphabetic tokens pass through."""
    return porter.stem(token)


@dataclass(frozen=True)
class AnalyzedTerm:
    stem: str
    source_token: str
    position: int


class Analyzer:
    """Tokenize -> remove stopwords -> Porter stem.

    Positions are ordinals in the post-stopword token sequence; they are
    what the index stores and what window features consume.
    """

    def __init__(self, stopwords=None):
        self.stopwords = stopwords if stopwords is not None else default_stopwords()

    def analyze(self, text):
        """Return the list of stems for `text`."""
        return [t.stem for t in self.analyze_terms(text)]

    def analyze_terms(self, text):
        terms = []
        for tok in tokenize(text):
            if tok in self.stopwords:
                continue
            terms.append(AnalyzedTerm(porter.stem(tok), tok, len(terms)))
        return terms
