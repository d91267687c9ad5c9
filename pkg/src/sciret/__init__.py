"""Two-stage search pipeline for scientific literature.

Lexical first-stage retrieval (BM25 / RM3 / QL-SDM) over an inverted
index, neural re-ranking via an external scorer process, TREC-style
evaluation, and grid-search tuning.
"""

__version__ = "0.1.0"
