"""Cross-encoder relevance scorer served over a line-based JSON protocol.

The scorer jointly encodes a query and a passage and emits one relevance
probability in (0, 1). A toy-scale pairwise trainer is included; the
wire protocol matches the re-ranking pipeline's scorer contract.
"""

__version__ = "0.1.0"
