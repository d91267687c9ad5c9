"""Deterministic subword tokenizer for the cross-encoder.

No learned vocabulary: words are lowercased, split on non-alphanumerics,
chopped into fixed-width character pieces, and hashed into a fixed-size
id space. That keeps the encoder self-contained (no checkpoint download)
while still exercising a realistic subword pipeline: long words span
several units and share pieces with their inflections.

Sequence layout: [CLS] query [SEP] passage [SEP], truncated to
`max_sequence_length` total units. The query is capped at
`max_query_units` first; the passage gets whatever budget remains.
"""

import hashlib
import re

PAD_ID = 0
CLS_ID = 1
SEP_ID = 2
_RESERVED = 3

VOCAB_SIZE = 8192
MAX_SEQUENCE_LENGTH = 512
MAX_QUERY_UNITS = 64
_PIECE_LEN = 4
_WORD_RE = re.compile(r"[0-9a-z]+")


def subword_units(text):
    """Hashed subword ids for one text, special tokens excluded."""
    units = []
    for word in _WORD_RE.findall(text.lower()):
        for start in range(0, len(word), _PIECE_LEN):
            piece = word[start:start + _PIECE_LEN]
            digest = hashlib.blake2s(piece.encode(), digest_size=4).digest()
            bucket = int.from_bytes(digest, "big") % (VOCAB_SIZE - _RESERVED)
            units.append(_RESERVED + bucket)
    return units


def encode_pair(query_text, passage_text,
                max_sequence_length=MAX_SEQUENCE_LENGTH,
                max_query_units=MAX_QUERY_UNITS):
    """Joint (query, passage) id sequence: [CLS] q [SEP] p [SEP].

    The query is truncated to `max_query_units`; the passage is truncated
    so the whole sequence fits in `max_sequence_length`.
    """
    query = subword_units(query_text)[:max_query_units]
    budget = max_sequence_length - len(query) - 3  # CLS + 2 SEP
    passage = subword_units(passage_text)[:max(budget, 0)]
    return [CLS_ID] + query + [SEP_ID] + passage + [SEP_ID]
