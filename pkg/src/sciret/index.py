"""Inverted index with positions and the corpus statistics BM25/QL need.

On-disk format (version 1, little-endian throughout):

    magic  b"SRIX"
    u32    version (1)
    u32    flags (bit 0: positions stored)
    str    field selector name           (str = u16 length + utf-8 bytes)
    u32    N (document count)
    u64    total_terms
    f64    avg_doc_len
    N x  [ str doc_id, u32 doc_len, u32 date as yyyymmdd (0 = absent),
           u8 date precision (0 none / 1 day / 2 month / 3 year) ]
    u32    term count
    per term: str term, u32 df,
              df x [ u32 doc_ord, u32 tf, tf x u32 positions (if flag) ]
    magic  b"XIRS"
"""

import struct
from dataclasses import dataclass
from datetime import date

from .analysis import Analyzer
from .corpus import DatePrecision, concat_fields
from .errors import DataError, IndexFormatError

MAGIC = b"SRIX"
END_MAGIC = b"XIRS"
VERSION = 1

_PRECISION_CODES = {None: 0, DatePrecision.DAY: 1, DatePrecision.MONTH: 2,
                    DatePrecision.YEAR: 3}
_PRECISION_FROM_CODE = {v: k for k, v in _PRECISION_CODES.items()}


@dataclass(frozen=True)
class Posting:
    doc_ord: int
    tf: int
    positions: tuple = ()


class InvertedIndex:
    def __init__(self, doc_ids, doc_lens, dates, precisions, postings,
                 selector_name, has_positions):
        self.doc_ids = list(doc_ids)
        self.doc_lens = list(doc_lens)
        self.dates = list(dates)
        self.precisions = list(precisions)
        self._postings = postings
        self.selector_name = selector_name
        self.has_positions = has_positions
        self._ord_by_id = {d: i for i, d in enumerate(self.doc_ids)}
        self._cf_cache = {}

    # -- statistics -------------------------------------------------------

    @property
    def doc_count(self):
        return len(self.doc_ids)

    @property
    def total_terms(self):
        return sum(self.doc_lens)

    @property
    def avg_doc_len(self):
        if not self.doc_ids:
            return 0.0
        return self.total_terms / len(self.doc_ids)

    def df(self, term):
        postings = self._postings.get(term)
        return len(postings) if postings else 0

    def cf(self, term):
        """Collection frequency: total occurrences of term."""
        if term not in self._cf_cache:
            self._cf_cache[term] = sum(p.tf for p in self.lookup(term))
        return self._cf_cache[term]

    def vocabulary(self):
        return self._postings.keys()

    # -- lookups ----------------------------------------------------------

    def lookup(self, term):
        return self._postings.get(term, [])

    def doc_ord(self, doc_id):
        return self._ord_by_id[doc_id]

    def doc_id(self, doc_ord):
        return self.doc_ids[doc_ord]

    def doc_date(self, doc_ord):
        return self.dates[doc_ord]

    # -- persistence ------------------------------------------------------

    def save(self, path):
        with open(path, "wb") as f:
            f.write(MAGIC)
            flags = 1 if self.has_positions else 0
            f.write(struct.pack("<II", VERSION, flags))
            _write_str(f, self.selector_name)
            f.write(struct.pack("<IQd", self.doc_count, self.total_terms,
                                self.avg_doc_len))
            for i, doc_id in enumerate(self.doc_ids):
                _write_str(f, doc_id)
                d = self.dates[i]
                encoded = d.year * 10000 + d.month * 100 + d.day if d else 0
                f.write(struct.pack("<IIB", self.doc_lens[i], encoded,
                                    _PRECISION_CODES[self.precisions[i]]))
            f.write(struct.pack("<I", len(self._postings)))
            for term in sorted(self._postings):
                _write_str(f, term)
                postings = self._postings[term]
                f.write(struct.pack("<I", len(postings)))
                for p in postings:
                    f.write(struct.pack("<II", p.doc_ord, p.tf))
                    if self.has_positions:
                        f.write(struct.pack(f"<{p.tf}I", *p.positions))
            f.write(END_MAGIC)

    @classmethod
    def load(cls, path):
        try:
            with open(path, "rb") as f:
                data = f.read()
            return cls._parse(data)
        except struct.error as exc:
            raise IndexFormatError(f"truncated or corrupt index file {path}: {exc}") from exc
        except IndexFormatError:
            raise
        except (IndexError, ValueError) as exc:
            raise IndexFormatError(f"corrupt index file {path}: {exc}") from exc

    @classmethod
    def _parse(cls, data):
        if data[:4] != MAGIC:
            raise IndexFormatError(
                f"bad magic {data[:4]!r}; expected {MAGIC!r} (sciret index v{VERSION})")
        off = 4
        version, flags = struct.unpack_from("<II", data, off)
        off += 8
        if version != VERSION:
            raise IndexFormatError(f"unsupported index version {version}; expected {VERSION}")
        has_positions = bool(flags & 1)
        selector_name, off = _read_str(data, off)
        n, total_terms, avgdl = struct.unpack_from("<IQd", data, off)
        off += struct.calcsize("<IQd")
        doc_ids, doc_lens, dates, precisions = [], [], [], []
        for _ in range(n):
            doc_id, off = _read_str(data, off)
            doc_len, encoded, prec = struct.unpack_from("<IIB", data, off)
            off += 9
            doc_ids.append(doc_id)
            doc_lens.append(doc_len)
            dates.append(date(encoded // 10000, encoded // 100 % 100, encoded % 100)
                         if encoded else None)
            precisions.append(_PRECISION_FROM_CODE[prec])
        (term_count,) = struct.unpack_from("<I", data, off)
        off += 4
        postings = {}
        for _ in range(term_count):
            term, off = _read_str(data, off)
            (df,) = struct.unpack_from("<I", data, off)
            off += 4
            plist = []
            for _ in range(df):
                doc_ord, tf = struct.unpack_from("<II", data, off)
                off += 8
                if has_positions:
                    positions = struct.unpack_from(f"<{tf}I", data, off)
                    off += 4 * tf
                else:
                    positions = ()
                plist.append(Posting(doc_ord, tf, positions))
            postings[term] = plist
        if data[off:off + 4] != END_MAGIC:
            raise IndexFormatError("index file truncated: end marker missing")
        idx = cls(doc_ids, doc_lens, dates, precisions, postings,
                  selector_name, has_positions)
        if idx.total_terms != total_terms:
            raise IndexFormatError("index file corrupt: term-count mismatch")
        return idx


def _write_str(f, s):
    raw = s.encode("utf-8")
    f.write(struct.pack("<H", len(raw)))
    f.write(raw)


def _read_str(data, off):
    (length,) = struct.unpack_from("<H", data, off)
    off += 2
    raw = data[off:off + length]
    if len(raw) != length:
        raise IndexFormatError("index file truncated inside a string")
    return raw.decode("utf-8"), off + length


def build_index(corpus, sel, stopwords=None, store_positions=True):
    """Index `corpus` over concat_fields(doc, sel).

    Documents are ordered by doc_id so ordinals are stable under rebuild.
    A document that analyzes to zero terms is kept with doc_len 0.
    """
    docs = sorted(corpus, key=lambda d: d.doc_id)
    if not docs:
        raise DataError("cannot build an index over an empty corpus")
    seen = set()
    for d in docs:
        if d.doc_id in seen:
            raise DataError(f"duplicate doc_id in corpus: {d.doc_id}")
        seen.add(d.doc_id)

    analyzer = Analyzer(stopwords)
    doc_ids, doc_lens, dates, precisions = [], [], [], []
    postings = {}
    for doc_ord, doc in enumerate(docs):
        stems = analyzer.analyze(concat_fields(doc, sel))
        doc_ids.append(doc.doc_id)
        doc_lens.append(len(stems))
        dates.append(doc.publish_date)
        precisions.append(doc.date_precision)
        by_term = {}
        for pos, stem in enumerate(stems):
            by_term.setdefault(stem, []).append(pos)
        for term, positions in by_term.items():
            postings.setdefault(term, []).append(
                Posting(doc_ord, len(positions),
                        tuple(positions) if store_positions else ()))
    return InvertedIndex(doc_ids, doc_lens, dates, precisions, postings,
                         sel.name, store_positions)
