"""Corpus ingestion: metadata table plus per-article fulltext JSON.

Expected layout (see README for a fixture example):

    corpus_dir/
      metadata.csv          # cord_uid,title,abstract,publish_time,
                            # pubmed_json,pdf_json
      <relative paths>.json # {"body_text": [{"section": ..., "text": ...}]}

`pubmed_json` / `pdf_json` hold paths relative to the corpus directory,
empty when unavailable. When both are present the PubMed-derived file
wins. Partial dates normalize to the earliest matching day and carry a
precision marker so the date filter stays conservative.
"""

import csv
import json
import logging
from dataclasses import dataclass, replace
from datetime import date
from enum import Enum
from pathlib import Path

from .errors import FormatError

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("cord_uid", "title", "abstract", "publish_time",
                    "pubmed_json", "pdf_json")


class SourceKind(str, Enum):
    PUBMED_XML = "pubmed_xml"
    PDF = "pdf"
    METADATA_ONLY = "metadata_only"


class DatePrecision(str, Enum):
    DAY = "day"
    MONTH = "month"
    YEAR = "year"


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str = ""
    abstract: str = ""
    body_paragraphs: tuple = ()
    section_headings: tuple = ()
    publish_date: date | None = None
    date_precision: DatePrecision | None = None
    source_kind: SourceKind = SourceKind.METADATA_ONLY
    pubmed_path: str = ""
    pdf_path: str = ""


@dataclass(frozen=True)
class FieldSelector:
    include_title: bool = True
    include_abstract: bool = True
    include_fulltext: bool = True

    def __post_init__(self):
        if not (self.include_title or self.include_abstract or self.include_fulltext):
            raise ValueError("FieldSelector must select at least one field")

    @classmethod
    def from_name(cls, name):
        """Parse a selector name: 'full_text' or 'title_abstract' or a
        '+'-joined list of title/abstract/fulltext."""
        if name == "full_text":
            return cls(True, True, True)
        if name == "title_abstract":
            return cls(True, True, False)
        parts = set(name.split("+"))
        known = {"title", "abstract", "fulltext"}
        if not parts or not parts <= known:
            raise ValueError(f"unknown field selector: {name!r}")
        return cls("title" in parts, "abstract" in parts, "fulltext" in parts)

    @property
    def name(self):
        parts = []
        if self.include_title:
            parts.append("title")
        if self.include_abstract:
            parts.append("abstract")
        if self.include_fulltext:
            parts.append("fulltext")
        return "+".join(parts)


def parse_date(raw):
    """Parse a possibly partial date string.

    Returns (date, precision) or (None, None) when unparseable. Year-only
    values map to Jan 1, year-month to the 1st, so the normalized date is
    the earliest calendar day consistent with the raw value.
    """
    raw = (raw or "").strip()
    if not raw:
        return None, None
    parts = raw.split("-")
    try:
        if len(parts) == 1:
            return date(int(parts[0]), 1, 1), DatePrecision.YEAR
        if len(parts) == 2:
            return date(int(parts[0]), int(parts[1]), 1), DatePrecision.MONTH
        return date(int(parts[0]), int(parts[1]), int(parts[2])), DatePrecision.DAY
    except ValueError:
        return None, None


def parse_metadata(stream):
    """Parse the metadata CSV into Document stubs (no fulltext attached).

    Duplicate ids keep the first occurrence; a warning is logged and
    counted. Returns (documents sorted by doc_id, warning_count).
    """
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise FormatError("metadata table is empty")
    missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise FormatError(f"metadata table missing required column(s): {', '.join(missing)}")

    docs = {}
    warnings = 0
    for row in reader:
        doc_id = (row["cord_uid"] or "").strip()
        if not doc_id:
            raise FormatError(f"metadata row {reader.line_num} has empty cord_uid")
        if doc_id in docs:
            log.warning("duplicate cord_uid %s at line %d; keeping first", doc_id, reader.line_num)
            warnings += 1
            continue
        publish_date, precision = parse_date(row["publish_time"])
        docs[doc_id] = Document(
            doc_id=doc_id,
            title=row["title"] or "",
            abstract=row["abstract"] or "",
            publish_date=publish_date,
            date_precision=precision,
            pubmed_path=(row["pubmed_json"] or "").strip(),
            pdf_path=(row["pdf_json"] or "").strip(),
        )
    return [docs[k] for k in sorted(docs)], warnings


def _read_fulltext(path):
    """Read one structured fulltext file.

    Schema: a JSON object with a "body_text" list of
    {"section": str, "text": str} records, in reading order. Extra keys
    are ignored. Returns (paragraphs, headings).
    """
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    body = data["body_text"]
    paragraphs = []
    headings = []
    for entry in body:
        text = entry.get("text", "")
        section = entry.get("section", "")
        paragraphs.append(text)
        if section and (not headings or headings[-1] != section):
            headings.append(section)
    return tuple(paragraphs), tuple(headings)


def attach_fulltext(doc, pubmed_file=None, pdf_file=None):
    """Attach body text, preferring the PubMed-derived file over the PDF
    extraction. A malformed file is skipped with a warning and the next
    preference is tried."""
    for path, kind in ((pubmed_file, SourceKind.PUBMED_XML), (pdf_file, SourceKind.PDF)):
        if not path:
            continue
        try:
            paragraphs, headings = _read_fulltext(path)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            log.warning("skipping malformed fulltext %s for %s: %s", path, doc.doc_id, exc)
            continue
        return replace(doc, body_paragraphs=paragraphs, section_headings=headings,
                       source_kind=kind)
    return replace(doc, body_paragraphs=(), section_headings=(),
                   source_kind=SourceKind.METADATA_ONLY)


def load_corpus(corpus_dir):
    """Load a full corpus directory: metadata plus fulltext attachment.

    Returns documents sorted by doc_id. Deterministic for a given
    directory content.
    """
    corpus_dir = Path(corpus_dir)
    with open(corpus_dir / "metadata.csv", encoding="utf-8", newline="") as f:
        stubs, _ = parse_metadata(f)
    docs = []
    for stub in stubs:
        pubmed = corpus_dir / stub.pubmed_path if stub.pubmed_path else None
        pdf = corpus_dir / stub.pdf_path if stub.pdf_path else None
        docs.append(attach_fulltext(stub, pubmed, pdf))
    return docs


def concat_fields(doc, sel):
    """Join the selected fields in the order title, abstract, headings,
    paragraphs, with newline separators. Empty fields contribute nothing."""
    pieces = []
    if sel.include_title and doc.title:
        pieces.append(doc.title)
    if sel.include_abstract and doc.abstract:
        pieces.append(doc.abstract)
    if sel.include_fulltext:
        pieces.extend(h for h in doc.section_headings if h)
        pieces.extend(p for p in doc.body_paragraphs if p)
    return "\n".join(pieces)
