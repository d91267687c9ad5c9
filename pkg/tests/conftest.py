import csv
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the oracles package

from sciret.analysis import Analyzer
from sciret.corpus import FieldSelector, load_corpus
from sciret.index import build_index

FIXTURE_ARTICLES = [
    # (doc_id, title, abstract, publish_time, body paragraphs as (section, text))
    ("doc1", "Coronavirus transmission dynamics",
     "We study how the novel coronavirus spreads between humans in cities.",
     "2020-03-14",
     [("Introduction", "The coronavirus spreads rapidly through droplets."),
      ("Methods", "We model social distancing and quarantine measures.")]),
    ("doc2", "Weather patterns and respiratory viruses",
     "Seasonal weather changes influence respiratory virus survival.",
     "2019-11-02",
     [("Background", "Cold weather increases virus stability on surfaces.")]),
    ("doc3", "Social distancing impact on epidemic curves",
     "Social distancing flattens the epidemic curve of the coronavirus.",
     "2020-04-01",
     [("Results", "Strict social distancing reduced transmission by half."),
      ("Discussion", "Distancing policies must balance economic impact.")]),
    ("doc4", "Hypertension and viral infection outcomes",
     "Patients with hypertension show worse outcomes after viral infection.",
     "2020-01-01",
     [("Cohort", "Hypertension was the most common comorbidity observed.")]),
    ("doc5", "A history of coronavirus research",
     "Decades of coronavirus research preceded the current outbreak.",
     "2018",
     [("Review", "Early coronavirus strains infected livestock and birds.")]),
    ("doc6", "Masks and droplet spread", "", "2020-02",
     []),
]


def make_corpus_dir(root):
    """Write a CORD-19-style fixture corpus under `root`."""
    root = Path(root)
    (root / "fulltext").mkdir(parents=True, exist_ok=True)
    rows = []
    for doc_id, title, abstract, publish, body in FIXTURE_ARTICLES:
        pubmed_rel = ""
        if body:
            pubmed_rel = f"fulltext/{doc_id}.json"
            payload = {"paper_id": doc_id,
                       "body_text": [{"section": s, "text": t} for s, t in body]}
            (root / pubmed_rel).write_text(json.dumps(payload), encoding="utf-8")
        rows.append({"cord_uid": doc_id, "title": title, "abstract": abstract,
                     "publish_time": publish, "pubmed_json": pubmed_rel,
                     "pdf_json": ""})
    with open(root / "metadata.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["cord_uid", "title", "abstract",
                                               "publish_time", "pubmed_json",
                                               "pdf_json"])
        writer.writeheader()
        writer.writerows(rows)
    return root


TOPICS_XML = """<topics>
  <topic number="1">
    <query>coronavirus social distancing</query>
    <question>What is the impact of social distancing on coronavirus spread?</question>
    <narrative>Studies measuring the effect of distancing policies.</narrative>
  </topic>
  <topic number="2">
    <query>coronavirus weather</query>
    <question>How does the coronavirus respond to weather changes?</question>
    <narrative>Seasonal and climate effects on transmission.</narrative>
  </topic>
  <topic number="3">
    <query>coronavirus hypertension</query>
    <question>Do hypertension patients have worse coronavirus outcomes?</question>
    <narrative>Comorbidity studies of hypertensive patients.</narrative>
  </topic>
</topics>
"""

QRELS_TEXT = """\
1 0 doc1 1
1 0 doc3 2
1 0 doc5 0
2 0 doc2 2
2 0 doc1 1
2 0 doc5 0
3 0 doc4 2
3 0 doc1 0
"""


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    return make_corpus_dir(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def corpus_docs(corpus_dir):
    return load_corpus(corpus_dir)


@pytest.fixture(scope="session")
def fulltext_index(corpus_docs):
    return build_index(corpus_docs, FieldSelector(True, True, True))


@pytest.fixture(scope="session")
def title_abstract_index(corpus_docs):
    return build_index(corpus_docs, FieldSelector(True, True, False))


@pytest.fixture(scope="session")
def topics_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("topics") / "topics.xml"
    path.write_text(TOPICS_XML, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def qrels_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("qrels") / "qrels.txt"
    path.write_text(QRELS_TEXT, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def analyzer():
    return Analyzer()


def analyzed_corpus(index_docs, selector):
    """doc_id -> analyzed stems, straight from the documents (bypasses
    the index; used to feed the brute-force oracles)."""
    from sciret.corpus import concat_fields
    analyzer = Analyzer()
    return {d.doc_id: analyzer.analyze(concat_fields(d, selector))
            for d in index_docs}
