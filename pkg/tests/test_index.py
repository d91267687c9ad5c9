import random

import pytest

from sciret.analysis import Analyzer
from sciret.corpus import Document, FieldSelector, concat_fields
from sciret.errors import DataError, IndexFormatError
from sciret.index import InvertedIndex, build_index

SEL = FieldSelector(True, False, False)


def docs_from_texts(texts):
    return [Document(f"d{i}", title=t) for i, t in enumerate(texts)]


def test_counting_example():
    index = build_index(docs_from_texts(["a virus", "virus virus"]), SEL)
    assert index.df("viru") == 2
    postings = {p.doc_ord: p.tf for p in index.lookup("viru")}
    assert postings[index.doc_ord("d1")] == 2
    assert index.avg_doc_len == pytest.approx(1.5)  # stopword "a" removed


def test_rebuild_identical_bytes(tmp_path):
    docs = docs_from_texts(["a virus", "virus virus", "weather report"])
    p1, p2 = tmp_path / "a.idx", tmp_path / "b.idx"
    build_index(docs, SEL).save(p1)
    build_index(list(reversed(docs)), SEL).save(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_single_empty_doc():
    index = build_index([Document("d0", title="")], SEL)
    assert index.doc_count == 1
    assert index.avg_doc_len == 0
    assert index.lookup("anything") == []


def test_empty_corpus_rejected():
    with pytest.raises(DataError):
        build_index([], SEL)


def test_lookup_unseen_term(fulltext_index):
    assert fulltext_index.lookup("zzzunseen") == []


def test_postings_sorted_by_ord(fulltext_index):
    for term in fulltext_index.vocabulary():
        ords = [p.doc_ord for p in fulltext_index.lookup(term)]
        assert ords == sorted(ords)
        assert fulltext_index.df(term) == len(ords)


def test_tf_equals_positions(fulltext_index):
    for term in fulltext_index.vocabulary():
        for p in fulltext_index.lookup(term):
            assert p.tf == len(p.positions)
            assert list(p.positions) == sorted(p.positions)


def test_stats_invariant(fulltext_index):
    index = fulltext_index
    assert index.avg_doc_len * index.doc_count == pytest.approx(index.total_terms)
    total_tf = sum(p.tf for t in index.vocabulary() for p in index.lookup(t))
    assert total_tf == index.total_terms


def test_round_trip(tmp_path, fulltext_index):
    path = tmp_path / "idx.bin"
    fulltext_index.save(path)
    loaded = InvertedIndex.load(path)
    assert loaded.doc_ids == fulltext_index.doc_ids
    assert loaded.doc_lens == fulltext_index.doc_lens
    assert loaded.dates == fulltext_index.dates
    assert loaded.precisions == fulltext_index.precisions
    assert sorted(loaded.vocabulary()) == sorted(fulltext_index.vocabulary())
    for term in fulltext_index.vocabulary():
        assert loaded.lookup(term) == fulltext_index.lookup(term)
    assert loaded.avg_doc_len == fulltext_index.avg_doc_len


def test_truncated_file_errors(tmp_path, fulltext_index):
    path = tmp_path / "idx.bin"
    fulltext_index.save(path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(IndexFormatError):
        InvertedIndex.load(path)


def test_wrong_magic_names_format(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"JUNKJUNKJUNKJUNK")
    with pytest.raises(IndexFormatError, match="SRIX"):
        InvertedIndex.load(path)


def test_doc_ord_stable_sorted_by_id():
    docs = [Document("zeta", title="x"), Document("alpha", title="y")]
    index = build_index(docs, SEL)
    assert index.doc_ids == ["alpha", "zeta"]


WORDS = ["virus", "spread", "weather", "distancing", "mask", "vaccine",
         "cell", "protein", "the", "of", "hypertension", "cough"]


@pytest.mark.parametrize("seed", range(5))
def test_brute_force_counts_match(seed):
    rng = random.Random(seed)
    texts = [" ".join(rng.choices(WORDS, k=rng.randint(0, 30)))
             for _ in range(rng.randint(1, 20))]
    docs = docs_from_texts(texts)
    index = build_index(docs, SEL)
    analyzer = Analyzer()
    analyzed = {d.doc_id: analyzer.analyze(concat_fields(d, SEL)) for d in docs}
    for doc_id, stems in analyzed.items():
        assert index.doc_lens[index.doc_ord(doc_id)] == len(stems)
    vocab = {s for stems in analyzed.values() for s in stems}
    assert vocab == set(index.vocabulary())
    for term in vocab:
        assert index.df(term) == sum(1 for s in analyzed.values() if term in s)
        for p in index.lookup(term):
            stems = analyzed[index.doc_id(p.doc_ord)]
            assert p.tf == stems.count(term)
            assert list(p.positions) == [i for i, s in enumerate(stems) if s == term]


def test_positions_can_be_dropped():
    index = build_index(docs_from_texts(["virus spread virus"]), SEL,
                        store_positions=False)
    assert not index.has_positions
    (posting,) = index.lookup("viru")
    assert posting.tf == 2 and posting.positions == ()
