import random
import sys

import pytest

from sciret.corpus import Document, FieldSelector
from sciret.errors import ProtocolError, ScorerError
from sciret.firststage import Candidate
from sciret.protocol import ProtocolViolation, verify_scorer_command
from sciret.rerank import (CallableScorerClient, FirstStageEchoClient,
                           RerankConfig, WireScorerClient, rerank,
                           score_batch, split_passages)
from sciret.treceval import Topic

ECHO_CMD = f"{sys.executable} -m sciret.echo_scorer"

TOPIC = Topic("1", query="virus spread",
              question="How does the virus spread?", narrative="n/a")


def make_docs(texts):
    return {f"d{i}": Document(f"d{i}", title=t) for i, t in enumerate(texts)}


def make_candidates(scores):
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [Candidate(d, s, i) for i, (d, s) in enumerate(ranked, 1)]


CONFIG = RerankConfig(doc_fields=FieldSelector(True, False, False),
                      max_passage_tokens=16)


# -- passage splitting ----------------------------------------------------------

def words(n):
    return " ".join(f"w{i}" for i in range(n))


def count_tokens(text):
    import re
    return len(re.findall(r"[0-9A-Za-z]+", text))


def test_split_short_text_single_passage():
    text = words(10)
    assert split_passages(text, 16) == [text]


def test_split_exact_boundary():
    text = words(16)
    assert split_passages(text, 16) == [text]


def test_split_balanced_sizes():
    # 10 tokens with max 4 -> ceil(10/4)=3 passages sized [4, 3, 3]
    text = " ".join(f"w{i}" for i in range(10))
    passages = split_passages(text, 16)
    assert passages == [text]
    sizes = [count_tokens(p) for p in _split(text, 4)]
    assert sizes == [4, 3, 3]


def _split(text, max_tokens):
    # bypass the >=16 guard so small examples stay readable
    import sciret.rerank as rr
    spans = [m.span() for m in rr._TOKEN_SPAN_RE.finditer(text)]
    n = len(spans)
    import math
    pieces = math.ceil(n / max_tokens)
    base, rem = divmod(n, pieces)
    sizes = [base + 1] * rem + [base] * (pieces - rem)
    out, start = [], 0
    for size in sizes:
        out.append(text[spans[start][0]:spans[start + size - 1][1]])
        start += size
    return out


def test_split_sizes_differ_by_at_most_one():
    for n in (17, 33, 64, 100, 161):
        text = words(n)
        passages = split_passages(text, 16)
        sizes = [count_tokens(p) for p in passages]
        assert sum(sizes) == n
        assert max(sizes) - min(sizes) <= 1
        assert len(passages) == -(-n // 16)


def test_split_preserves_original_text():
    text = "Alpha, beta; gamma-delta epsilon! " * 12
    passages = split_passages(text.strip(), 16)
    for p in passages:
        assert p in text


def test_split_empty_text():
    assert split_passages("", 16) == [""]
    assert split_passages("... !!!", 16) == [""]


def test_split_validates_budget():
    with pytest.raises(ValueError):
        split_passages("text", 4)


# -- config ---------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        RerankConfig(max_passage_tokens=8)
    with pytest.raises(ValueError):
        RerankConfig(aggregation="median")
    with pytest.raises(ValueError):
        RerankConfig(query_field="title")


# -- rerank ---------------------------------------------------------------------

def test_echo_scorer_preserves_first_stage_order():
    docs = make_docs(["virus spread fast", "virus in cities", "weather"])
    candidates = make_candidates({"d0": 3.0, "d1": 2.0, "d2": 1.0})
    ordered = rerank(candidates, TOPIC, CONFIG, FirstStageEchoClient(), docs)
    assert [d for d, _ in ordered] == ["d0", "d1", "d2"]
    assert [s for _, s in ordered] == [3.0, 2.0, 1.0]


def test_negating_scorer_reverses_order():
    docs = make_docs(["virus spread fast", "virus in cities", "weather"])
    candidates = make_candidates({"d0": 3.0, "d1": 2.0, "d2": 1.0})
    first_stage = {c.doc_id: c.score for c in candidates}
    client = CallableScorerClient(
        lambda q, p: -first_stage[next(d for d, doc in docs.items()
                                       if doc.title == p)])
    ordered = rerank(candidates, TOPIC, CONFIG, client, docs)
    assert [d for d, _ in ordered] == ["d2", "d1", "d0"]


def test_max_aggregation_uses_best_passage():
    # d1 has a high-scoring second passage; max aggregation must surface it
    long_title = words(20) + " jackpot"
    docs = {"d0": Document("d0", title="plain passage one"),
            "d1": Document("d1", title=long_title),
            "d2": Document("d2", title="plain passage two")}
    candidates = make_candidates({"d0": 3.0, "d1": 2.0, "d2": 1.0})
    client = CallableScorerClient(lambda q, p: 9.0 if "jackpot" in p else 1.0)
    ordered = rerank(candidates, TOPIC, CONFIG, client, docs)
    assert ordered[0] == ("d1", 9.0)
    # ties between d0 and d2 break by first-stage score
    assert [d for d, _ in ordered[1:]] == ["d0", "d2"]


def test_mean_aggregation():
    long_title = words(20) + " jackpot"
    docs = {"d0": Document("d0", title=long_title)}
    candidates = [Candidate("d0", 1.0, 1)]
    client = CallableScorerClient(lambda q, p: 9.0 if "jackpot" in p else 1.0)
    config = RerankConfig(doc_fields=FieldSelector(True, False, False),
                          max_passage_tokens=16, aggregation="mean")
    ordered = rerank(candidates, TOPIC, config, client, docs)
    assert ordered[0] == ("d0", 5.0)  # mean of 1.0 and 9.0


def test_rerank_output_is_permutation():
    rng = random.Random(4)
    texts = [" ".join(rng.choices(["virus", "spread", "city", "mask"],
                                  k=rng.randint(1, 30))) for _ in range(12)]
    docs = make_docs(texts)
    candidates = make_candidates({d: rng.random() for d in docs})
    client = CallableScorerClient(lambda q, p: rng.random())
    ordered = rerank(candidates, TOPIC, CONFIG, client, docs)
    assert sorted(d for d, _ in ordered) == sorted(docs)
    scores = [s for _, s in ordered]
    assert scores == sorted(scores, reverse=True)


def test_rerank_batching_invariant():
    docs = make_docs([f"text number {i}" for i in range(10)])
    candidates = make_candidates({d: float(i) for i, d in enumerate(docs)})
    client = CallableScorerClient(lambda q, p: float(len(p)))
    small = RerankConfig(doc_fields=FieldSelector(True, False, False),
                         max_passage_tokens=16, batch_size=2)
    big = RerankConfig(doc_fields=FieldSelector(True, False, False),
                       max_passage_tokens=16, batch_size=64)
    assert rerank(candidates, TOPIC, small, client, docs) == \
        rerank(candidates, TOPIC, big, client, docs)


# -- score_batch errors -----------------------------------------------------------

class MissingIdClient:
    def score_batch(self, requests):
        return [{"id": r["id"], "score": 1.0} for r in requests[:-1]]


class NanClient:
    def score_batch(self, requests):
        return [{"id": r["id"], "score": float("nan")} for r in requests]


def test_score_batch_missing_id_raises():
    reqs = [{"id": i, "query": "q", "passage": "p"} for i in range(3)]
    with pytest.raises(ProtocolError, match="missing"):
        score_batch(MissingIdClient(), reqs)


def test_score_batch_nan_raises():
    reqs = [{"id": 0, "query": "q", "passage": "p"}]
    with pytest.raises(ProtocolError):
        score_batch(NanClient(), reqs)


def test_score_batch_preserves_request_order():
    reqs = [{"id": i, "query": "q", "passage": f"p{i}"} for i in (5, 2, 9)]
    out = score_batch(CallableScorerClient(lambda q, p: 0.5), reqs,
                      batch_size=2)
    assert [r["id"] for r in out] == [5, 2, 9]


# -- wire client against the stdio test scorer -------------------------------------

def test_wire_client_exec_mode_scores():
    client = WireScorerClient(f"exec:{ECHO_CMD} --score 0.25")
    try:
        reqs = [{"id": i, "query": "q", "passage": f"p{i}"} for i in range(5)]
        out = client.score_batch(reqs)
        assert [r["score"] for r in out] == [0.25] * 5
    finally:
        client.close()


def test_wire_client_bad_endpoint():
    with pytest.raises(ScorerError):
        WireScorerClient("not-an-endpoint")


def test_wire_client_dead_command_raises():
    with pytest.raises((ScorerError, ProtocolError)):
        client = WireScorerClient(f"exec:{sys.executable} -c 'pass'",
                                  retries=0)
        client.close()


def test_wire_client_in_rerank_pipeline():
    docs = make_docs(["virus spread", "weather report"])
    candidates = make_candidates({"d0": 2.0, "d1": 1.0})
    client = WireScorerClient(f"exec:{ECHO_CMD} --score 0.5")
    try:
        ordered = rerank(candidates, TOPIC, CONFIG, client, docs)
    finally:
        client.close()
    # constant scores: ties resolve by first-stage order
    assert [d for d, _ in ordered] == ["d0", "d1"]


def test_stdio_scorer_protocol_conformance():
    scores = verify_scorer_command([sys.executable, "-m", "sciret.echo_scorer",
                                    "--score", "0.75"])
    assert scores == {7: 0.75, 3: 0.75}


def test_conformance_rejects_non_scorer():
    with pytest.raises(ProtocolViolation):
        verify_scorer_command([sys.executable, "-c", "print('hello world')"])
