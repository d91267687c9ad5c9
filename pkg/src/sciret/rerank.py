"""Neural re-ranking orchestration.

The scorer is an external process speaking newline-delimited JSON:

    handshake (scorer -> client, once):  {"protocol": 1}
    request   (client -> scorer):        {"id": <int>, "query": <str>, "passage": <str>}
    response  (scorer -> client):        {"id": <int>, "score": <float>}

Responses may arrive in any order; they are matched by id. A response
carrying an "error" field, a NaN score, or an unknown id is a protocol
violation. The orchestrator splits candidate documents into balanced
passages, scores each (query, passage) pair, and aggregates per document
(max by default).
"""

import json
import math
import re
import socket
import subprocess
import time
from dataclasses import dataclass, field

from .corpus import FieldSelector, concat_fields
from .errors import ProtocolError, ScorerError

PROTOCOL_VERSION = 1
_TOKEN_SPAN_RE = re.compile(r"[0-9A-Za-z]+")


@dataclass(frozen=True)
class RerankConfig:
    query_field: str = "question"
    doc_fields: FieldSelector = field(default_factory=lambda: FieldSelector(True, True, False))
    max_passage_tokens: int = 400
    aggregation: str = "max"
    batch_size: int = 64

    def __post_init__(self):
        if self.max_passage_tokens < 16:
            raise ValueError("max_passage_tokens must be >= 16")
        if self.aggregation not in ("max", "mean"):
            raise ValueError("aggregation must be 'max' or 'mean'")
        if self.query_field not in ("query", "question", "narrative"):
            raise ValueError("query_field must be query, question, or narrative")


def split_passages(doc_text, max_passage_tokens):
    """Split into ceil(n/max) contiguous passages whose token counts
    differ by at most one. Token boundaries come from the primary
    tokenizer; the original text between them is preserved."""
    if max_passage_tokens < 16:
        raise ValueError("max_passage_tokens must be >= 16")
    spans = [m.span() for m in _TOKEN_SPAN_RE.finditer(doc_text)]
    n = len(spans)
    if n == 0:
        return [""]
    if n <= max_passage_tokens:
        return [doc_text]
    pieces = math.ceil(n / max_passage_tokens)
    base, rem = divmod(n, pieces)
    sizes = [base + 1] * rem + [base] * (pieces - rem)
    passages = []
    start = 0
    for size in sizes:
        first, last = spans[start], spans[start + size - 1]
        passages.append(doc_text[first[0]:last[1]])
        start += size
    return passages


# -- scorer clients -----------------------------------------------------------


class FirstStageEchoClient:
    """Test double: echoes each candidate's first-stage score, so
    re-ranking reproduces the first-stage order exactly."""

    def score_batch(self, requests):
        return [{"id": r["id"], "score": r["first_stage_score"]} for r in requests]

    def close(self):
        pass


class CallableScorerClient:
    """Adapter for an in-process (query, passage) -> score callable."""

    def __init__(self, fn):
        self.fn = fn

    def score_batch(self, requests):
        return [{"id": r["id"], "score": float(self.fn(r["query"], r["passage"]))}
                for r in requests]

    def close(self):
        pass


class WireScorerClient:
    """NDJSON client for an external scorer.

    endpoint: "host:port" for TCP, or "exec:<command line>" to spawn a
    subprocess speaking the protocol on stdin/stdout. Transient transport
    failures are retried up to `retries` times with exponential backoff.
    """

    def __init__(self, endpoint, retries=3, backoff=0.25, timeout=60.0):
        self.endpoint = endpoint
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._proc = None
        self._reader = None
        self._writer = None
        self._connect()

    def _connect(self):
        if self.endpoint.startswith("exec:"):
            cmd = self.endpoint[len("exec:"):]
            self._proc = subprocess.Popen(
                cmd, shell=True, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
            self._reader = self._proc.stdout
            self._writer = self._proc.stdin
        else:
            host, _, port = self.endpoint.rpartition(":")
            if not host or not port.isdigit():
                raise ScorerError(f"bad scorer endpoint {self.endpoint!r}; "
                                  "expected host:port or exec:<command>")
            try:
                sock = socket.create_connection((host, int(port)),
                                                timeout=self.timeout)
            except OSError as exc:
                raise ScorerError(f"cannot connect to scorer at "
                                  f"{self.endpoint}: {exc}") from exc
            self._sock = sock
            self._reader = sock.makefile("r", encoding="utf-8", newline="\n")
            self._writer = sock.makefile("w", encoding="utf-8", newline="\n")
        handshake = self._read_record()
        if handshake.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError(f"bad scorer handshake: {handshake!r}")

    def _read_record(self):
        line = self._reader.readline()
        if not line:
            raise ScorerError("scorer closed the connection")
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed scorer record: {line!r}") from exc
        if not isinstance(record, dict):
            raise ProtocolError(f"scorer record is not an object: {line!r}")
        return record

    def score_batch(self, requests):
        attempt = 0
        while True:
            try:
                return self._score_once(requests)
            except (ScorerError, OSError) as exc:
                if isinstance(exc, ProtocolError) or attempt >= self.retries:
                    raise
                attempt += 1
                time.sleep(self.backoff * (2 ** (attempt - 1)))
                self.close()
                self._connect()

    def _score_once(self, requests):
        for r in requests:
            wire = {"id": r["id"], "query": r["query"], "passage": r["passage"]}
            self._writer.write(json.dumps(wire) + "\n")
        self._writer.flush()
        pending = {r["id"] for r in requests}
        by_id = {}
        while pending:
            record = self._read_record()
            if "error" in record:
                raise ProtocolError(f"scorer error for id {record.get('id')}: "
                                    f"{record['error']}")
            rid = record.get("id")
            if rid not in pending:
                raise ProtocolError(f"scorer response for unknown id {rid!r}")
            score = record.get("score")
            if not isinstance(score, (int, float)) or not math.isfinite(score):
                raise ProtocolError(f"non-finite or missing score for id {rid}")
            by_id[rid] = float(score)
            pending.discard(rid)
        return [{"id": r["id"], "score": by_id[r["id"]]} for r in requests]

    def close(self):
        for stream in (self._writer, self._reader):
            try:
                if stream:
                    stream.close()
            except OSError:
                pass
        if self._proc:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
            self._proc = None
        sock = getattr(self, "_sock", None)
        if sock:
            sock.close()
            self._sock = None


def score_batch(scorer_client, requests, batch_size=64):
    """Score requests in order, chunked to the batch size. One response
    per request, in request order."""
    responses = []
    for start in range(0, len(requests), batch_size):
        chunk = requests[start:start + batch_size]
        out = scorer_client.score_batch(chunk)
        got = {r["id"]: r for r in out}
        missing = [r["id"] for r in chunk if r["id"] not in got]
        if missing:
            raise ProtocolError(f"scorer responses missing id(s): {missing}")
        for r in chunk:
            score = got[r["id"]]["score"]
            if not math.isfinite(score):
                raise ProtocolError(f"non-finite score for id {r['id']}")
            responses.append(got[r["id"]])
    return responses


def rerank(candidates, topic, config, scorer_client, documents):
    """Re-rank first-stage candidates with the external scorer.

    Returns (doc_id, aggregated_score) pairs: aggregated score
    descending, ties by first-stage score descending then doc_id. The
    output is always a permutation of the candidate set.
    """
    query_text = topic.field(config.query_field)
    requests = []
    next_id = 0
    passages_per_doc = {}
    for cand in candidates:
        doc = documents[cand.doc_id]
        passages = split_passages(concat_fields(doc, config.doc_fields),
                                  config.max_passage_tokens)
        passages_per_doc[cand.doc_id] = []
        for passage in passages:
            requests.append({
                "id": next_id,
                "query": query_text,
                "passage": passage,
                "doc_id": cand.doc_id,
                "first_stage_score": cand.score,
            })
            passages_per_doc[cand.doc_id].append(next_id)
            next_id += 1

    responses = score_batch(scorer_client, requests, config.batch_size)
    score_by_id = {r["id"]: r["score"] for r in responses}

    first_stage = {c.doc_id: c.score for c in candidates}
    aggregated = {}
    for doc_id, ids in passages_per_doc.items():
        scores = [score_by_id[i] for i in ids]
        aggregated[doc_id] = max(scores) if config.aggregation == "max" else (
            sum(scores) / len(scores))

    ordered = sorted(aggregated.items(),
                     key=lambda kv: (-kv[1], -first_stage[kv[0]], kv[0]))
    return ordered
