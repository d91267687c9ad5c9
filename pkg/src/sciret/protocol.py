"""Scorer wire-protocol conformance checks.

`verify_scorer_command` drives any stdio scorer implementation through
the protocol: handshake, id-matched batch responses, and error-record
recovery after a malformed request line. Used by the package's own tests
and by external scorer implementations to certify compatibility.
"""

import json
import math
import subprocess

from .rerank import PROTOCOL_VERSION


class ProtocolViolation(AssertionError):
    pass


def _read_record(stdout):
    line = stdout.readline()
    if not line:
        raise ProtocolViolation("scorer closed its output stream")
    try:
        record = json.loads(line)
    except json.JSONDecodeError:
        raise ProtocolViolation(f"scorer emitted a non-JSON line: {line!r}") from None
    if not isinstance(record, dict):
        raise ProtocolViolation(f"scorer record is not an object: {line!r}")
    return record


def verify_scorer_command(cmd, timeout=120):
    """Run the conformance suite against a stdio scorer command.

    Raises ProtocolViolation on the first failed check. Returns the
    scores observed for the id-matching check (useful for extra
    assertions by the caller).
    """
    proc = subprocess.Popen(cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                            text=True, bufsize=1)
    try:
        handshake = _read_record(proc.stdout)
        if handshake.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolViolation(f"bad handshake: {handshake!r}")

        # id-matched batch, ids deliberately not 0-based or ordered
        requests = [
            {"id": 7, "query": "effect of temperature", "passage": "a passage"},
            {"id": 3, "query": "effect of temperature", "passage": "another passage"},
        ]
        for r in requests:
            proc.stdin.write(json.dumps(r) + "\n")
        proc.stdin.flush()
        scores = {}
        for _ in requests:
            record = _read_record(proc.stdout)
            if "error" in record:
                raise ProtocolViolation(f"unexpected error record: {record!r}")
            rid = record.get("id")
            if rid not in {7, 3} or rid in scores:
                raise ProtocolViolation(f"bad or duplicate response id: {record!r}")
            score = record.get("score")
            if not isinstance(score, (int, float)) or not math.isfinite(score):
                raise ProtocolViolation(f"non-finite score: {record!r}")
            scores[rid] = float(score)

        # malformed request -> error record, process keeps serving
        proc.stdin.write("this is not json\n")
        proc.stdin.flush()
        record = _read_record(proc.stdout)
        if "error" not in record:
            raise ProtocolViolation(
                f"expected an error record after malformed input, got {record!r}")
        proc.stdin.write(json.dumps({"id": 9, "query": "q", "passage": "p"}) + "\n")
        proc.stdin.flush()
        record = _read_record(proc.stdout)
        if record.get("id") != 9 or "error" in record:
            raise ProtocolViolation(
                f"scorer did not recover after malformed input: {record!r}")

        # determinism: the same request twice scores identically
        for _ in range(2):
            proc.stdin.write(json.dumps({"id": 11, "query": "same", "passage": "pair"}) + "\n")
            proc.stdin.flush()
        first = _read_record(proc.stdout)
        second = _read_record(proc.stdout)
        if first.get("score") != second.get("score"):
            raise ProtocolViolation(
                f"scorer is not deterministic: {first!r} vs {second!r}")
        return scores
    finally:
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            proc.kill()
