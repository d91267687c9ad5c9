"""Constant-score stdio scorer, a wire-protocol test double.

Usage: python -m sciret.echo_scorer [--score 0.5]

Emits the handshake, then answers every request with the fixed score.
Malformed lines get an error record and the process keeps serving.
"""

import argparse
import json
import sys


def serve(stdin=None, stdout=None, score=0.5):
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stdout.write(json.dumps({"protocol": 1}) + "\n")
    stdout.flush()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            rid = request["id"]
        except (json.JSONDecodeError, TypeError, KeyError):
            stdout.write(json.dumps({"id": None, "error": "malformed request"}) + "\n")
            stdout.flush()
            continue
        stdout.write(json.dumps({"id": rid, "score": score}) + "\n")
        stdout.flush()


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--score", type=float, default=0.5)
    args = parser.parse_args(argv)
    serve(score=args.score)


if __name__ == "__main__":
    main()
