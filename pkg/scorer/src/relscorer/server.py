"""Line-based JSON scorer service.

Protocol (newline-delimited JSON, protocol version 1):

    handshake (server -> client, once):  {"protocol": 1}
    request   (client -> server):        {"id": ..., "query": str, "passage": str}
    response  (server -> client):        {"id": ..., "score": float}

A malformed request line yields {"id": null, "error": "..."} (or the
request's id when it can be recovered) and the server keeps serving.
Scores are deterministic: the model runs in inference mode with no
dropout.

By default the server speaks on stdin/stdout; ``--endpoint host:port``
listens on TCP instead, handling one connection at a time.
"""

import argparse
import json
import socket
import sys

from . import model as modelmod
from . import training

PROTOCOL_VERSION = 1


def _response_for_line(line, score_fn):
    """One response record for one raw request line."""
    try:
        record = json.loads(line)
        if not isinstance(record, dict):
            raise ValueError("request is not an object")
    except (json.JSONDecodeError, ValueError) as exc:
        return {"id": None, "error": f"malformed request: {exc}"}
    request_id = record.get("id")
    try:
        query = record["query"]
        passage = record["passage"]
        if not isinstance(query, str) or not isinstance(passage, str):
            raise TypeError("query and passage must be strings")
    except (KeyError, TypeError) as exc:
        return {"id": request_id, "error": f"bad request fields: {exc}"}
    return {"id": request_id, "score": float(score_fn(query, passage))}


def serve_streams(reader, writer, score_fn):
    """Drive the protocol over a (reader, writer) text-stream pair."""
    writer.write(json.dumps({"protocol": PROTOCOL_VERSION}) + "\n")
    writer.flush()
    for line in reader:
        if not line.strip():
            continue
        writer.write(json.dumps(_response_for_line(line, score_fn)) + "\n")
        writer.flush()


def serve_tcp(host, port, score_fn):
    """Accept connections one at a time, each speaking the protocol."""
    with socket.create_server((host, port)) as server:
        print(f"listening on {host}:{server.getsockname()[1]}",
              file=sys.stderr, flush=True)
        while True:
            conn, _ = server.accept()
            with conn:
                reader = conn.makefile("r", encoding="utf-8", newline="\n")
                writer = conn.makefile("w", encoding="utf-8", newline="\n")
                try:
                    serve_streams(reader, writer, score_fn)
                except (BrokenPipeError, ConnectionResetError):
                    pass


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Cross-encoder relevance scorer service.")
    parser.add_argument("--model", default="tiny",
                        help="Model identifier: 'tiny' or a checkpoint path.")
    parser.add_argument("--echo", action="store_true",
                        help="Constant-0.5 test double instead of a model.")
    parser.add_argument("--endpoint", default=None,
                        help="host:port to listen on (default: stdio).")
    parser.add_argument("--train", metavar="PAIRS_FILE", default=None,
                        help="Train on a JSONL pairs file before serving; "
                             "with --save, write the checkpoint and exit.")
    parser.add_argument("--lr", type=float, default=2e-5)
    parser.add_argument("--steps", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--save", metavar="CHECKPOINT", default=None,
                        help="Write the (trained) model here and exit.")
    args = parser.parse_args(argv)

    if args.echo:
        score_fn = lambda query, passage: 0.5
    else:
        try:
            model = modelmod.build_model(args.model, seed=args.seed)
        except ValueError as exc:
            parser.error(str(exc))
        if args.train:
            pairs = training.read_pairs_file(args.train)
            report = training.train(model, pairs, learning_rate=args.lr,
                                    steps=args.steps, seed=args.seed)
            print(f"trained {args.steps} epoch(s) on {len(pairs)} pairs: "
                  f"loss {report.initial_loss:.4f} -> {report.final_loss:.4f}",
                  file=sys.stderr, flush=True)
        if args.save:
            modelmod.save_model(model, args.save)
            print(f"saved {args.save}", file=sys.stderr)
            return 0
        score_fn = lambda query, passage: modelmod.score(model, query, passage)

    if args.endpoint:
        host, _, port = args.endpoint.rpartition(":")
        if not host or not port.isdigit():
            parser.error(f"bad --endpoint {args.endpoint!r}; expected host:port")
        serve_tcp(host, int(port), score_fn)
    else:
        serve_streams(sys.stdin, sys.stdout, score_fn)
    return 0


if __name__ == "__main__":
    sys.exit(main())
