#!/usr/bin/env python3
"""Line-delimited JSON predictor used by the protocol tests.

Scores are softmax(W x) with W[k][j] = cos(k + 2 j).

Behaviours:
  ok            answer every request
  wrong-length  answer with D - 1 probabilities per row
  sleep         answer the handshake, then never answer a request in time
  silent        never answer the handshake
  crash         exit with status 7 on the first request
  bad-id        answer with the wrong request id
"""

import argparse
import json
import math
import sys
import time


def probabilities(x, classes):
    scores = [sum(math.cos(k + 2 * j) * v for j, v in enumerate(x)) for k in range(classes)]
    top = max(scores)
    e = [math.exp(s - top) for s in scores]
    total = sum(e)
    return [v / total for v in e]


def send(msg):
    sys.stdout.write(json.dumps(msg) + "\n")
    sys.stdout.flush()


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--features", type=int, default=2)
    p.add_argument("--behavior", default="ok")
    p.add_argument("--sleep", type=float, default=5.0)
    args = p.parse_args()

    print("stub model starting", file=sys.stderr, flush=True)
    for line in sys.stdin:
        msg = json.loads(line)
        if msg["type"] == "hello":
            if args.behavior == "silent":
                time.sleep(args.sleep)
                continue
            send({"type": "hello", "version": 1,
                  "num_classes": args.classes, "num_features": args.features})
        elif msg["type"] == "predict":
            if args.behavior == "crash":
                sys.exit(7)
            if args.behavior == "sleep":
                time.sleep(args.sleep)
            rows = [probabilities(x, args.classes) for x in msg["instances"]]
            if args.behavior == "wrong-length":
                rows = [r[:-1] for r in rows]
            rid = msg["id"] + 1 if args.behavior == "bad-id" else msg["id"]
            send({"type": "prediction", "id": rid, "probabilities": rows})


if __name__ == "__main__":
    main()
