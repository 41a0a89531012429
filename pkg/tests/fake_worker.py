"""Scriptable stand-in worker for exercising the protocol client."""

import argparse
import json
import sys
import time


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--mode", default="normal",
                        choices=["normal", "bad-accuracy", "malformed", "error",
                                 "crash-after-one", "slow", "batch-reversed"])
    args = parser.parse_args()

    buffered = []
    for line in sys.stdin:
        req = json.loads(line)
        rid = req["id"]
        if args.mode == "normal":
            acc = (sum(req["params"]) % 97) / 97.0
            print(json.dumps({"id": rid, "accuracy": acc}), flush=True)
        elif args.mode == "bad-accuracy":
            print(json.dumps({"id": rid, "accuracy": 1.5}), flush=True)
        elif args.mode == "malformed":
            print("this is not json", flush=True)
        elif args.mode == "error":
            print(json.dumps({"id": rid, "error": "synthetic failure"}), flush=True)
        elif args.mode == "crash-after-one":
            print(json.dumps({"id": rid, "accuracy": 0.5}), flush=True)
            sys.exit(3)
        elif args.mode == "slow":
            time.sleep(5.0)
            print(json.dumps({"id": rid, "accuracy": 0.5}), flush=True)
        elif args.mode == "batch-reversed":
            # Hold replies and emit them newest-first to prove order freedom.
            buffered.append(rid)
            if len(buffered) == 3:
                for held in reversed(buffered):
                    print(json.dumps({"id": held, "accuracy": held / 100.0}), flush=True)
                buffered.clear()


if __name__ == "__main__":
    main()
