"""Reference external estimator speaking the line protocol (stdlib only).

    python -m cadrbench.estimators.reference_server --mode mean
    python -m cadrbench.estimators.reference_server --mode constant --value 0

``--crash-at`` makes the process exit with status 3 on the given command,
which the test-suite uses to exercise failure handling.
"""

import argparse
import json
import statistics
import sys


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--mode", choices=("constant", "mean"), default="constant")
    ap.add_argument("--value", type=float, default=0.0)
    ap.add_argument("--crash-at", choices=("hello", "fit", "predict"), default=None)
    args = ap.parse_args(argv)
    level = args.value

    def emit(obj):
        sys.stdout.write(json.dumps(obj) + "\n")
        sys.stdout.flush()

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            emit({"ok": False, "error": f"bad json: {exc}"})
            continue
        cmd = msg.get("cmd")
        if cmd == args.crash_at:
            print(f"crashing on purpose during {cmd}", file=sys.stderr)
            sys.exit(3)
        if cmd == "hello":
            emit({"ok": True, "name": f"reference-{args.mode}"})
        elif cmd == "fit":
            ys = msg["train"]["y"]
            if args.mode == "mean":
                level = statistics.fmean(ys) if ys else 0.0
            emit({"ok": True})
        elif cmd == "predict":
            emit({"ok": True, "y": [level] * len(msg["d"])})
        elif cmd == "shutdown":
            return 0
        else:
            emit({"ok": False, "error": f"unknown command {cmd!r}"})
    return 0


if __name__ == "__main__":
    sys.exit(main())
