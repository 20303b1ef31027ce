"""Adapter for estimators living in a separate process.

Wire format: one JSON object per line over the child's stdin/stdout.

    -> {"cmd": "hello", "version": 1}            <- {"ok": true, "name": ...}
    -> {"cmd": "fit", "train": {...}, "val": {...}, "seed": u64, "hyperparams": {...}}
                                                 <- {"ok": true} | {"ok": false, "error": str}
    -> {"cmd": "predict", "x": [[...]], "t": [...], "d": [...]}
                                                 <- {"ok": true, "y": [...]}
    -> {"cmd": "shutdown"}                       (child exits 0)

Interventions travel as 0-based indices.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading

import numpy as np

from .base import Family, FitError, Rows

PROTOCOL_VERSION = 1
PREDICT_BATCH = 4096


class ExternalEstimatorError(FitError):
    pass


def rows_payload(rows: Rows, with_y: bool = True) -> dict:
    out = {"x": rows.x.tolist(), "t": [int(v) for v in rows.t], "d": [float(v) for v in rows.d]}
    if with_y:
        out["y"] = [float(v) for v in rows.y]
    return out


class ExternalProcess:
    """One child process speaking the line protocol."""

    def __init__(self, command, timeout: float = 60.0):
        self.command = list(command)
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                text=True, bufsize=1,
            )
        except OSError as exc:
            raise ExternalEstimatorError(f"cannot start external estimator {self.command}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        self._stderr: list[str] = []
        threading.Thread(target=self._pump_stdout, daemon=True).start()
        threading.Thread(target=self._pump_stderr, daemon=True).start()

    def _pump_stdout(self):
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _pump_stderr(self):
        for line in self.proc.stderr:
            if len(self._stderr) < 200:
                self._stderr.append(line)

    def stderr_tail(self) -> str:
        return "".join(self._stderr[-20:]).strip()

    def _died(self, context: str) -> ExternalEstimatorError:
        try:
            code = self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            code = None
        msg = f"external estimator exited with code {code} during {context}"
        tail = self.stderr_tail()
        if tail:
            msg += f"; stderr: {tail}"
        return ExternalEstimatorError(msg, {"exit_code": code, "stderr": tail})

    def request(self, message: dict, timeout: float | None = None) -> dict:
        context = message.get("cmd", "?")
        try:
            self.proc.stdin.write(json.dumps(message) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise self._died(context) from None
        try:
            line = self._lines.get(timeout=self.timeout if timeout is None else timeout)
        except queue.Empty:
            self.kill()
            raise ExternalEstimatorError(f"external estimator timed out during {context}") from None
        if line is None:
            raise self._died(context)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            self.kill()
            raise ExternalEstimatorError(f"malformed reply during {context}: {line[:200]!r}") from None
        if not isinstance(reply, dict) or "ok" not in reply:
            self.kill()
            raise ExternalEstimatorError(f"malformed reply during {context}: {line[:200]!r}")
        if not reply["ok"]:
            raise ExternalEstimatorError(f"external estimator failed during {context}: {reply.get('error', '')}")
        return reply

    def shutdown(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.write(json.dumps({"cmd": "shutdown"}) + "\n")
                self.proc.stdin.flush()
                self.proc.wait(timeout=10)
            except (OSError, subprocess.TimeoutExpired):
                self.kill()

    def kill(self):
        if self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()


class ExternalEstimator(Family):
    """Proxy model whose fit and predict run in a child process."""

    family = "external"

    def __init__(self, command, timeout: float = 60.0, seed: int = 0, **hyperparams):
        self.command = tuple(command)
        self.timeout = float(timeout)
        self.seed = int(seed)
        self.hp = dict(hyperparams)
        self.meta = {}
        self.process: ExternalProcess | None = None

    def _fit(self, train, val, rng):
        self.process = ExternalProcess(self.command, self.timeout)
        hello = self.process.request({"cmd": "hello", "version": PROTOCOL_VERSION})
        self.meta["name"] = hello.get("name")
        message = {
            "cmd": "fit",
            "train": rows_payload(train),
            "val": rows_payload(val) if val is not None else None,
            "seed": self.seed,
            "hyperparams": self.hp,
        }
        try:
            self.process.request(message)
        except ExternalEstimatorError:
            self.close()
            raise

    def _predict(self, rows: Rows):
        if self.process is None:
            raise ExternalEstimatorError("external estimator used before fit")
        out = np.empty(len(rows))
        for s in range(0, max(len(rows), 1), PREDICT_BATCH):
            part = rows.subset(slice(s, s + PREDICT_BATCH))
            reply = self.process.request({"cmd": "predict", **rows_payload(part, with_y=False)})
            y = reply.get("y")
            if not isinstance(y, list) or len(y) != len(part):
                raise ExternalEstimatorError(f"predict reply has {len(y) if isinstance(y, list) else '?'} values for {len(part)} rows")
            out[s:s + len(part)] = np.asarray(y, dtype=float)
        return out

    def close(self):
        if self.process is not None:
            self.process.shutdown()
            self.process = None

    def __getstate__(self):
        raise TypeError("external estimator proxies cannot be pickled")
