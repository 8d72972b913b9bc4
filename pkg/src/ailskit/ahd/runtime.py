"""Parent side of the candidate stdio protocol."""

from __future__ import annotations

import ast
import json
import math
import os
import queue
import subprocess
import sys
import threading
import time
from pathlib import Path

import numpy as np

from ..ruin import HeuristicFailure, RuinContext, RuinResult, sanitize

ENTRY = "select_nodes"
CAP_PER_1000 = 0.05
STARTUP_TIMEOUT = 20.0
IO_SLACK = 2.0


class CandidateError(HeuristicFailure):
    """A candidate run failed; `reason` is timeout, crash, malformed or contract."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)


def check_source(source: str) -> str | None:
    """Static protocol check. Returns a reason string, or None if conforming."""
    if not source or not source.strip():
        return "empty source"
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        return f"syntax error: {exc.msg} (line {exc.lineno})"
    for node in tree.body:
        if isinstance(node, ast.FunctionDef) and node.name == ENTRY:
            args = node.args
            if len(args.posonlyargs) + len(args.args) < 1 and args.vararg is None:
                return f"{ENTRY} must accept the context argument"
            return None
    return f"no top-level {ENTRY}(ctx) function"


def time_cap(n: int, per_1000: float = CAP_PER_1000) -> float:
    return per_1000 * math.ceil(n / 1000)


def encode_request(ctx: RuinContext, token: str | None, include_static: bool) -> str:
    req = {
        "n": ctx.n,
        "next": ctx.next.tolist(),
        "prev": ctx.prev.tolist(),
        "inRoute": ctx.in_route.astype(bool).tolist(),
        "numberSelect": int(ctx.number_select),
        "average_nodes": float(ctx.average_nodes),
        "seed": int(ctx.seed),
    }
    if token is not None:
        req["instance"] = token
    if include_static:
        req["coords"] = ctx.coords.tolist()
        req["demands"] = np.asarray(ctx.demand).tolist()
        req["knn"] = np.asarray(ctx.knn).tolist()
    return json.dumps(req)


class CandidateRunner:
    """A persistent child process hosting one candidate program.

    `cap` overrides the per-call compute limit; by default it scales with n
    (50 ms per started thousand nodes)."""

    def __init__(self, path, cap: float | None = None, per_1000: float = CAP_PER_1000,
                 io_slack: float = IO_SLACK, python: str | None = None):
        self.path = str(path)
        self.cap = cap
        self.per_1000 = per_1000
        self.io_slack = io_slack
        self.python = python or sys.executable
        self.proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._sent_token = None
        self.calls = 0

    # -- process management -------------------------------------------------

    def start(self) -> None:
        if self.proc is not None:
            return
        env = dict(os.environ)
        src = str(Path(__file__).resolve().parents[2])
        env["PYTHONPATH"] = src + os.pathsep + env.get("PYTHONPATH", "")
        self.proc = subprocess.Popen(
            [self.python, "-m", "ailskit.ahd.host", self.path],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
            text=True, bufsize=1, env=env,
        )
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self.proc, self._lines), daemon=True).start()
        self._sent_token = None
        msg = self._read(STARTUP_TIMEOUT)
        if not msg.get("ready"):
            self.close()
            raise CandidateError("crash", msg.get("error", "host did not start"))

    @staticmethod
    def _pump(proc, lines):
        for line in proc.stdout:
            lines.put(line)
        lines.put(None)

    def _read(self, timeout: float) -> dict:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            self.close()
            raise CandidateError("timeout", f"no response within {timeout:.2f}s") from None
        if line is None:
            self.close()
            raise CandidateError("crash", "candidate process exited")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            self.close()
            raise CandidateError("malformed", line[:200]) from None
        if not isinstance(msg, dict):
            raise CandidateError("malformed", line[:200])
        return msg

    def close(self) -> None:
        if self.proc is None:
            return
        proc, self.proc = self.proc, None
        try:
            proc.kill()
        except OSError:
            pass
        proc.wait()
        for f in (proc.stdin, proc.stdout):
            try:
                f.close()
            except OSError:
                pass

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.close()

    # -- calls ---------------------------------------------------------------

    def raw_select(self, ctx: RuinContext, token: str | None = None) -> list:
        if self.proc is None:
            self.start()
        include = token is None or token != self._sent_token
        line = encode_request(ctx, token, include)
        cap = self.cap if self.cap is not None else time_cap(ctx.n, self.per_1000)
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self.close()
            raise CandidateError("crash", "candidate process is gone") from None
        self._sent_token = token
        t0 = time.perf_counter()
        msg = self._read(cap + self.io_slack)
        self.calls += 1
        if "error" in msg:
            raise CandidateError("crash", str(msg["error"])[:500])
        elapsed = float(msg.get("elapsed", time.perf_counter() - t0))
        if elapsed > cap:
            raise CandidateError("timeout", f"{elapsed:.3f}s exceeds cap {cap:.3f}s")
        sel = msg.get("selected")
        if not isinstance(sel, list):
            raise CandidateError("malformed", "response lacks a selected list")
        return sel

    def select(self, ctx: RuinContext, token: str | None = None) -> RuinResult:
        return sanitize(self.raw_select(ctx, token), ctx)


def run_candidate(source_or_path, ctx: RuinContext, cap: float | None = None) -> RuinResult:
    """One-shot run of a candidate on a single context."""
    text = str(source_or_path)
    is_path = isinstance(source_or_path, Path) or ("\n" not in text and Path(text).is_file())
    path = Path(text)
    tmp = None
    if not is_path:
        import tempfile

        tmp = tempfile.NamedTemporaryFile("w", suffix=".py", delete=False)
        tmp.write(str(source_or_path))
        tmp.close()
        path = Path(tmp.name)
    try:
        with CandidateRunner(path, cap=cap) as runner:
            return runner.select(ctx)
    finally:
        if tmp is not None:
            os.unlink(tmp.name)


class CandidateHeuristic:
    """Adapter so a hosted candidate can drive the engine as a ruin heuristic.

    With strict=True any contract repair (depot, duplicates, unrouted ids,
    wrong count) is a failure instead of being silently fixed."""

    def __init__(self, runner: CandidateRunner, token: str | None = None, strict: bool = True):
        self.runner = runner
        self.token = token
        self.strict = strict
        self.__name__ = f"candidate:{Path(runner.path).name}"

    def __call__(self, ctx: RuinContext):
        raw = self.runner.raw_select(ctx, self.token)
        if self.strict:
            res = sanitize(raw, ctx)
            if res.events:
                raise CandidateError("contract", ", ".join(f"{k}={v}" for k, v in res.events))
        return raw
