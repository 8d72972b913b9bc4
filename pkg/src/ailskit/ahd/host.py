"""Child-process host for candidate ruin heuristics.

Usage: python3 -m ailskit.ahd.host <candidate.py>

The candidate file must define `select_nodes(ctx)`. After loading it the host
prints {"ready": true}. Each input line is a JSON request; each output line
is {"selected": [...], "elapsed": seconds} or {"error": "..."}.

Request fields: n, coords, demands, knn, next, prev, inRoute, numberSelect,
average_nodes, seed. Optionally `instance`: an opaque token; when a request
repeats the token of an earlier one, coords/demands/knn may be omitted and
the cached copies are reused.
"""

from __future__ import annotations

import json
import runpy
import sys
import time
import traceback

import numpy as np

from ..instance import DistanceOracle
from ..ruin import RuinContext


class _InstanceCache:
    def __init__(self):
        self.token = None
        self.coords = None
        self.demands = None
        self.knn = None
        self.oracle = None

    def update(self, req: dict) -> None:
        token = req.get("instance")
        if "coords" in req:
            coords = np.asarray(req["coords"], dtype=np.float64).reshape(-1, 2)
            if self.coords is None or coords.shape != self.coords.shape or not np.array_equal(coords, self.coords):
                self.coords = coords
                self.oracle = DistanceOracle(coords)
            self.demands = np.asarray(req["demands"], dtype=np.int64)
            self.knn = np.asarray(req["knn"], dtype=np.int32)
            self.token = token
        elif token is None or token != self.token:
            raise ValueError("request omits instance data that was never sent")


def build_context(req: dict, cache: _InstanceCache) -> RuinContext:
    cache.update(req)
    n = int(req["n"])
    if cache.coords.shape[0] != n:
        raise ValueError("n does not match the instance data")
    return RuinContext(
        dist=cache.oracle,
        knn=cache.knn,
        coords=cache.coords,
        next=np.asarray(req["next"], dtype=np.int64),
        prev=np.asarray(req["prev"], dtype=np.int64),
        in_route=np.asarray(req["inRoute"], dtype=bool),
        demand=cache.demands,
        number_select=int(req["numberSelect"]),
        average_nodes=float(req["average_nodes"]),
        seed=int(req["seed"]),
    )


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def _plain(x):
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.integer, int)):
        return int(x)
    return x


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python3 -m ailskit.ahd.host <candidate.py>", file=sys.stderr)
        return 2
    # candidates print at their peril: keep the protocol channel private
    out = sys.stdout
    sys.stdout = sys.stderr
    try:
        ns = runpy.run_path(argv[0], run_name="candidate")
        fn = ns.get("select_nodes")
        if not callable(fn):
            raise AttributeError("candidate defines no select_nodes(ctx)")
    except Exception as exc:
        sys.stdout = out
        _emit({"ready": False, "error": f"load failed: {exc!r}"})
        return 1
    sys.stdout = out
    _emit({"ready": True})
    cache = _InstanceCache()
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            ctx = build_context(req, cache)
        except Exception as exc:
            _emit({"error": f"bad request: {exc!r}"})
            continue
        t0 = time.perf_counter()
        sys.stdout = sys.stderr
        try:
            selected = fn(ctx)
            payload = {"selected": _plain(list(selected))}
        except Exception:
            payload = {"error": "candidate raised: " + traceback.format_exc(limit=3)}
        finally:
            sys.stdout = out
        payload["elapsed"] = time.perf_counter() - t0
        try:
            _emit(payload)
        except (TypeError, ValueError) as exc:
            _emit({"error": f"unserializable output: {exc!r}"})
    return 0


if __name__ == "__main__":
    sys.exit(main())
