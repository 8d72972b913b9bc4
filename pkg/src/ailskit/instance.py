"""CVRPLib instance and solution I/O, rounded Euclidean distances, K-nearest lists."""

from __future__ import annotations

import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_K = 100
# Above this many nodes the full matrix is not materialized.
MATRIX_THRESHOLD = 5000


class InstanceParseError(ValueError):
    """Base class for malformed instance files. Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class MalformedHeaderError(InstanceParseError):
    pass


class MissingSectionError(InstanceParseError):
    pass


class DemandExceedsCapacityError(InstanceParseError):
    pass


class UnsupportedInstanceError(InstanceParseError):
    pass


class SolutionParseError(ValueError):
    pass


class CostMismatchWarning(UserWarning):
    pass


def euclidean_distance(a, b) -> int:
    """Euclidean norm rounded to the nearest integer, halves away from zero."""
    dx = float(a[0]) - float(b[0])
    dy = float(a[1]) - float(b[1])
    return int(math.floor(math.sqrt(dx * dx + dy * dy) + 0.5))


def _rounded_norm(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return np.floor(np.sqrt(dx * dx + dy * dy) + 0.5).astype(np.int64)


class DistanceOracle:
    """Symmetric integer distances. Full int32 matrix for small instances,
    computed from coordinates on demand otherwise."""

    def __init__(self, coords: np.ndarray, threshold: int = MATRIX_THRESHOLD):
        self.coords = np.ascontiguousarray(coords, dtype=np.float64)
        self.n = len(self.coords)
        self.matrix: np.ndarray | None = None
        if self.n <= threshold:
            x = self.coords[:, 0]
            y = self.coords[:, 1]
            self.matrix = _rounded_norm(x[:, None] - x[None, :], y[:, None] - y[None, :]).astype(np.int32)

    def __call__(self, i: int, j: int) -> int:
        if self.matrix is not None:
            return int(self.matrix[i, j])
        return euclidean_distance(self.coords[i], self.coords[j])

    def row(self, i: int) -> np.ndarray:
        """Distances from node i to every node, as an int64 array."""
        if self.matrix is not None:
            return self.matrix[i].astype(np.int64)
        c = self.coords
        return _rounded_norm(c[:, 0] - c[i, 0], c[:, 1] - c[i, 1])

    @property
    def kernel_matrix(self) -> np.ndarray:
        # compiled kernels take an empty matrix as "compute from coordinates"
        if self.matrix is not None:
            return self.matrix
        return np.zeros((0, 0), dtype=np.int32)


@dataclass(frozen=True)
class NeighborLists:
    """lists[i] holds the K nearest other nodes of i, ascending by distance, ties by index."""

    lists: np.ndarray

    @property
    def k(self) -> int:
        return self.lists.shape[1]

    def __getitem__(self, i: int) -> np.ndarray:
        return self.lists[i]


def build_knn(inst: "Instance", oracle: DistanceOracle | None = None, k: int | None = None) -> NeighborLists:
    oracle = oracle or inst.dist
    n = inst.n
    k = min(k or DEFAULT_K, n - 1)
    out = np.empty((n, k), dtype=np.int32)
    if oracle.matrix is not None:
        chunk = 256
        for start in range(0, n, chunk):
            rows = oracle.matrix[start:start + chunk]
            order = np.argsort(rows, axis=1, kind="stable")
            for r in range(rows.shape[0]):
                i = start + r
                o = order[r]
                out[i] = o[o != i][:k]
        return NeighborLists(out)

    from scipy.spatial import cKDTree

    tree = cKDTree(oracle.coords)
    _, cand = tree.query(oracle.coords, k=min(n, k + 1))
    for i in range(n):
        row = cand[i][cand[i] != i][:k]
        kth = int(oracle.row(i)[row].max())
        # every node whose rounded distance can tie the k-th lies inside this ball
        ball = np.array(tree.query_ball_point(oracle.coords[i], kth + 0.5), dtype=np.int64)
        ball = ball[ball != i]
        d = _rounded_norm(oracle.coords[ball, 0] - oracle.coords[i, 0], oracle.coords[ball, 1] - oracle.coords[i, 1])
        out[i] = ball[np.lexsort((ball, d))][:k]
    return NeighborLists(out)


@dataclass(frozen=True, eq=False)
class Instance:
    name: str
    coords: np.ndarray
    demands: np.ndarray
    capacity: int
    depot: int = 0
    knn_size: int = DEFAULT_K
    matrix_threshold: int = field(default=MATRIX_THRESHOLD, repr=False)

    def __post_init__(self):
        coords = np.ascontiguousarray(self.coords, dtype=np.float64).reshape(-1, 2)
        demands = np.ascontiguousarray(self.demands, dtype=np.int64)
        coords.setflags(write=False)
        demands.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "demands", demands)
        if len(coords) < 2:
            raise ValueError("an instance needs a depot and at least one customer")
        if len(coords) != len(demands):
            raise ValueError("coords and demands differ in length")
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if demands[0] != 0:
            raise ValueError("depot demand must be 0")
        if (demands < 0).any():
            raise ValueError("demands must be nonnegative")
        if (demands > self.capacity).any():
            raise ValueError("a customer demand exceeds the vehicle capacity")

    @property
    def n(self) -> int:
        return len(self.coords)

    @cached_property
    def dist(self) -> DistanceOracle:
        return DistanceOracle(self.coords, self.matrix_threshold)

    @cached_property
    def knn(self) -> NeighborLists:
        return build_knn(self, self.dist, self.knn_size)

    @property
    def total_demand(self) -> int:
        return int(self.demands.sum())


def min_routes(inst: Instance) -> int:
    return max(1, -(-inst.total_demand // inst.capacity))


_HEADER_KEYS = {"NAME", "COMMENT", "TYPE", "DIMENSION", "CAPACITY", "EDGE_WEIGHT_TYPE"}
_SECTIONS = {"NODE_COORD_SECTION", "DEMAND_SECTION", "DEPOT_SECTION"}


def parse_instance(path, *, knn_size: int = DEFAULT_K, matrix_threshold: int = MATRIX_THRESHOLD) -> Instance:
    """Read a CVRPLib EUC_2D file. The depot is remapped to index 0, the
    remaining nodes keep their file order."""
    path = Path(path)
    header: dict[str, str] = {}
    coords: dict[int, tuple[float, float]] = {}
    demands: dict[int, int] = {}
    demand_lines: dict[int, int] = {}
    depots: list[int] = []
    seen: set[str] = set()
    section = None

    lines = path.read_text().splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        key = line.split(":", 1)[0].strip() if ":" in line else line.split()[0]
        if key in _SECTIONS:
            section = key
            seen.add(key)
            continue
        if ":" in line and key.isupper() and not key[0].isdigit():
            if key in _HEADER_KEYS:
                header[key] = line.split(":", 1)[1].strip().strip('"')
            section = None
            continue
        parts = line.split()
        try:
            if section == "NODE_COORD_SECTION":
                if len(parts) != 3:
                    raise ValueError
                coords[int(parts[0])] = (float(parts[1]), float(parts[2]))
            elif section == "DEMAND_SECTION":
                if len(parts) != 2:
                    raise ValueError
                demands[int(parts[0])] = int(parts[1])
                demand_lines[int(parts[0])] = lineno
            elif section == "DEPOT_SECTION":
                d = int(parts[0])
                if d == -1:
                    section = None
                else:
                    depots.append(d)
            else:
                raise MalformedHeaderError(f"unexpected line {line!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, InstanceParseError):
                raise
            raise MalformedHeaderError(f"cannot parse {line!r} in {section}", lineno) from None

    for key in ("DIMENSION", "CAPACITY"):
        if key not in header:
            raise MalformedHeaderError(f"missing {key}")
    kind = header.get("TYPE", "CVRP")
    if kind != "CVRP":
        raise UnsupportedInstanceError(f"TYPE {kind} is not CVRP", _line_of(lines, "TYPE"))
    ewt = header.get("EDGE_WEIGHT_TYPE", "EUC_2D")
    if ewt != "EUC_2D":
        raise UnsupportedInstanceError(f"EDGE_WEIGHT_TYPE {ewt} is not EUC_2D", _line_of(lines, "EDGE_WEIGHT_TYPE"))
    try:
        dimension = int(header["DIMENSION"])
        capacity = int(header["CAPACITY"])
    except ValueError:
        raise MalformedHeaderError("DIMENSION and CAPACITY must be integers", _line_of(lines, "CAPACITY")) from None
    for sec in ("NODE_COORD_SECTION", "DEMAND_SECTION"):
        if sec not in seen:
            raise MissingSectionError(f"missing {sec}")
    if len(coords) != dimension or len(demands) != dimension or set(coords) != set(demands):
        raise MissingSectionError(
            f"DIMENSION {dimension} but {len(coords)} coordinates and {len(demands)} demands")

    depot = depots[0] if depots else min(coords)
    if depot not in coords:
        raise MalformedHeaderError(f"depot {depot} has no coordinates", _line_of(lines, "DEPOT_SECTION"))
    order = [depot] + sorted(i for i in coords if i != depot)
    for i in order[1:]:
        if demands[i] > capacity:
            raise DemandExceedsCapacityError(f"node {i} demand {demands[i]} exceeds capacity {capacity}", demand_lines[i])
        if demands[i] < 0:
            raise MalformedHeaderError(f"node {i} has negative demand", demand_lines[i])
    dem = np.array([demands[i] for i in order], dtype=np.int64)
    dem[0] = 0
    return Instance(
        name=header.get("NAME", path.stem),
        coords=np.array([coords[i] for i in order], dtype=np.float64),
        demands=dem,
        capacity=capacity,
        knn_size=knn_size,
        matrix_threshold=matrix_threshold,
    )


def _line_of(lines: list[str], key: str) -> int | None:
    for i, line in enumerate(lines, start=1):
        if line.strip().startswith(key):
            return i
    return None


def _fmt_num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def serialize_instance(inst: Instance) -> str:
    """CVRPLib text for inst, depot written as node 1."""
    out = [
        f"NAME : {inst.name}",
        "TYPE : CVRP",
        f"DIMENSION : {inst.n}",
        "EDGE_WEIGHT_TYPE : EUC_2D",
        f"CAPACITY : {inst.capacity}",
        "NODE_COORD_SECTION",
    ]
    out += [f"{i + 1}\t{_fmt_num(x)}\t{_fmt_num(y)}" for i, (x, y) in enumerate(inst.coords)]
    out.append("DEMAND_SECTION")
    out += [f"{i + 1}\t{int(q)}" for i, q in enumerate(inst.demands)]
    out += ["DEPOT_SECTION", "1", "-1", "EOF", ""]
    return "\n".join(out)


@dataclass
class SolutionFile:
    routes: list[list[int]]
    cost: int


def route_list_cost(inst: Instance, routes) -> int:
    total = 0
    for r in routes:
        if not r:
            continue
        total += inst.dist(0, r[0]) + inst.dist(r[-1], 0)
        total += sum(inst.dist(a, b) for a, b in zip(r, r[1:]))
    return total


def parse_solution(path, inst: Instance) -> SolutionFile:
    """Parse a .sol file ("Route #k: ..." lines plus "Cost N"). Customer ids are
    the instance's internal indices (the CVRPLib convention when the depot is node 1)."""
    routes: list[list[int]] = []
    cost = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if line.lower().startswith("route"):
            _, _, body = line.partition(":")
            ids = body.split()
            if not ids:
                raise SolutionParseError(f"line {lineno}: empty route")
            route = []
            for tok in ids:
                v = int(tok)
                if not 1 <= v < inst.n:
                    raise SolutionParseError(f"line {lineno}: unknown node id {v}")
                route.append(v)
            routes.append(route)
        elif line.lower().startswith("cost"):
            cost = int(round(float(line.split()[1])))
    if cost is None:
        raise SolutionParseError("no Cost line")
    visited = [v for r in routes for v in r]
    dup = sorted(v for v, c in Counter(visited).items() if c > 1)
    if dup:
        raise SolutionParseError(f"customers visited more than once: {dup}")
    missing = sorted(set(range(1, inst.n)) - set(visited))
    if missing:
        raise SolutionParseError(f"customers never visited: {missing[:20]}")
    actual = route_list_cost(inst, routes)
    if actual != cost:
        warnings.warn(f"declared cost {cost} differs from recomputed cost {actual}", CostMismatchWarning, stacklevel=2)
    return SolutionFile(routes, cost)


def format_solution(routes, cost: int) -> str:
    lines = [f"Route #{k}: {' '.join(map(str, r))}" for k, r in enumerate((r for r in routes if r), start=1)]
    lines.append(f"Cost {int(cost)}")
    return "\n".join(lines) + "\n"


def write_solution(path, routes, cost: int) -> None:
    Path(path).write_text(format_solution(routes, cost))
