"""Independent brute-force references used by the tests."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def dist_matrix(inst) -> np.ndarray:
    xy = np.asarray(inst.coords, dtype=float)
    n = len(xy)
    out = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            out[i, j] = int(np.floor(np.hypot(*(xy[i] - xy[j])) + 0.5))
    return out


def route_cost(D, route) -> int:
    if not route:
        return 0
    seq = [0, *route, 0]
    return int(sum(D[a, b] for a, b in zip(seq, seq[1:])))


def routes_cost(D, routes) -> int:
    return sum(route_cost(D, r) for r in routes)


def edge_multiset(routes) -> list[tuple[int, int]]:
    out = []
    for r in routes:
        if not r:
            continue
        seq = [0, *r, 0]
        out += [tuple(sorted(e)) for e in zip(seq, seq[1:])]
    return out


def edge_distance(a, b) -> int:
    from collections import Counter

    ca, cb = Counter(edge_multiset(a)), Counter(edge_multiset(b))
    return sum(((ca - cb) + (cb - ca)).values())


def cvrp_optimum(inst) -> int:
    """Exact optimum by subset DP: every feasible customer subset is a route
    whose cost is the best of all orderings."""
    D = dist_matrix(inst)
    q = np.asarray(inst.demands)
    cust = list(range(1, inst.n))
    m = len(cust)

    # Held-Karp over all customers: path[mask][i] = cheapest depot -> ... -> cust[i] covering mask
    INF = float("inf")
    path = [[INF] * m for _ in range(1 << m)]
    for i in range(m):
        path[1 << i][i] = D[0, cust[i]]
    for mask in range(1, 1 << m):
        for i in range(m):
            c = path[mask][i]
            if c == INF:
                continue
            for j in range(m):
                if not mask >> j & 1:
                    nm = mask | 1 << j
                    path[nm][j] = min(path[nm][j], c + D[cust[i], cust[j]])

    def tsp(mask: int) -> int:
        return int(min(path[mask][i] + D[cust[i], 0] for i in range(m) if mask >> i & 1))

    full = (1 << m) - 1
    load = [sum(int(q[cust[i]]) for i in range(m) if s >> i & 1) for s in range(full + 1)]

    @lru_cache(maxsize=None)
    def part(mask: int) -> int:
        if mask == 0:
            return 0
        low = mask & -mask
        rest = mask ^ low
        best = None
        sub = rest
        while True:
            t = sub | low
            if load[t] <= inst.capacity:
                c = tsp(t) + part(mask ^ t)
                best = c if best is None else min(best, c)
            if sub == 0:
                break
            sub = (sub - 1) & rest
        return best

    return part(full)


# ------------------------------------------------------------------ neighborhoods over route lists


def _feasible(routes, q, cap) -> bool:
    return all(sum(int(q[v]) for v in r) <= cap for r in routes)


def neighborhood(routes, kind: str):
    """Every route list reachable by one move of `kind`."""
    R = len(routes)
    if kind == "inter-shift":
        for a in range(R):
            for i, v in enumerate(routes[a]):
                for b in range(R):
                    if b == a:
                        continue
                    for p in range(len(routes[b]) + 1):
                        new = [list(r) for r in routes]
                        del new[a][i]
                        new[b].insert(p, v)
                        yield new
    elif kind == "swap-star":
        for a in range(R):
            for b in range(a + 1, R):
                for i, v in enumerate(routes[a]):
                    for j, w in enumerate(routes[b]):
                        ra = routes[a][:i] + routes[a][i + 1:]
                        rb = routes[b][:j] + routes[b][j + 1:]
                        for pa in range(len(ra) + 1):
                            for pb in range(len(rb) + 1):
                                new = [list(r) for r in routes]
                                new[a] = ra[:pa] + [w] + ra[pa:]
                                new[b] = rb[:pb] + [v] + rb[pb:]
                                yield new
    elif kind == "two-opt-star":
        for a in range(R):
            for b in range(a + 1, R):
                A, B = routes[a], routes[b]
                for i in range(len(A) + 1):
                    for j in range(len(B) + 1):
                        new = [list(r) for r in routes]
                        new[a] = A[:i] + B[j:]
                        new[b] = B[:j] + A[i:]
                        yield new
    elif kind == "intra-shift":
        for a in range(R):
            r = routes[a]
            for i in range(len(r)):
                rest = r[:i] + r[i + 1:]
                for p in range(len(rest) + 1):
                    new = [list(x) for x in routes]
                    new[a] = rest[:p] + [r[i]] + rest[p:]
                    yield new
    elif kind == "intra-swap":
        for a in range(R):
            r = routes[a]
            for i in range(len(r)):
                for j in range(i + 1, len(r)):
                    new = [list(x) for x in routes]
                    new[a][i], new[a][j] = new[a][j], new[a][i]
                    yield new
    elif kind == "intra-two-opt":
        for a in range(R):
            r = routes[a]
            for i in range(len(r)):
                for j in range(i + 1, len(r)):
                    new = [list(x) for x in routes]
                    new[a] = r[:i] + r[i:j + 1][::-1] + r[j + 1:]
                    yield new
    else:
        raise ValueError(kind)


def best_neighbor_delta(inst, routes, kind: str):
    """Most negative cost change over capacity-feasible neighbors, or None."""
    D = dist_matrix(inst)
    base = routes_cost(D, routes)
    best = None
    for new in neighborhood(routes, kind):
        if not _feasible(new, inst.demands, inst.capacity):
            continue
        d = routes_cost(D, new) - base
        if d < 0 and (best is None or d < best):
            best = d
    return best


def cheapest_slot(inst, routes, v):
    """(increment, route index, position) of the cheapest capacity-feasible insertion of v."""
    D = dist_matrix(inst)
    best = None
    for a, r in enumerate(routes):
        if sum(int(inst.demands[u]) for u in r) + int(inst.demands[v]) > inst.capacity:
            continue
        for p in range(len(r) + 1):
            inc = route_cost(D, r[:p] + [v] + r[p:]) - route_cost(D, r)
            if best is None or inc < best[0]:
                best = (inc, a, p)
    return best
