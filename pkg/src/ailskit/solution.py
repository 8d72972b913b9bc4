"""Linked-route CVRP solutions with incremental cost and load bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .instance import Instance, format_solution


class StructuralError(RuntimeError):
    """Link chains no longer describe a set of closed routes."""


@dataclass(frozen=True)
class ViolationMeasure:
    excess: int
    infeasible_routes: int

    @property
    def feasible(self) -> bool:
        return self.excess == 0


class LinkedSolution:
    """Routes as doubly linked lists over node ids.

    Customers are 1..n-1. Route r owns a depot anchor with id n + r, so
    `after` arguments may name either a customer or an anchor (see
    `anchor`). Empty routes are kept until `prune_empty` runs.
    """

    def __init__(self, inst: Instance, max_routes: int | None = None):
        n = inst.n
        m = max_routes if max_routes is not None else max(n, 2)
        self.inst = inst
        self.max_routes = m
        size = n + m
        self.nxt = np.full(size, K.NONE, dtype=np.int64)
        self.prv = np.full(size, K.NONE, dtype=np.int64)
        self.route = np.full(size, K.NONE, dtype=np.int64)
        self.pos = np.zeros(size, dtype=np.int64)
        self.cum = np.zeros(size, dtype=np.int64)
        self.load = np.zeros(m, dtype=np.int64)
        self.size = np.zeros(m, dtype=np.int64)
        self.stamp = np.zeros(m, dtype=np.int64)
        self.meta = np.zeros(3, dtype=np.int64)
        # clock value at which each (operator, node) was last scanned by descent
        self.checked = np.zeros((K.N_OPS, size), dtype=np.int64)

    # -- kernel plumbing -------------------------------------------------

    @property
    def st(self):
        return (self.nxt, self.prv, self.route, self.pos, self.cum,
                self.load, self.size, self.stamp, self.meta)

    @property
    def kdata(self):
        """(D, xy, q) as consumed by the compiled kernels."""
        inst = self.inst
        return inst.dist.kernel_matrix, inst.coords, inst.demands

    # -- construction ----------------------------------------------------

    @classmethod
    def from_routes(cls, inst: Instance, routes, max_routes: int | None = None) -> "LinkedSolution":
        routes = [list(map(int, r)) for r in routes]
        sol = cls(inst, max_routes=max(max_routes or 0, len(routes) + 1, inst.n))
        seen = set()
        for r in routes:
            for v in r:
                if v <= 0 or v >= inst.n or v in seen:
                    raise ValueError(f"invalid or repeated customer {v}")
                seen.add(v)
        for r in routes:
            idx = sol.open_route()
            after = sol.anchor(idx)
            for v in r:
                sol.insert_node(v, after)
                after = v
        return sol

    def open_route(self) -> int:
        """Append an empty route and return its index."""
        r = int(self.meta[1])
        if r >= self.max_routes:
            raise StructuralError("no free route slot")
        a = self.inst.n + r
        self.nxt[a] = a
        self.prv[a] = a
        self.meta[1] += 1
        K.refresh_route(self.st, self.inst.demands, r)
        return r

    def copy(self) -> "LinkedSolution":
        other = LinkedSolution.__new__(LinkedSolution)
        other.inst = self.inst
        other.max_routes = self.max_routes
        for name in ("nxt", "prv", "route", "pos", "cum", "load", "size", "stamp", "meta", "checked"):
            setattr(other, name, getattr(self, name).copy())
        return other

    # -- queries -----------------------------------------------------------

    @property
    def cost(self) -> int:
        return int(self.meta[0])

    @property
    def n_routes(self) -> int:
        return int(self.meta[1])

    @property
    def n_nonempty(self) -> int:
        return int(np.count_nonzero(self.size[: self.n_routes]))

    def anchor(self, r: int) -> int:
        return self.inst.n + r

    def in_route(self, v: int) -> bool:
        return 0 < v < self.inst.n and self.route[v] >= 0

    def in_route_mask(self) -> np.ndarray:
        m = self.route[: self.inst.n] >= 0
        m[0] = False
        return m

    def real_links(self) -> tuple[np.ndarray, np.ndarray]:
        """next/prev over 0..n-1 with anchors folded onto the depot; -1 when unrouted."""
        n = self.inst.n
        nxt = self.nxt[:n].copy()
        prv = self.prv[:n].copy()
        nxt[nxt >= n] = 0
        prv[prv >= n] = 0
        nxt[0] = -1
        prv[0] = -1
        return nxt, prv

    def routes(self, include_empty: bool = False) -> list[list[int]]:
        out = []
        n = self.inst.n
        for r in range(self.n_routes):
            a = n + r
            seq = []
            u = int(self.nxt[a])
            while u != a:
                seq.append(u)
                u = int(self.nxt[u])
            if seq or include_empty:
                out.append(seq)
        return out

    def violation(self) -> ViolationMeasure:
        load = self.load[: self.n_routes]
        over = load - self.inst.capacity
        over = over[over > 0]
        return ViolationMeasure(int(over.sum()), int(over.size))

    def unrouted(self) -> np.ndarray:
        mask = self.route[: self.inst.n] < 0
        mask[0] = False
        return np.flatnonzero(mask)

    # -- mutation ----------------------------------------------------------

    def remove_node(self, v: int) -> int:
        if v == 0 or not self.in_route(v):
            raise ValueError(f"node {v} is not a routed customer")
        D, xy, q = self.kdata
        return int(K.remove_node(self.st, D, xy, q, v))

    def insert_node(self, v: int, after: int) -> int:
        n = self.inst.n
        if not 0 < v < n:
            raise ValueError(f"node {v} is not a customer")
        if self.route[v] >= 0:
            raise ValueError(f"node {v} is already routed")
        if after < n and not self.in_route(after):
            raise ValueError(f"insertion point {after} is not routed")
        if after >= n and (after - n >= self.n_routes):
            raise ValueError(f"anchor {after} does not name an open route")
        D, xy, q = self.kdata
        return int(K.insert_node(self.st, D, xy, q, v, after))

    def prune_empty(self) -> None:
        K.prune_empty(self.st, self.inst.demands)

    # -- output ------------------------------------------------------------

    def to_sol(self) -> str:
        return format_solution(self.routes(), self.cost)

    def __repr__(self) -> str:
        return f"LinkedSolution(cost={self.cost}, routes={self.n_nonempty})"


def cost_recompute(sol: LinkedSolution) -> int:
    D, xy, _ = sol.kdata
    c = int(K.recompute_cost(sol.st, D, xy, sol.inst.n))
    if c < 0:
        raise StructuralError("broken link chain")
    return c


def violation(sol: LinkedSolution) -> ViolationMeasure:
    return sol.violation()


def edge_keys(sol: LinkedSolution) -> np.ndarray:
    """Undirected edges as integer keys, one per edge occurrence."""
    n = sol.inst.n
    cust = np.flatnonzero(sol.route[:n] >= 0)
    cust = cust[cust > 0]
    succ = sol.nxt[cust]
    succ = np.where(succ >= n, 0, succ)
    anchors = n + np.arange(sol.n_routes)
    firsts = sol.nxt[anchors]
    firsts = firsts[firsts < n]
    a = np.concatenate([cust, np.zeros(firsts.size, dtype=np.int64)])
    b = np.concatenate([succ, firsts])
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return lo * n + hi


def solution_distance(s: LinkedSolution, r: LinkedSolution) -> int:
    """Size of the multiset symmetric difference of undirected edges."""
    if s.inst is not r.inst and s.inst.n != r.inst.n:
        raise ValueError("solutions belong to different instances")
    ks = edge_keys(s)
    kr = edge_keys(r)
    keys, inv = np.unique(np.concatenate([ks, kr]), return_inverse=True)
    w = np.concatenate([np.ones(ks.size), -np.ones(kr.size)])
    diff = np.bincount(inv, weights=w, minlength=keys.size)
    return int(np.abs(diff).sum())
