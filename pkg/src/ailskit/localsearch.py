"""Inter- and intra-route descent operators and the feasibility repair loop.

Moves are evaluated in compiled kernels; this module exposes them as `Move`
objects and drives the granular (K-nearest restricted) descent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .solution import LinkedSolution

KINDS = ("inter-shift", "swap-star", "two-opt-star", "intra-shift", "intra-swap", "intra-two-opt")
KIND_CODE = {k: i for i, k in enumerate(KINDS)}


@dataclass(frozen=True)
class Move:
    """An evaluated move. `operands` are the arguments the evaluator received,
    `slots` are the positions it chose (insertion predecessors, or the
    normalized operand pair for intra swaps)."""

    kind: str
    operands: tuple[int, int]
    slots: tuple[int, int]
    delta: int
    excess_delta: int

    def penalized(self, penalty: float) -> float:
        return self.delta + penalty * self.excess_delta


@dataclass
class LocalSearchConfig:
    neighbors: int = 40
    operators: tuple[str, ...] = KINDS
    swap_star_slots: int = 3  # 0 scans every slot
    empty_route_moves: bool = True
    penalty_factor: float = 10.0


def _evaluate(sol: LinkedSolution, kind: str, x: int, y: int, cap3: int = 3) -> Move | None:
    D, xy, q = sol.kdata
    dc, de, p1, p2 = K.evaluate(sol.st, D, xy, q, sol.inst.capacity, KIND_CODE[kind], x, y, cap3)
    if p1 == K.NONE:
        return None
    return Move(kind, (int(x), int(y)), (int(p1), int(p2)), int(dc), int(de))


def _improving(m: Move | None, penalty: float | None) -> Move | None:
    if m is None or m.excess_delta > 0:
        return None
    if m.penalized(penalty or 0.0) < 0:
        return m
    return None


def inter_shift(sol: LinkedSolution, v: int, target_route: int, penalty: float | None = None) -> Move | None:
    """Relocate v to the cheapest slot of another route."""
    if sol.route[v] == target_route:
        raise ValueError("target route must differ from the route of v")
    return _improving(_evaluate(sol, "inter-shift", v, target_route), penalty)


def swap_star(sol: LinkedSolution, v: int, w: int, penalty: float | None = None, slots: int = 3) -> Move | None:
    """Exchange v and w between their routes, each reinserted at its best slot."""
    if sol.route[v] == sol.route[w]:
        raise ValueError("swap* needs customers of different routes")
    return _improving(_evaluate(sol, "swap-star", v, w, slots), penalty)


def two_opt_star(sol: LinkedSolution, a: int, b: int, penalty: float | None = None) -> Move | None:
    """Cut after a and after b (customers or route anchors) and exchange the tails."""
    if sol.route[a] == sol.route[b]:
        raise ValueError("2-opt* needs two different routes")
    return _improving(_evaluate(sol, "two-opt-star", a, b), penalty)


def intra_two_opt(sol: LinkedSolution, i: int, j: int) -> Move | None:
    """Reverse the segment between next(i) and j (i precedes j)."""
    return _improving(_evaluate(sol, "intra-two-opt", i, j), None)


def intra_swap(sol: LinkedSolution, i: int, j: int) -> Move | None:
    return _improving(_evaluate(sol, "intra-swap", i, j), None)


def intra_shift(sol: LinkedSolution, i: int, after: int) -> Move | None:
    """Move i to just after `after` in the same route."""
    return _improving(_evaluate(sol, "intra-shift", i, after), None)


def evaluate_move(sol: LinkedSolution, kind: str, x: int, y: int, slots: int = 3) -> Move | None:
    """Best move of `kind` for the operands, improving or not."""
    return _evaluate(sol, kind, x, y, slots)


def apply_move(sol: LinkedSolution, move: Move) -> int:
    D, xy, q = sol.kdata
    return int(K.apply_move(sol.st, D, xy, q, KIND_CODE[move.kind], move.operands[0],
                            move.operands[1], move.slots[0], move.slots[1]))


def operand_pairs(sol: LinkedSolution, kind: str, neighbors: np.ndarray | None = None):
    """All operand pairs of an operator. With `neighbors`, v's partners are
    restricted to its K-nearest list, mirroring the granular descent."""
    n = sol.inst.n
    routed = [int(v) for v in np.flatnonzero(sol.in_route_mask())]
    anchors = [sol.anchor(r) for r in range(sol.n_routes)]

    def partners(v):
        if neighbors is None:
            return routed
        return [int(w) for w in neighbors[v] if w != 0 and sol.route[w] >= 0]

    for v in routed:
        rv = sol.route[v]
        if kind == "inter-shift":
            targets = {int(sol.route[w]) for w in partners(v)} if neighbors is not None else range(sol.n_routes)
            for r in sorted(targets):
                if r != rv:
                    yield v, r
        elif kind == "swap-star":
            for w in partners(v):
                if sol.route[w] != rv:
                    yield v, w
        elif kind == "two-opt-star":
            for b in partners(v) + ([] if neighbors is not None else anchors):
                if sol.route[b] != rv:
                    yield v, b
        else:
            pool = partners(v) + ([sol.anchor(int(rv))] if kind != "intra-swap" else [])
            for w in pool:
                if w != v and sol.route[w] == rv:
                    yield v, w
    if kind == "two-opt-star" and neighbors is None:
        for a in anchors:
            for b in anchors + routed:
                if sol.route[a] != sol.route[b]:
                    yield a, b


def find_best_move(sol: LinkedSolution, kind: str, neighbors: np.ndarray | None = None,
                   penalty: float | None = None, slots: int = 0) -> Move | None:
    """Most improving move of one operator over all operand pairs, or None."""
    best = None
    for x, y in operand_pairs(sol, kind, neighbors):
        if kind == "intra-two-opt" and sol.pos[x] > sol.pos[y]:
            x, y = y, x
        m = _improving(_evaluate(sol, kind, x, y, slots), penalty)
        if m is not None and (best is None or m.penalized(penalty or 0.0) < best.penalized(penalty or 0.0)):
            best = m
    return best


def average_edge_cost(sol: LinkedSolution) -> float:
    edges = (sol.inst.n - 1) + max(sol.n_nonempty, 1)
    return max(sol.cost / edges, 1.0)


def repair(sol: LinkedSolution, cfg: LocalSearchConfig | None = None) -> int:
    """Drive total excess load to zero; returns the number of applied moves."""
    cfg = cfg or LocalSearchConfig()
    if sol.violation().excess == 0:
        return 0
    D, xy, q = sol.kdata
    pen = cfg.penalty_factor * average_edge_cost(sol)
    return int(K.repair(sol.st, D, xy, q, sol.inst.capacity, sol.inst.knn.lists, cfg.neighbors,
                        float(pen), cfg.swap_star_slots, sol.max_routes))


def descend(sol: LinkedSolution, cfg: LocalSearchConfig | None = None, prune: bool = True) -> int:
    """First-improvement descent to a local optimum of the granular neighborhood."""
    cfg = cfg or LocalSearchConfig()
    D, xy, q = sol.kdata
    ops = np.array([KIND_CODE[k] for k in cfg.operators], dtype=np.int64)
    if cfg.empty_route_moves:
        K.ensure_empty_route(sol.st, q, sol.max_routes)
    moves = int(K.descend(sol.st, D, xy, q, sol.inst.capacity, sol.inst.knn.lists, cfg.neighbors,
                          ops, sol.checked, cfg.swap_star_slots, cfg.empty_route_moves))
    if prune:
        sol.prune_empty()
    return moves


def local_search(sol: LinkedSolution, cfg: LocalSearchConfig | None = None) -> None:
    repair(sol, cfg)
    descend(sol, cfg)
