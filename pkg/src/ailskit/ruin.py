"""Ruin heuristics (which customers to remove) and the recreate step.

A ruin heuristic is any callable `heuristic(ctx: RuinContext) -> iterable of ids`.
The engine never trusts the raw output: `run_heuristic` validates it and
repairs contract violations, counting each kind of repair.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import _kernels as K
from .instance import DistanceOracle
from .solution import LinkedSolution

logger = logging.getLogger(__name__)

DEFAULT_EN_STEP = 2.0


class HeuristicFailure(RuntimeError):
    """Raised by a heuristic wrapper to abort the run instead of being sanitized."""


@dataclass
class RuinContext:
    """Read-only view of the current solution handed to a ruin heuristic.

    next/prev use real node ids (the depot is 0) and are -1 for unrouted
    nodes. in_route is a private copy the heuristic may mark as it selects.
    """

    dist: DistanceOracle
    knn: np.ndarray
    coords: np.ndarray
    next: np.ndarray
    prev: np.ndarray
    in_route: np.ndarray
    demand: np.ndarray
    number_select: int
    average_nodes: float
    seed: int
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.demand)
        routed = int(np.count_nonzero(self.in_route[1:]))
        if not 1 <= self.number_select <= n - 1:
            raise ValueError(f"number_select must lie in [1, {n - 1}]")
        if self.number_select > routed:
            raise ValueError("number_select exceeds the number of routed customers")
        if self.average_nodes <= 0:
            raise ValueError("average_nodes must be positive")
        self.rng = np.random.default_rng(self.seed)

    @property
    def n(self) -> int:
        return len(self.demand)

    @classmethod
    def from_solution(cls, sol: LinkedSolution, number_select: int, seed: int) -> "RuinContext":
        inst = sol.inst
        nxt, prv = sol.real_links()
        in_route = sol.in_route_mask()
        routes = max(sol.n_nonempty, 1)
        return cls(
            dist=inst.dist,
            knn=inst.knn.lists,
            coords=inst.coords,
            next=nxt,
            prev=prv,
            in_route=in_route,
            demand=inst.demands,
            number_select=int(number_select),
            average_nodes=(inst.n - 1) / routes,
            seed=int(seed),
        )

    def fresh(self) -> "RuinContext":
        """Same context with a restarted RNG and an unmarked in_route copy."""
        return RuinContext(self.dist, self.knn, self.coords, self.next, self.prev,
                           self.in_route.copy(), self.demand, self.number_select,
                           self.average_nodes, self.seed)

    def random_routed(self) -> int:
        # rejection sampling over customer ids, as the reference heuristics do
        while True:
            v = int(self.rng.integers(1, self.n))
            if self.in_route[v]:
                return v


@dataclass
class SanitationStats:
    calls: int = 0
    counts: Counter = field(default_factory=Counter)

    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class RuinResult:
    selected: np.ndarray
    events: tuple[tuple[str, int], ...] = ()

    def __len__(self) -> int:
        return len(self.selected)


# ------------------------------------------------------------------ helpers


def _route_head(ctx: RuinContext, last: int) -> int:
    u = last
    while ctx.prev[u] != 0:
        u = int(ctx.prev[u])
    return u


def _walk_strings(ctx: RuinContext, selected: list[int], taken: np.ndarray, max_len: int) -> None:
    """One string: start at a random routed customer and follow next-links,
    wrapping past the depot to the head of the same route, until max_len
    new nodes are taken or the walk returns to the start."""
    start = ctx.random_routed()
    node = start
    steps = 0
    while True:
        nxt = int(ctx.next[node])
        if nxt == 0:
            nxt = _route_head(ctx, node)
        node = nxt
        # already taken nodes are passed over without using up the string length
        if len(selected) < ctx.number_select and not taken[node]:
            steps += 1
            selected.append(node)
            taken[node] = True
            ctx.in_route[node] = False
        if node == start or steps >= max_len:
            return


def _string_removal(ctx: RuinContext, selected: list[int], taken: np.ndarray, cap_to_n: bool) -> None:
    while len(selected) < ctx.number_select:
        remaining = ctx.number_select - len(selected)
        max_len = min(max(1, ctx.n - 1), remaining) if cap_to_n else min(ctx.n, remaining)
        _walk_strings(ctx, selected, taken, max_len)


# ------------------------------------------------------------------ built-ins


def ruin_sequence(ctx: RuinContext) -> list[int]:
    """Consecutive strings of route neighbors."""
    selected: list[int] = []
    taken = np.zeros(ctx.n, dtype=bool)
    _string_removal(ctx, selected, taken, cap_to_n=True)
    return selected


def ruin_seed(ctx: RuinContext) -> list[int]:
    """Coin flip between string removal and a random node's neighbor list."""
    if ctx.rng.random() > 0.5:
        return ruin_sequence(ctx)
    start = int(ctx.rng.integers(1, ctx.n))
    out = []
    for w in ctx.knn[start]:
        w = int(w)
        if w != 0 and ctx.in_route[w]:
            out.append(w)
            if len(out) == ctx.number_select:
                return out
    # neighbor list exhausted: continue in full distance order (start included)
    _extend_by_distance(ctx, start, out)
    return out


def _extend_by_distance(ctx: RuinContext, start: int, out: list[int]) -> None:
    row = ctx.dist.row(start)
    have = set(out)
    for w in np.lexsort((np.arange(ctx.n), row)):
        w = int(w)
        if w != 0 and ctx.in_route[w] and w not in have:
            out.append(w)
            have.add(w)
            if len(out) == ctx.number_select:
                return


def ruin_knearest(ctx: RuinContext) -> list[int]:
    """A random routed customer and its nearest routed customers."""
    start = ctx.random_routed()
    out = [start]
    for w in ctx.knn[start]:
        if len(out) >= ctx.number_select:
            return out
        w = int(w)
        if w != 0 and ctx.in_route[w]:
            out.append(w)
    if len(out) < ctx.number_select:
        _extend_by_distance(ctx, start, out)
    return out


def ruin_en(ctx: RuinContext, step: float = DEFAULT_EN_STEP) -> list[int]:
    """Concentric circles around a random routed customer, radius growing by
    `step` per sweep; each sweep takes nodes in index order."""
    if step <= 0:
        raise ValueError("step must be positive")
    start = ctx.random_routed()
    cand = np.flatnonzero(ctx.in_route)
    cand = cand[cand != 0]
    d = ctx.dist.row(start)[cand]
    sweep = np.maximum(np.ceil(d / step), 1)
    order = np.lexsort((cand, sweep))
    return [int(v) for v in cand[order[: ctx.number_select]]]


def make_en(step: float) -> Callable[[RuinContext], list[int]]:
    def heuristic(ctx: RuinContext) -> list[int]:
        return ruin_en(ctx, step)

    heuristic.__name__ = f"en_{step:g}"
    return heuristic


def ruin_ddd(ctx: RuinContext) -> list[int]:
    """Demand-weighted spiral: the radius grows by 1 per epoch and the nodes
    entering an epoch are taken by priority
    demand * 0.9**radius / (distance + 1) + uniform(0, 1)."""
    start = ctx.random_routed()
    cand = np.flatnonzero(ctx.in_route)
    cand = cand[cand != 0]
    d = ctx.dist.row(start)[cand].astype(np.float64)
    epoch = np.maximum(np.ceil(d), 1.0)
    # one uniform draw per node, in epoch order then index order
    draw_order = np.lexsort((cand, epoch))
    u = np.empty(cand.size)
    u[draw_order] = ctx.rng.random(cand.size)
    prio = ctx.demand[cand] * np.power(0.9, epoch) / (d + 1.0) + u
    order = np.lexsort((cand, -prio, epoch))
    return [int(v) for v in cand[order[: ctx.number_select]]]


def ruin_pfd(ctx: RuinContext) -> list[int]:
    """Mix of string removal and frequency-damped neighbor sampling."""
    selected: list[int] = []
    taken = np.zeros(ctx.n, dtype=bool)
    freq = np.full(ctx.n, 0.5)
    k = ctx.knn.shape[1]
    while len(selected) < ctx.number_select:
        luck = ctx.rng.random()
        if luck > 0.8:
            remaining = ctx.number_select - len(selected)
            _walk_strings(ctx, selected, taken, min(ctx.n, remaining))
            continue
        start = int(ctx.rng.integers(1, ctx.n))
        for i in range(min(ctx.number_select, k)):
            if len(selected) >= ctx.number_select:
                break
            c = int(ctx.knn[start, i])
            if c != 0 and ctx.in_route[c] and not taken[c]:
                if ctx.rng.random() < 1.0 / (freq[c] + np.exp(-i)):
                    selected.append(c)
                    taken[c] = True
                    ctx.in_route[c] = False
                    freq[c] *= 0.95
    return selected


BUILTINS: dict[str, Callable[[RuinContext], list[int]]] = {
    "seed": ruin_seed,
    "en": ruin_en,
    "ddd": ruin_ddd,
    "pfd": ruin_pfd,
    "knearest": ruin_knearest,
    "sequence": ruin_sequence,
}


def get_heuristic(name: str, en_step: float = DEFAULT_EN_STEP) -> Callable[[RuinContext], list[int]]:
    key = name.lower()
    if key == "en" and en_step != DEFAULT_EN_STEP:
        return make_en(en_step)
    try:
        return BUILTINS[key]
    except KeyError:
        raise ValueError(f"unknown ruin heuristic {name!r}; choose from {sorted(BUILTINS)}") from None


# ------------------------------------------------------------------ contract


def sanitize(raw, ctx: RuinContext) -> RuinResult:
    """Coerce raw heuristic output into a valid RuinResult for ctx.

    Drops the depot, out-of-range, unrouted and repeated ids, truncates
    extras and tops up with random routed customers."""
    events: Counter = Counter()
    out: list[int] = []
    seen = set()
    try:
        items = list(raw) if raw is not None else []
    except TypeError:
        items = []
        events["not_iterable"] += 1
    for x in items:
        try:
            v = int(x)
        except (TypeError, ValueError):
            events["non_integer"] += 1
            continue
        if v == 0:
            events["depot"] += 1
        elif not 0 < v < ctx.n:
            events["out_of_range"] += 1
        elif not ctx.in_route[v]:
            events["unrouted"] += 1
        elif v in seen:
            events["duplicate"] += 1
        else:
            seen.add(v)
            out.append(v)
    if len(out) > ctx.number_select:
        events["truncated"] += len(out) - ctx.number_select
        out = out[: ctx.number_select]
    if len(out) < ctx.number_select:
        need = ctx.number_select - len(out)
        pool = np.flatnonzero(ctx.in_route)
        pool = pool[(pool != 0) & ~np.isin(pool, out)]
        rng = np.random.default_rng([ctx.seed, 0x5EED])
        extra = rng.choice(pool, size=need, replace=False)
        out.extend(int(v) for v in extra)
        events["topped_up"] += need
    return RuinResult(np.asarray(out, dtype=np.int64), tuple(sorted(events.items())))


def run_heuristic(heuristic: Callable[[RuinContext], Iterable[int]], ctx: RuinContext,
                  stats: SanitationStats | None = None) -> RuinResult:
    """Call heuristic on a private copy of ctx and enforce the contract."""
    work = ctx.fresh()
    try:
        raw = heuristic(work)
    except HeuristicFailure:
        raise
    except Exception as exc:  # generated heuristics may crash; the run continues
        logger.debug("ruin heuristic raised %r", exc)
        raw = []
        if stats is not None:
            stats.counts["exception"] += 1
    res = sanitize(raw, ctx)
    if stats is not None:
        stats.calls += 1
        for k, v in res.events:
            stats.counts[k] += v
    return res


# ------------------------------------------------------------------ recreate


def remove_all(sol: LinkedSolution, nodes) -> None:
    D, xy, q = sol.kdata
    for v in nodes:
        K.remove_node(sol.st, D, xy, q, int(v))


def recreate(sol: LinkedSolution, removed, mode: str, rng: np.random.Generator) -> None:
    """Reinsert removed customers in random order by nearest or best insertion."""
    if mode not in ("nearest", "best"):
        raise ValueError(f"unknown recreate mode {mode!r}")
    nodes = np.asarray(removed, dtype=np.int64)
    if nodes.size == 0:
        return
    if (sol.route[nodes] >= 0).any():
        raise ValueError("recreate received a routed node")
    order = rng.permutation(nodes)
    D, xy, q = sol.kdata
    K.recreate(sol.st, D, xy, q, sol.inst.capacity, sol.inst.knn.lists, order, mode == "nearest")
