"""Random operand generation for move-delta checks."""

import numpy as np

from ailskit.localsearch import KINDS, apply_move, evaluate_move
from ailskit.solution import cost_recompute


def random_operands(sol, kind, rng):
    routed = np.flatnonzero(sol.in_route_mask())
    v = int(rng.choice(routed))
    rv = int(sol.route[v])
    others = [r for r in range(sol.n_routes) if r != rv]
    same = [int(u) for u in routed if sol.route[u] == rv and u != v]
    if kind == "inter-shift":
        return (v, int(rng.choice(others))) if others else None
    if kind in ("swap-star", "two-opt-star"):
        pool = [int(u) for u in routed if sol.route[u] != rv]
        if kind == "two-opt-star":
            pool += [sol.anchor(r) for r in others]
            if rng.random() < 0.2:
                v = sol.anchor(rv)
        return (v, int(rng.choice(pool))) if pool else None
    if kind == "intra-swap":
        return (v, int(rng.choice(same))) if same else None
    if kind == "intra-shift":
        pool = same + [sol.anchor(rv)]
        u = int(rng.choice(pool))
        return None if sol.prv[v] == u else (v, u)
    if kind == "intra-two-opt":
        pool = same + [sol.anchor(rv)] + [v]
        a, b = (int(x) for x in rng.choice(pool, 2, replace=False)) if len(pool) > 1 else (v, v)
        if sol.pos[a] > sol.pos[b]:
            a, b = b, a
        return None if a == b else (a, b)
    raise ValueError(kind)


def check_random_moves(sol, rng, count, slots=3):
    """Apply `count` random moves; returns the number of delta mismatches."""
    failures = 0
    done = 0
    while done < count:
        kind = KINDS[int(rng.integers(len(KINDS)))]
        ops = random_operands(sol, kind, rng)
        if ops is None:
            continue
        m = evaluate_move(sol, kind, ops[0], ops[1], slots)
        if m is None:
            continue
        before_cost = sol.cost
        before_exc = sol.violation().excess
        realized = apply_move(sol, m)
        if not (realized == m.delta == sol.cost - before_cost == cost_recompute(sol) - before_cost
                and sol.violation().excess - before_exc == m.excess_delta):
            failures += 1
        done += 1
    return failures
