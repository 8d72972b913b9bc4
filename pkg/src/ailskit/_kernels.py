"""Compiled kernels over the linked-route arrays.

Layout (all int64 arrays, n = instance nodes, M = route slots):
  nodes 1..n-1 are customers; node n+r is the depot anchor of route r.
  nxt/prv/route/pos/cum have length n+M; load/size/stamp have length M.
  meta = [cost, n_routes, clock].
Each route is a circular list anchor -> c1 -> ... -> ck -> anchor.
Anchors count as node 0 for distances.
"""

import numpy as np
from numba import njit

JIT = dict(cache=True, nogil=True)

SHIFT, SWAP_STAR, TWO_OPT_STAR, INTRA_SHIFT, INTRA_SWAP, INTRA_TWO_OPT = 0, 1, 2, 3, 4, 5
N_OPS = 6
NONE = -1
BIG = np.int64(1) << 60


@njit(inline="always", **JIT)
def dist(D, xy, n, a, b):
    if a >= n:
        a = 0
    if b >= n:
        b = 0
    if D.shape[0] > 0:
        return np.int64(D[a, b])
    dx = xy[a, 0] - xy[b, 0]
    dy = xy[a, 1] - xy[b, 1]
    return np.int64(np.floor(np.sqrt(dx * dx + dy * dy) + 0.5))


@njit(inline="always", **JIT)
def exc(load, cap):
    return load - cap if load > cap else 0


@njit(**JIT)
def refresh_route(st, q, r):
    nxt, prv, route, pos, cum, load, size, stamp, meta = st
    n = q.shape[0]
    a = n + r
    pos[a] = 0
    cum[a] = 0
    route[a] = r
    u = nxt[a]
    k = 0
    c = 0
    while u != a:
        k += 1
        pos[u] = k
        c += q[u]
        cum[u] = c
        route[u] = r
        u = nxt[u]
    size[r] = k
    load[r] = c
    meta[2] += 1
    stamp[r] = meta[2]


@njit(**JIT)
def recompute_cost(st, D, xy, n):
    """Walk every route; -1 signals a broken chain."""
    nxt = st[0]
    meta = st[8]
    limit = nxt.shape[0]
    total = 0
    for r in range(meta[1]):
        a = n + r
        u = a
        steps = 0
        while True:
            w = nxt[u]
            if w < 0:
                return -1
            total += dist(D, xy, n, u, w)
            u = w
            steps += 1
            if u == a:
                break
            if steps > limit or u >= n:
                return -1
    return total


@njit(**JIT)
def unlink(st, D, xy, n, v):
    nxt, prv, route = st[0], st[1], st[2]
    p = prv[v]
    x = nxt[v]
    delta = dist(D, xy, n, p, x) - dist(D, xy, n, p, v) - dist(D, xy, n, v, x)
    nxt[p] = x
    prv[x] = p
    nxt[v] = NONE
    prv[v] = NONE
    route[v] = NONE
    st[8][0] += delta
    return delta


@njit(**JIT)
def link_after(st, D, xy, n, v, a):
    nxt, prv, route = st[0], st[1], st[2]
    x = nxt[a]
    delta = dist(D, xy, n, a, v) + dist(D, xy, n, v, x) - dist(D, xy, n, a, x)
    nxt[a] = v
    prv[v] = a
    nxt[v] = x
    prv[x] = v
    route[v] = route[a]
    st[8][0] += delta
    return delta


@njit(**JIT)
def remove_node(st, D, xy, q, v):
    n = q.shape[0]
    r = st[2][v]
    delta = unlink(st, D, xy, n, v)
    refresh_route(st, q, r)
    return delta


@njit(**JIT)
def insert_node(st, D, xy, q, v, a):
    n = q.shape[0]
    delta = link_after(st, D, xy, n, v, a)
    refresh_route(st, q, st[2][a])
    return delta


# ---------------------------------------------------------------- evaluation
# Every evaluator returns (dcost, dexc, p1, p2); dexc is the change in total
# excess load. p1 == NONE means no candidate.


@njit(**JIT)
def eval_shift(st, D, xy, q, cap, v, b):
    nxt, prv, route, load = st[0], st[1], st[2], st[5]
    n = q.shape[0]
    a_r = route[v]
    if a_r == b:
        return BIG, BIG, NONE, NONE
    qv = q[v]
    dexc = (exc(load[a_r] - qv, cap) - exc(load[a_r], cap)
            + exc(load[b] + qv, cap) - exc(load[b], cap))
    p = prv[v]
    x = nxt[v]
    rem = dist(D, xy, n, p, x) - dist(D, xy, n, p, v) - dist(D, xy, n, v, x)
    anchor = n + b
    best = BIG
    after = NONE
    u = anchor
    while True:
        nu = nxt[u]
        c = dist(D, xy, n, u, v) + dist(D, xy, n, v, nu) - dist(D, xy, n, u, nu)
        if c < best:
            best = c
            after = u
        u = nu
        if u == anchor:
            break
    return rem + best, dexc, after, NONE


@njit(**JIT)
def _best_insert_without(st, D, xy, n, v, w, cap3):
    """Cheapest insertion of v into route(w) with w removed.
    cap3 > 0 uses the three cheapest slots of the intact route plus w's own slot."""
    nxt, prv, route = st[0], st[1], st[2]
    anchor = n + route[w]
    pw = prv[w]
    nw = nxt[w]
    inplace = dist(D, xy, n, pw, v) + dist(D, xy, n, v, nw) - dist(D, xy, n, pw, nw)
    best = inplace
    after = pw
    if cap3 > 0:
        c0 = BIG
        c1 = BIG
        c2 = BIG
        a0 = NONE
        a1 = NONE
        a2 = NONE
        u = anchor
        while True:
            nu = nxt[u]
            c = dist(D, xy, n, u, v) + dist(D, xy, n, v, nu) - dist(D, xy, n, u, nu)
            if c < c0:
                c2, a2 = c1, a1
                c1, a1 = c0, a0
                c0, a0 = c, u
            elif c < c1:
                c2, a2 = c1, a1
                c1, a1 = c, u
            elif c < c2:
                c2, a2 = c, u
            u = nu
            if u == anchor:
                break
        if a0 != NONE and a0 != w and a0 != pw and c0 < best:
            best, after = c0, a0
        if a1 != NONE and a1 != w and a1 != pw and c1 < best:
            best, after = c1, a1
        if a2 != NONE and a2 != w and a2 != pw and c2 < best:
            best, after = c2, a2
        return best, after
    u = anchor
    while True:
        nu = nxt[u]
        if u != w and nu != w:
            c = dist(D, xy, n, u, v) + dist(D, xy, n, v, nu) - dist(D, xy, n, u, nu)
            if c < best:
                best = c
                after = u
        u = nu
        if u == anchor:
            break
    return best, after


@njit(**JIT)
def eval_swap_star(st, D, xy, q, cap, v, w, cap3):
    nxt, prv, route, load = st[0], st[1], st[2], st[5]
    n = q.shape[0]
    ra = route[v]
    rb = route[w]
    if ra == rb:
        return BIG, BIG, NONE, NONE
    qv = q[v]
    qw = q[w]
    dexc = (exc(load[ra] - qv + qw, cap) - exc(load[ra], cap)
            + exc(load[rb] - qw + qv, cap) - exc(load[rb], cap))
    rem_v = dist(D, xy, n, prv[v], nxt[v]) - dist(D, xy, n, prv[v], v) - dist(D, xy, n, v, nxt[v])
    rem_w = dist(D, xy, n, prv[w], nxt[w]) - dist(D, xy, n, prv[w], w) - dist(D, xy, n, w, nxt[w])
    ins_v, after_v = _best_insert_without(st, D, xy, n, v, w, cap3)
    ins_w, after_w = _best_insert_without(st, D, xy, n, w, v, cap3)
    return rem_v + rem_w + ins_v + ins_w, dexc, after_v, after_w


@njit(**JIT)
def eval_two_opt_star(st, D, xy, q, cap, a, b):
    nxt, route, cum, load = st[0], st[2], st[4], st[5]
    n = q.shape[0]
    ra = route[a]
    rb = route[b]
    if ra == rb or ra < 0 or rb < 0:
        return BIG, BIG, NONE, NONE
    na = nxt[a]
    nb = nxt[b]
    dcost = dist(D, xy, n, a, nb) + dist(D, xy, n, b, na) - dist(D, xy, n, a, na) - dist(D, xy, n, b, nb)
    new_a = cum[a] + load[rb] - cum[b]
    new_b = cum[b] + load[ra] - cum[a]
    dexc = exc(new_a, cap) + exc(new_b, cap) - exc(load[ra], cap) - exc(load[rb], cap)
    return dcost, dexc, a, b


@njit(**JIT)
def eval_intra_two_opt(st, D, xy, q, i, j):
    """Reverse the segment next(i)..j; requires pos[i] < pos[j] in one route."""
    nxt, route, pos = st[0], st[2], st[3]
    n = q.shape[0]
    if route[i] != route[j] or route[i] < 0 or pos[i] >= pos[j]:
        return BIG, BIG, NONE, NONE
    ni = nxt[i]
    if ni == j:
        return BIG, BIG, NONE, NONE
    nj = nxt[j]
    dcost = dist(D, xy, n, i, j) + dist(D, xy, n, ni, nj) - dist(D, xy, n, i, ni) - dist(D, xy, n, j, nj)
    return dcost, 0, i, j


@njit(**JIT)
def eval_intra_swap(st, D, xy, q, v, w):
    nxt, prv, route = st[0], st[1], st[2]
    n = q.shape[0]
    if v == w or route[v] != route[w] or route[v] < 0 or v >= n or w >= n:
        return BIG, BIG, NONE, NONE
    if nxt[w] == v:
        v, w = w, v
    pv = prv[v]
    nv = nxt[v]
    pw = prv[w]
    nw = nxt[w]
    if nv == w:
        dcost = (dist(D, xy, n, pv, w) + dist(D, xy, n, v, nw)
                 - dist(D, xy, n, pv, v) - dist(D, xy, n, w, nw))
    else:
        dcost = (dist(D, xy, n, pv, w) + dist(D, xy, n, w, nv) + dist(D, xy, n, pw, v) + dist(D, xy, n, v, nw)
                 - dist(D, xy, n, pv, v) - dist(D, xy, n, v, nv) - dist(D, xy, n, pw, w) - dist(D, xy, n, w, nw))
    return dcost, 0, v, w


@njit(**JIT)
def eval_intra_shift(st, D, xy, q, v, u):
    """Move v to just after u inside its own route."""
    nxt, prv, route = st[0], st[1], st[2]
    n = q.shape[0]
    if u == v or route[u] != route[v] or route[v] < 0 or prv[v] == u or v >= n:
        return BIG, BIG, NONE, NONE
    pv = prv[v]
    nv = nxt[v]
    nu = nxt[u]
    rem = dist(D, xy, n, pv, nv) - dist(D, xy, n, pv, v) - dist(D, xy, n, v, nv)
    ins = dist(D, xy, n, u, v) + dist(D, xy, n, v, nu) - dist(D, xy, n, u, nu)
    return rem + ins, 0, v, u


@njit(**JIT)
def evaluate(st, D, xy, q, cap, kind, x, y, cap3):
    if kind == SHIFT:
        return eval_shift(st, D, xy, q, cap, x, y)
    if kind == SWAP_STAR:
        return eval_swap_star(st, D, xy, q, cap, x, y, cap3)
    if kind == TWO_OPT_STAR:
        return eval_two_opt_star(st, D, xy, q, cap, x, y)
    if kind == INTRA_SHIFT:
        return eval_intra_shift(st, D, xy, q, x, y)
    if kind == INTRA_SWAP:
        return eval_intra_swap(st, D, xy, q, x, y)
    return eval_intra_two_opt(st, D, xy, q, x, y)


# ---------------------------------------------------------------- application


@njit(**JIT)
def apply_move(st, D, xy, q, kind, x, y, p1, p2):
    """Apply a move previously returned by the matching evaluator.
    Returns the realized cost change."""
    nxt, prv, route = st[0], st[1], st[2]
    n = q.shape[0]
    before = st[8][0]
    if kind == SHIFT:
        ra = route[x]
        rb = route[p1]
        unlink(st, D, xy, n, x)
        link_after(st, D, xy, n, x, p1)
        refresh_route(st, q, ra)
        refresh_route(st, q, rb)
    elif kind == SWAP_STAR:
        v, w = x, y
        ra = route[v]
        rb = route[w]
        unlink(st, D, xy, n, v)
        unlink(st, D, xy, n, w)
        link_after(st, D, xy, n, v, p1)
        link_after(st, D, xy, n, w, p2)
        refresh_route(st, q, ra)
        refresh_route(st, q, rb)
    elif kind == TWO_OPT_STAR:
        a, b = x, y
        ra = route[a]
        rb = route[b]
        anchor_a = n + ra
        anchor_b = n + rb
        na = nxt[a]
        nb = nxt[b]
        last_a = prv[anchor_a]
        last_b = prv[anchor_b]
        dcost = (dist(D, xy, n, a, nb) + dist(D, xy, n, b, na)
                 - dist(D, xy, n, a, na) - dist(D, xy, n, b, nb))
        if nb != anchor_b:
            nxt[a] = nb
            prv[nb] = a
            nxt[last_b] = anchor_a
            prv[anchor_a] = last_b
        else:
            nxt[a] = anchor_a
            prv[anchor_a] = a
        if na != anchor_a:
            nxt[b] = na
            prv[na] = b
            nxt[last_a] = anchor_b
            prv[anchor_b] = last_a
        else:
            nxt[b] = anchor_b
            prv[anchor_b] = b
        st[8][0] += dcost
        refresh_route(st, q, ra)
        refresh_route(st, q, rb)
    elif kind == INTRA_SHIFT:
        r = route[x]
        unlink(st, D, xy, n, x)
        link_after(st, D, xy, n, x, y)
        refresh_route(st, q, r)
    elif kind == INTRA_SWAP:
        v, w = p1, p2
        r = route[v]
        if nxt[v] == w:
            pv = prv[v]
            unlink(st, D, xy, n, w)
            link_after(st, D, xy, n, w, pv)
        else:
            pv = prv[v]
            pw = prv[w]
            unlink(st, D, xy, n, v)
            unlink(st, D, xy, n, w)
            link_after(st, D, xy, n, w, pv)
            link_after(st, D, xy, n, v, pw)
        refresh_route(st, q, r)
    else:
        i, j = x, y
        r = route[i]
        ni = nxt[i]
        nj = nxt[j]
        dcost = (dist(D, xy, n, i, j) + dist(D, xy, n, ni, nj)
                 - dist(D, xy, n, i, ni) - dist(D, xy, n, j, nj))
        # collect the segment ni..j and relink it reversed between i and nj
        seg = np.empty(st[3][j] - st[3][i], dtype=np.int64)
        u = ni
        k = 0
        while True:
            seg[k] = u
            k += 1
            if u == j:
                break
            u = nxt[u]
        prev = i
        for t in range(k - 1, -1, -1):
            u = seg[t]
            nxt[prev] = u
            prv[u] = prev
            prev = u
        nxt[prev] = nj
        prv[nj] = prev
        st[8][0] += dcost
        refresh_route(st, q, r)
    return st[8][0] - before


# ---------------------------------------------------------------- searches


@njit(inline="always", **JIT)
def _accept(dcost, dexc, pen):
    if dexc > 0 or dcost >= BIG:
        return False
    return dcost + pen * dexc < 0


@njit(**JIT)
def find_empty_route(st):
    size, meta = st[6], st[8]
    for r in range(meta[1]):
        if size[r] == 0:
            return r
    return NONE


@njit(**JIT)
def route_order(st, n, only_overloaded, cap):
    nxt, load, meta = st[0], st[5], st[8]
    out = np.empty(n, dtype=np.int64)
    k = 0
    for r in range(meta[1]):
        if only_overloaded and load[r] <= cap:
            continue
        a = n + r
        u = nxt[a]
        while u != a:
            out[k] = u
            k += 1
            u = nxt[u]
    return out[:k]


@njit(**JIT)
def _try_pair(st, D, xy, q, cap, op, v, w, pen, cap3):
    """Evaluate the candidate moves of operator op induced by neighbor pair (v, w);
    apply the first acceptable one. Returns True when a move was applied."""
    nxt, prv, route, pos = st[0], st[1], st[2], st[3]
    ra = route[v]
    rb = route[w]
    if op == SHIFT:
        if ra == rb:
            return False
        dc, de, p1, p2 = eval_shift(st, D, xy, q, cap, v, rb)
        if p1 != NONE and _accept(dc, de, pen):
            apply_move(st, D, xy, q, SHIFT, v, rb, p1, p2)
            return True
        return False
    if op == SWAP_STAR:
        if ra == rb:
            return False
        dc, de, p1, p2 = eval_swap_star(st, D, xy, q, cap, v, w, cap3)
        if p1 != NONE and _accept(dc, de, pen):
            apply_move(st, D, xy, q, SWAP_STAR, v, w, p1, p2)
            return True
        return False
    if op == TWO_OPT_STAR:
        if ra == rb:
            return False
        dc, de, p1, p2 = eval_two_opt_star(st, D, xy, q, cap, v, prv[w])
        if p1 != NONE and _accept(dc, de, pen):
            apply_move(st, D, xy, q, TWO_OPT_STAR, v, prv[w], p1, p2)
            return True
        dc, de, p1, p2 = eval_two_opt_star(st, D, xy, q, cap, prv[v], w)
        if p1 != NONE and _accept(dc, de, pen):
            apply_move(st, D, xy, q, TWO_OPT_STAR, prv[v], w, p1, p2)
            return True
        return False
    if ra != rb:
        return False
    if op == INTRA_SHIFT:
        dc, de, p1, p2 = eval_intra_shift(st, D, xy, q, v, w)
        if p1 != NONE and _accept(dc, de, pen):
            apply_move(st, D, xy, q, INTRA_SHIFT, v, w, p1, p2)
            return True
        u = prv[w]
        if u != v:
            dc, de, p1, p2 = eval_intra_shift(st, D, xy, q, v, u)
            if p1 != NONE and _accept(dc, de, pen):
                apply_move(st, D, xy, q, INTRA_SHIFT, v, u, p1, p2)
                return True
        return False
    if op == INTRA_SWAP:
        dc, de, p1, p2 = eval_intra_swap(st, D, xy, q, v, w)
        if p1 != NONE and _accept(dc, de, pen):
            apply_move(st, D, xy, q, INTRA_SWAP, v, w, p1, p2)
            return True
        return False
    i, j = v, w
    if pos[w] < pos[v]:
        i, j = w, v
    dc, de, p1, p2 = eval_intra_two_opt(st, D, xy, q, i, j)
    if p1 != NONE and _accept(dc, de, pen):
        apply_move(st, D, xy, q, INTRA_TWO_OPT, i, j, p1, p2)
        return True
    pi = prv[i]
    pj = prv[j]
    if pj != i:
        dc, de, p1, p2 = eval_intra_two_opt(st, D, xy, q, pi, pj)
        if p1 != NONE and _accept(dc, de, pen):
            apply_move(st, D, xy, q, INTRA_TWO_OPT, pi, pj, p1, p2)
            return True
    return False


@njit(**JIT)
def _try_empty(st, D, xy, q, cap, v, pen):
    """Relocate v into an empty route if that is acceptable."""
    r = find_empty_route(st)
    if r == NONE or st[2][v] == r or st[6][st[2][v]] <= 1:
        return False
    dc, de, p1, p2 = eval_shift(st, D, xy, q, cap, v, r)
    if p1 != NONE and _accept(dc, de, pen):
        apply_move(st, D, xy, q, SHIFT, v, r, p1, p2)
        return True
    return False


@njit(**JIT)
def descend(st, D, xy, q, cap, knn, kls, ops, checked, cap3, use_empty):
    """First-improvement descent, operators round-robin until a quiet pass.
    checked[op, v] stores the clock at which v was last scanned for op; a pair
    is skipped while neither of its routes changed since then."""
    n = q.shape[0]
    route, stamp, meta = st[2], st[7], st[8]
    kk = min(kls, knn.shape[1])
    moves = 0
    while True:
        improved = False
        for oi in range(ops.shape[0]):
            op = ops[oi]
            order = route_order(st, n, False, cap)
            for idx in range(order.shape[0]):
                v = order[idx]
                t0 = meta[2]
                for k in range(kk):
                    w = knn[v, k]
                    if w == 0:
                        continue
                    ra = route[v]
                    rb = route[w]
                    if rb < 0:
                        continue
                    s = stamp[ra] if stamp[ra] > stamp[rb] else stamp[rb]
                    if s <= checked[op, v]:
                        continue
                    if _try_pair(st, D, xy, q, cap, op, v, w, 0.0, cap3):
                        improved = True
                        moves += 1
                checked[op, v] = t0
                if op == SHIFT and use_empty:
                    if _try_empty(st, D, xy, q, cap, v, 0.0):
                        improved = True
                        moves += 1
        if not improved:
            break
    return moves


@njit(**JIT)
def total_excess(st, cap):
    load, meta = st[5], st[8]
    t = 0
    for r in range(meta[1]):
        t += exc(load[r], cap)
    return t


@njit(**JIT)
def ensure_empty_route(st, q, max_routes):
    if find_empty_route(st) != NONE:
        return True
    meta = st[8]
    if meta[1] >= max_routes:
        return False
    n = q.shape[0]
    r = meta[1]
    a = n + r
    st[0][a] = a
    st[1][a] = a
    meta[1] += 1
    refresh_route(st, q, r)
    return True


@njit(**JIT)
def repair(st, D, xy, q, cap, knn, kls, pen0, cap3, max_routes):
    """Reduce total excess to zero with inter-route moves under a penalized
    objective; the penalty doubles after every sweep that does not reduce excess."""
    n = q.shape[0]
    route = st[2]
    load = st[5]
    kk = min(kls, knn.shape[1])
    pen = pen0
    moves = 0
    ex = total_excess(st, cap)
    while ex > 0:
        before = ex
        for op in range(3):
            ensure_empty_route(st, q, max_routes)
            order = route_order(st, n, True, cap)
            for idx in range(order.shape[0]):
                v = order[idx]
                if load[route[v]] <= cap:
                    continue
                for k in range(kk):
                    w = knn[v, k]
                    if w == 0 or route[w] < 0:
                        continue
                    if _try_pair(st, D, xy, q, cap, op, v, w, pen, cap3):
                        moves += 1
                        ensure_empty_route(st, q, max_routes)
                        if load[route[v]] <= cap:
                            break
                if load[route[v]] > cap:
                    if _try_empty(st, D, xy, q, cap, v, pen):
                        moves += 1
                        ensure_empty_route(st, q, max_routes)
        ex = total_excess(st, cap)
        if ex >= before:
            pen *= 2.0
            if pen > 1e300:
                break
    return moves


@njit(**JIT)
def best_insertion(st, D, xy, q, cap, v):
    """Cheapest capacity-feasible slot over all routes; otherwise the slot with
    least added excess (ties by cost). Returns (after, cost, feasible)."""
    nxt, load, meta = st[0], st[5], st[8]
    n = q.shape[0]
    qv = q[v]
    best = BIG
    after = NONE
    fb_exc = BIG
    fb_cost = BIG
    fb_after = NONE
    for r in range(meta[1]):
        feasible = load[r] + qv <= cap
        if not feasible and after != NONE:
            continue
        a = n + r
        u = a
        e = exc(load[r] + qv, cap) - exc(load[r], cap)
        while True:
            nu = nxt[u]
            c = dist(D, xy, n, u, v) + dist(D, xy, n, v, nu) - dist(D, xy, n, u, nu)
            if feasible:
                if c < best:
                    best = c
                    after = u
            elif e < fb_exc or (e == fb_exc and c < fb_cost):
                fb_exc = e
                fb_cost = c
                fb_after = u
            u = nu
            if u == a:
                break
    if after != NONE:
        return after, best, True
    return fb_after, fb_cost, False


@njit(**JIT)
def nearest_insertion(st, D, xy, q, cap, knn, v):
    """Insert next to the nearest routed neighbor whose route has room, on the
    cheaper side. Returns NONE when no neighbor qualifies."""
    nxt, prv, route, load = st[0], st[1], st[2], st[5]
    n = q.shape[0]
    for k in range(knn.shape[1]):
        w = knn[v, k]
        if w == 0 or route[w] < 0:
            continue
        if load[route[w]] + q[v] > cap:
            continue
        pw = prv[w]
        nw = nxt[w]
        before = dist(D, xy, n, pw, v) + dist(D, xy, n, v, w) - dist(D, xy, n, pw, w)
        after = dist(D, xy, n, w, v) + dist(D, xy, n, v, nw) - dist(D, xy, n, w, nw)
        if before < after:
            return pw
        return w
    return NONE


@njit(**JIT)
def recreate(st, D, xy, q, cap, knn, nodes, nearest):
    for i in range(nodes.shape[0]):
        v = nodes[i]
        a = NONE
        if nearest:
            a = nearest_insertion(st, D, xy, q, cap, knn, v)
        if a == NONE:
            a, _, _ = best_insertion(st, D, xy, q, cap, v)
        insert_node(st, D, xy, q, v, a)


@njit(**JIT)
def prune_empty(st, q):
    """Drop empty routes, moving the last route into each freed slot."""
    nxt, prv, route, pos, cum, load, size, stamp, meta = st
    n = q.shape[0]
    r = meta[1] - 1
    while r >= 0:
        if size[r] == 0:
            last = meta[1] - 1
            if r != last:
                a = n + r
                b = n + last
                if size[last] > 0:
                    first = nxt[b]
                    tail = prv[b]
                    nxt[a] = first
                    prv[first] = a
                    prv[a] = tail
                    nxt[tail] = a
                else:
                    nxt[a] = a
                    prv[a] = a
                refresh_route(st, q, r)
            b = n + last
            nxt[b] = NONE
            prv[b] = NONE
            route[b] = NONE
            load[last] = 0
            size[last] = 0
            meta[1] -= 1
        r -= 1
