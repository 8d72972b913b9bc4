"""{Walk strings of consecutive customers along routes from random starting
customers, or, half of the time, take the nearest neighbors of one random
customer.}"""


def select_nodes(ctx):
    # ctx.next/ctx.prev: successor/predecessor ids, 0 is the depot, -1 unrouted
    # ctx.in_route: True while a customer is routed and not yet selected
    # ctx.knn[i]: nearest nodes of i; ctx.dist(i, j); ctx.rng: numpy Generator
    n = ctx.n
    selected = []
    if ctx.rng.random() > 0.5:
        while len(selected) < ctx.number_select:
            length = min(max(1, n - 1), ctx.number_select - len(selected))
            start = int(ctx.rng.integers(1, n))
            while not ctx.in_route[start]:
                start = int(ctx.rng.integers(1, n))
            node = start
            taken = 0
            while True:
                node = int(ctx.next[node])
                if node == 0:
                    # wrap to the first customer of the same route
                    node = start
                    while ctx.prev[node] != 0:
                        node = int(ctx.prev[node])
                if ctx.in_route[node] and len(selected) < ctx.number_select:
                    selected.append(node)
                    ctx.in_route[node] = False
                    taken += 1
                if node == start or taken >= length:
                    break
        return selected
    start = int(ctx.rng.integers(1, n))
    for w in ctx.knn[start]:
        w = int(w)
        if w != 0 and ctx.in_route[w]:
            selected.append(w)
            if len(selected) == ctx.number_select:
                return selected
    # neighbor list exhausted: continue in full distance order
    row = ctx.dist.row(start)
    for w in sorted(range(n), key=lambda j: (row[j], j)):
        if w != 0 and ctx.in_route[w] and w not in selected:
            selected.append(w)
            if len(selected) == ctx.number_select:
                break
    return selected
