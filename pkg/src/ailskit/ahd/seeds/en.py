"""{Concentric circles around a random routed customer; the radius grows by
2 distance units per sweep and each sweep takes nodes in index order.}"""

from ailskit.ruin import ruin_en


def select_nodes(ctx):
    return ruin_en(ctx, 2.0)
