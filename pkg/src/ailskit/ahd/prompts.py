"""Prompt construction for generating and judging candidate ruin heuristics."""

from __future__ import annotations

import re
from dataclasses import dataclass

TASK = (
    "Task: design and implement a heuristic that chooses which customers to remove "
    "from a capacitated vehicle routing solution during a ruin-and-recreate "
    "perturbation. The removed customers are reinserted afterwards and the solution "
    "is improved by local search; good choices help the search escape local optima "
    "and reach shorter total route length. Node 0 is the depot."
)

OPERATORS = {
    "O1": (
        "Create a new heuristic whose selection logic is fundamentally different "
        "from every heuristic shown above. Use their ideas only as a contrast."
    ),
    "O2": (
        "Create a new heuristic that combines the strongest ideas of the heuristics "
        "shown above into one improved design."
    ),
    "O3": (
        "Create a modified version of the heuristic shown above that changes one "
        "part of its logic to make it perform better."
    ),
    "O4": (
        "Keep the structure of the heuristic shown above and change only its "
        "numeric parameters and thresholds to improve its performance."
    ),
}

PARENT_COUNT = {"O1": 2, "O2": 2, "O3": 1, "O4": 1}

OUTPUT_FORMAT = (
    "First, describe your heuristic in one paragraph enclosed in braces {} outside "
    "the code block. Then give the complete implementation in a single ```python "
    "code block that follows this template exactly:"
)

TEMPLATE = '''```python
def select_nodes(ctx):
    # ctx.n: number of nodes including the depot (ids 0..n-1)
    # ctx.dist(i, j): rounded Euclidean distance; ctx.dist.row(i): numpy row of distances
    # ctx.coords: numpy array (n, 2) of coordinates
    # ctx.knn[i]: ids of the nearest nodes of i, closest first
    # ctx.next[i] / ctx.prev[i]: route successor / predecessor (0 = depot, -1 = unrouted)
    # ctx.in_route[i]: True while i is routed and not yet selected; set it to False when selecting i
    # ctx.demand[i]: demand of node i
    # ctx.number_select: how many customers to return
    # ctx.average_nodes: average number of customers per route
    # ctx.rng: numpy random Generator; use it for every random choice
    # Return a list of exactly ctx.number_select distinct routed customer ids. Never return 0.
    selected = []
    # your heuristic here
    return selected
```'''

CLOSING = "Do not give any additional explanation."


@dataclass(frozen=True)
class PromptBundle:
    task: str
    parents: str
    operator: str
    output_format: str
    template: str

    @property
    def text(self) -> str:
        return "\n\n".join([self.task, self.parents, self.operator,
                            self.output_format, self.template, CLOSING]) + "\n"


def describe_parents(parents) -> str:
    k = len(parents)
    noun = "heuristic" if k == 1 else "heuristics"
    lines = [f"I have {k} existing {noun} with code:"]
    for i, p in enumerate(parents, 1):
        lines.append(f"No. {i} heuristic:")
        lines.append(f"{{{p.description.strip()}}}")
        lines.append("```python\n" + p.source.rstrip() + "\n```")
    return "\n".join(lines)


def build_prompt(parents, op: str) -> PromptBundle:
    if op not in OPERATORS:
        raise ValueError(f"unknown operator {op!r}")
    if not parents:
        raise ValueError("at least one parent is required")
    return PromptBundle(TASK, describe_parents(parents), OPERATORS[op], OUTPUT_FORMAT, TEMPLATE)


JUDGE_INSTRUCTIONS = (
    "You will judge whether a newly proposed ruin heuristic is likely to outperform "
    "the weakest heuristic currently kept in the population. Fitness is the average "
    "percentage gap to the best-known solution over benchmark runs; lower is better."
)


def build_judge_prompt(candidate, worst) -> str:
    parts = [
        JUDGE_INSTRUCTIONS,
        f"Weakest population member (fitness {worst.fitness:.4f}%):",
        f"{{{worst.description.strip()}}}",
        "```python\n" + worst.source.rstrip() + "\n```",
        "New heuristic:",
        f"{{{candidate.description.strip()}}}",
        "```python\n" + candidate.source.rstrip() + "\n```",
        "Think step by step: consider how each heuristic picks customers, how that "
        "interacts with reinsertion and local search, and whether the new one can "
        "crash or return invalid ids. Then finish with a final line that is exactly "
        "VERDICT: YES if the new heuristic will achieve a lower gap than the weakest "
        "member, or VERDICT: NO otherwise.",
    ]
    return "\n\n".join(parts) + "\n"


_VERDICT = re.compile(r"VERDICT:\s*(YES|NO)\b", re.IGNORECASE)
_CODE = re.compile(r"```(?:python|py)?[ \t]*\n(.*?)```", re.DOTALL)


def parse_verdict(text: str) -> bool | None:
    """Last VERDICT line wins; None when there is none."""
    hits = _VERDICT.findall(text or "")
    if not hits:
        return None
    return hits[-1].upper() == "YES"


def parse_response(text: str) -> tuple[str | None, str | None, str | None]:
    """Split a generation response into (description, code, error)."""
    if not text or not text.strip():
        return None, None, "empty response"
    m = _CODE.search(text)
    if m is None:
        return None, None, "missing code block"
    code = m.group(1)
    outside = text[: m.start()] + text[m.end():]
    d = re.search(r"\{(.*?)\}", outside, re.DOTALL)
    if d is None or not d.group(1).strip():
        return None, code, "missing description in braces"
    return " ".join(d.group(1).split()), code, None


def description_of(source: str) -> str:
    """Brace-enclosed description inside a source file's docstring, if any."""
    m = re.search(r"\{(.*?)\}", source, re.DOTALL)
    return " ".join(m.group(1).split()) if m else ""
