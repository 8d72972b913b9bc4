"""Candidates, the elitist population, parent selection, judging and early stopping."""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .prompts import build_judge_prompt, parse_verdict

logger = logging.getLogger(__name__)

SCORE_EPS = 1e-3
STATUSES = ("pending", "judged-skip", "early-stopped", "evaluated", "invalid")


def source_hash(source: str) -> str:
    return hashlib.sha256(source.encode()).hexdigest()


@dataclass
class HeuristicCandidate:
    id: int
    description: str
    source: str
    generation: int = 0
    operator: str = "seed"
    parents: tuple[int, ...] = ()
    status: str = "pending"
    fitness: float | None = None
    per_instance: list[tuple[str, int, float]] = field(default_factory=list)
    reason: str = ""

    @property
    def hash(self) -> str:
        return source_hash(self.source)

    def set_result(self, runs: list[tuple[str, int, float]], status: str = "evaluated") -> None:
        self.per_instance = [tuple(r) for r in runs]
        self.status = status
        if status == "evaluated":
            self.fitness = float(np.mean([g for _, _, g in runs]))
        else:
            self.fitness = None

    @property
    def partial_fitness(self) -> float | None:
        if not self.per_instance:
            return None
        return float(np.mean([g for _, _, g in self.per_instance]))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["parents"] = list(self.parents)
        d["per_instance"] = [list(r) for r in self.per_instance]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HeuristicCandidate":
        d = dict(d)
        d["parents"] = tuple(d.get("parents", ()))
        d["per_instance"] = [tuple(r) for r in d.get("per_instance", [])]
        return cls(**d)


class Population:
    """At most `capacity` evaluated candidates, kept sorted by ascending fitness."""

    def __init__(self, capacity: int = 25, members=None):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self.members: list[HeuristicCandidate] = list(members or [])
        self._sort()

    def _sort(self) -> None:
        # stable: earlier arrivals win ties
        self.members.sort(key=lambda c: c.fitness)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def full(self) -> bool:
        return len(self.members) >= self.capacity

    @property
    def best(self) -> HeuristicCandidate:
        return self.members[0]

    @property
    def worst(self) -> HeuristicCandidate:
        return self.members[-1]

    def hashes(self) -> set[str]:
        return {c.hash for c in self.members}

    def ids(self) -> list[int]:
        return [c.id for c in self.members]


def update_population(pop: Population, cand: HeuristicCandidate) -> bool:
    """Insert an evaluated candidate, keep the best `capacity`. Returns True if it stayed."""
    if cand.status != "evaluated" or cand.fitness is None:
        raise ValueError("only evaluated candidates enter the population")
    if cand.hash in pop.hashes():
        return False
    pop.members.append(cand)
    pop._sort()
    if len(pop.members) > pop.capacity:
        dropped = pop.members.pop()
        return dropped is not cand
    return True


def selection_probabilities(pop: Population) -> np.ndarray:
    gaps = np.array([max(c.fitness, 0.0) for c in pop.members])
    score = 1.0 / (gaps + SCORE_EPS)
    return score / score.sum()


def select_parents(pop: Population, count: int, rng: np.random.Generator) -> list[HeuristicCandidate]:
    """Sample distinct members without replacement, weighted by 1/(gap + eps)."""
    if len(pop) == 0:
        raise ValueError("empty population")
    if count > len(pop):
        raise ValueError(f"cannot select {count} parents from {len(pop)} members")
    idx = rng.choice(len(pop), size=count, replace=False, p=selection_probabilities(pop))
    return [pop.members[i] for i in idx]


def early_stop_probability(gap: float, p_lo: float = 0.05) -> float:
    """Stopping probability for a run worse than the population's worst;
    gap is fractional (0.5 means 50 %)."""
    if not 0.0 <= p_lo <= 0.9:
        raise ValueError("p_lo must lie in [0, 0.9]")
    return min(p_lo + 0.1, max(p_lo, gap))


# ------------------------------------------------------------------ judging


@dataclass
class JudgeVerdict:
    votes: list[bool]
    reasoning: list[str]
    decision: bool

    @property
    def n(self) -> int:
        return len(self.votes)


def majority(votes: list[bool]) -> bool:
    return sum(votes) * 2 > len(votes)


def judge_candidate(provider, cand: HeuristicCandidate, pop: Population, n: int = 3,
                    temperature: float = 0.7) -> JudgeVerdict:
    """Ask n independent judgments whether cand beats the population's worst.

    Provider errors and unparseable replies count as YES so that
    infrastructure trouble never discards a candidate."""
    if n < 1 or n % 2 == 0:
        raise ValueError("vote count must be a positive odd number")
    if len(pop) == 0:
        return JudgeVerdict([], [], True)
    prompt = build_judge_prompt(cand, pop.worst)

    def one(_):
        try:
            text = provider.complete(prompt, role="judge", temperature=temperature)
        except Exception as exc:
            from .provider import ProviderExhausted

            if isinstance(exc, ProviderExhausted):
                raise
            logger.warning("judge vote failed, counting it as yes: %s", exc)
            return True, f"<provider error: {exc}>"
        v = parse_verdict(text)
        return (True if v is None else v), text

    if getattr(provider, "concurrent", False) and n > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            results = list(ex.map(one, range(n)))
    else:
        results = [one(i) for i in range(n)]
    votes = [v for v, _ in results]
    return JudgeVerdict(votes, [t for _, t in results], majority(votes))


@dataclass(frozen=True)
class JudgeReport:
    tt: float
    tf: float
    ft: float
    ff: float
    accuracy: float
    retention: float
    count: int

    def format(self) -> str:
        return (f"TT {self.tt:.1f}  TF {self.tf:.1f}  FT {self.ft:.1f}  FF {self.ff:.1f}  "
                f"accuracy {self.accuracy:.1f}  good-candidate retention {self.retention:.1f}  (n={self.count})")


def judge_metrics(records) -> JudgeReport:
    """Confusion percentages of judge decisions.

    Each record is (truth, predicted): truth says whether the candidate in
    fact beat the population's worst, predicted is the judge decision. The
    first letter of each cell is the truth. `retention` is TT/(TT+TF), the
    share of truly better candidates the judge let through."""
    records = list(records)
    if not records:
        raise ValueError("no judged candidates to report on")
    tt = sum(1 for t, p in records if t and p)
    tf = sum(1 for t, p in records if t and not p)
    ft = sum(1 for t, p in records if not t and p)
    ff = sum(1 for t, p in records if not t and not p)
    m = len(records)
    pct = lambda k: 100.0 * k / m  # noqa: E731
    retention = 100.0 * tt / (tt + tf) if tt + tf else float("nan")
    return JudgeReport(pct(tt), pct(tf), pct(ft), pct(ff), pct(tt + ff), retention, m)
