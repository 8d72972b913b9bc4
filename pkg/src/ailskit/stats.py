"""Run records, CSV round-trip and significance comparison of solver runs."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

ALPHA = 0.05
EXACT_BELOW = 20

RUN_FIELDS = ("instance", "heuristic", "seed", "budget_s", "iterations", "best_cost", "gap", "wall_time")
CONV_FIELDS = ("instance", "heuristic", "seed", "elapsed_s", "iteration", "best_cost")


@dataclass
class RunRecord:
    instance: str
    heuristic: str
    seed: int
    budget_s: float | None
    iterations: int
    best_cost: int
    gap: float | None
    wall_time: float
    convergence: list[tuple[float, int, int]] = field(default_factory=list)

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.instance, self.heuristic, self.seed)


def _opt(v):
    return "" if v is None else repr(float(v))


def _parse_opt(s: str):
    return None if s == "" else float(s)


def write_runs(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RUN_FIELDS)
        for r in records:
            w.writerow([r.instance, r.heuristic, r.seed, _opt(r.budget_s), r.iterations, r.best_cost,
                        _opt(r.gap), repr(float(r.wall_time))])


def write_convergence_rows(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CONV_FIELDS)
        for r in records:
            for t, it, c in r.convergence:
                w.writerow([r.instance, r.heuristic, r.seed, repr(float(t)), it, c])


def read_runs(path, convergence_path=None) -> list[RunRecord]:
    out = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        missing = set(RUN_FIELDS) - set(rd.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in rd:
            out.append(RunRecord(row["instance"], row["heuristic"], int(row["seed"]),
                                 _parse_opt(row["budget_s"]), int(row["iterations"]),
                                 int(row["best_cost"]), _parse_opt(row["gap"]), float(row["wall_time"])))
    if convergence_path is not None:
        by_key = {r.key: r for r in out}
        with open(convergence_path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = (row["instance"], row["heuristic"], int(row["seed"]))
                by_key[key].convergence.append((float(row["elapsed_s"]), int(row["iteration"]),
                                                int(row["best_cost"])))
    return out


# ------------------------------------------------------------------ significance


def rank_sum_pvalue(a, b) -> float:
    """Two-sided Wilcoxon rank-sum p-value.

    Exact null distribution when both samples are below EXACT_BELOW and
    untied, normal approximation with tie correction otherwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("need at least 2 runs per side")
    both = np.concatenate([a, b])
    if np.all(both == both[0]):
        return 1.0
    tied = len(np.unique(both)) < len(both)
    method = "exact" if max(len(a), len(b)) < EXACT_BELOW and not tied else "asymptotic"
    res = stats.mannwhitneyu(a, b, alternative="two-sided", method=method, use_continuity=False)
    return float(res.pvalue)


def compare_samples(a, b, alpha: float = ALPHA) -> str:
    """'+' when sample a (costs) is significantly lower than b, '-' when higher, '=' otherwise."""
    return _sign(rank_sum_pvalue(a, b), a, b, alpha)


def _sign(p: float, a, b, alpha: float) -> str:
    if p >= alpha:
        return "="
    # direction from the rank-sum statistic itself
    u = stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic").statistic
    return "+" if u < len(a) * len(b) / 2 else "-"


@dataclass
class Comparison:
    rows: list[tuple[str, float, float, float, str]]  # instance, mean a, mean b, p, sign

    @property
    def counts(self) -> tuple[int, int, int]:
        signs = [r[4] for r in self.rows]
        return signs.count("+"), signs.count("-"), signs.count("=")

    def format(self, label_a: str = "A", label_b: str = "B") -> str:
        lines = [f"| Instance | {label_a} mean | {label_b} mean | p-value | {label_a} vs {label_b} |",
                 "|---|---|---|---|---|"]
        for inst, ma, mb, p, s in self.rows:
            lines.append(f"| {inst} | {ma:.2f} | {mb:.2f} | {p:.4g} | {s} |")
        plus, minus, eq = self.counts
        lines.append(f"| (+/-/=) | | | | {plus}/{minus}/{eq} |")
        return "\n".join(lines) + "\n"


def compare_records(a, b, alpha: float = ALPHA) -> Comparison:
    """Per-instance rank-sum comparison of best costs; instances present on both sides only."""
    ga, gb = defaultdict(list), defaultdict(list)
    for r in a:
        ga[r.instance].append(r.best_cost)
    for r in b:
        gb[r.instance].append(r.best_cost)
    common = sorted(set(ga) & set(gb))
    if not common:
        raise ValueError("no instance appears in both record sets")
    rows = []
    for inst in common:
        p = rank_sum_pvalue(ga[inst], gb[inst])
        rows.append((inst, float(np.mean(ga[inst])), float(np.mean(gb[inst])), p,
                     _sign(p, ga[inst], gb[inst], alpha)))
    return Comparison(rows)


# ------------------------------------------------------------------ summaries


def summarize(records) -> list[dict]:
    """Mean and std of cost and gap per (instance, heuristic), in first-seen order."""
    groups: dict[tuple[str, str], list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.instance, r.heuristic), []).append(r)
    out = []
    for (inst, h), rs in groups.items():
        costs = np.array([r.best_cost for r in rs], dtype=float)
        gaps = [r.gap for r in rs if r.gap is not None]
        out.append({
            "instance": inst, "heuristic": h, "runs": len(rs),
            "best": int(costs.min()), "mean": float(costs.mean()),
            "std": float(costs.std(ddof=1)) if len(rs) > 1 else 0.0,
            "gap_mean": float(np.mean(gaps)) if gaps else None,
            "gap_std": float(np.std(gaps, ddof=1)) if len(gaps) > 1 else (0.0 if gaps else None),
            "gap_best": float(min(gaps)) if gaps else None,
        })
    return out


def markdown_summary(records, bks: dict | None = None) -> str:
    bks = bks or {}
    lines = ["| Instance | BKS | Heuristic | Runs | Best | Mean | Std | Gap % (mean) | Gap % (best) |",
             "|---|---|---|---|---|---|---|---|---|"]
    for s in summarize(records):
        b = bks.get(s["instance"])
        g = "-" if s["gap_mean"] is None else f"{s['gap_mean']:.4f}"
        gb = "-" if s["gap_best"] is None else f"{s['gap_best']:.4f}"
        lines.append(f"| {s['instance']} | {'-' if b is None else b} | {s['heuristic']} | {s['runs']} | "
                     f"{s['best']} | {s['mean']:.2f} | {s['std']:.2f} | {g} | {gb} |")
    return "\n".join(lines) + "\n"


def median(values) -> float:
    v = list(values)
    return float(np.median(v)) if v else math.nan
