"""Adaptive iterated local search main loop."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as K
from .instance import Instance, min_routes
from .localsearch import LocalSearchConfig, descend, repair
from .ruin import (RuinContext, SanitationStats, get_heuristic, recreate, remove_all,
                   run_heuristic)
from .solution import LinkedSolution, cost_recompute, solution_distance

logger = logging.getLogger(__name__)

DK_FLOOR = 1e-6


@dataclass
class AilsParams:
    d_min: float = 10.0
    d_max: float = 50.0
    gamma: int = 30
    eta: float = 0.1
    omega0: float | None = None  # defaults to round(d_max)
    seed: int = 0
    ls: LocalSearchConfig = field(default_factory=LocalSearchConfig)

    def __post_init__(self):
        if not 0 < self.d_min <= self.d_max:
            raise ValueError("need 0 < d_min <= d_max")
        if self.gamma < 1:
            raise ValueError("gamma must be at least 1")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.omega0 is None:
            self.omega0 = float(round(self.d_max))
        if self.omega0 < 1:
            raise ValueError("omega0 must be at least 1")


@dataclass(frozen=True)
class Budget:
    """Stop after `seconds` of wall clock or `iterations` loop turns, whichever comes first."""

    seconds: float | None = None
    iterations: int | None = None

    def __post_init__(self):
        if self.seconds is None and self.iterations is None:
            raise ValueError("a budget needs seconds or iterations")
        if self.seconds is not None and self.seconds <= 0:
            raise ValueError("time budget must be positive")
        if self.iterations is not None and self.iterations < 0:
            raise ValueError("iteration budget must be nonnegative")


# ------------------------------------------------------------------ adaptive updates


def update_omega(omega: float, d_r: float, d_k: float, n: int) -> float:
    """Scale the perturbation degree by d_r/d_k, capped at n when growing and
    floored at 1 when shrinking."""
    w = omega * d_r / max(d_k, DK_FLOOR)
    if d_r > d_k:
        return min(w, float(n))
    return max(w, 1.0)


def update_dr(d_r: float, it: int, d_min: float, d_max: float) -> float:
    """Exponential decay of the reference distance toward d_min."""
    v = d_r * (d_min / d_max) ** (1.0 / it)
    return min(max(v, d_min), d_max)


def update_dk(d_k: float, dist: float, it: int, gamma: int) -> float:
    """Smoothed observed distance; weight 1/it early, 1/gamma afterwards."""
    w = 1.0 / it if it < gamma else 1.0 / gamma
    return (1.0 - w) * d_k + w * dist


def acceptance_threshold(f_min: float, f_mean: float, eta: float) -> float:
    return f_min + eta * (f_mean - f_min)


def number_select(omega: float, n: int) -> int:
    return int(min(max(round(omega), 1), n - 1))


@dataclass
class AilsState:
    it: int
    omega: float
    d_r: float
    d_k: float
    f_min: float
    f_mean: float
    n_obs: int
    reference: LinkedSolution
    best: LinkedSolution
    log: list[tuple[float, int, int]] = field(default_factory=list)
    trace: list[tuple[int, float, float, float]] = field(default_factory=list)

    def observe(self, f: float) -> None:
        self.n_obs += 1
        self.f_min = min(self.f_min, f)
        self.f_mean += (f - self.f_mean) / self.n_obs

    def threshold(self, eta: float) -> float:
        return acceptance_threshold(self.f_min, self.f_mean, eta)


@dataclass
class RunResult:
    best: LinkedSolution
    log: list[tuple[float, int, int]]
    iterations: int
    elapsed: float
    state: AilsState
    sanitation: SanitationStats

    @property
    def cost(self) -> int:
        return self.best.cost


# ------------------------------------------------------------------ construction


def initialize(inst: Instance, params: AilsParams, rng: np.random.Generator) -> LinkedSolution:
    """Open the minimum number of routes on random seed customers, insert the
    rest in random order at their cheapest feasible slots, then repair and descend."""
    sol = LinkedSolution(inst)
    nr = min(min_routes(inst), inst.n - 1)
    perm = rng.permutation(np.arange(1, inst.n, dtype=np.int64))
    for v in perm[:nr]:
        r = sol.open_route()
        sol.insert_node(int(v), sol.anchor(r))
    D, xy, q = sol.kdata
    K.recreate(sol.st, D, xy, q, inst.capacity, inst.knn.lists, perm[nr:], False)
    repair(sol, params.ls)
    descend(sol, params.ls)
    return sol


# ------------------------------------------------------------------ main loop


def run(inst: Instance, params: AilsParams, heuristic: Callable | str = "seed",
        budget: Budget | None = None, on_iteration: Callable[[AilsState], None] | None = None,
        check: bool = False) -> RunResult:
    """Iterate ruin, recreate, repair and descent from an initial solution.

    The acceptance threshold is taken from the objective statistics before
    the current iteration's value is added, so eta = 0 accepts only strict
    improvements over the best value seen.
    """
    budget = budget or Budget(seconds=3.0 * inst.n)
    if isinstance(heuristic, str):
        heuristic = get_heuristic(heuristic)
    t0 = time.perf_counter()
    deadline = t0 + budget.seconds if budget.seconds is not None else math.inf
    max_it = budget.iterations if budget.iterations is not None else math.inf
    rng = np.random.default_rng(params.seed)
    stats = SanitationStats()

    ref = initialize(inst, params, rng)
    f0 = float(ref.cost)
    state = AilsState(it=1, omega=float(params.omega0), d_r=float(params.d_max), d_k=float(params.d_max),
                      f_min=f0, f_mean=f0, n_obs=1, reference=ref, best=ref.copy())
    state.log.append((time.perf_counter() - t0, 0, ref.cost))
    n = inst.n
    done = 0
    while done < max_it and time.perf_counter() < deadline:
        s = state.reference.copy()
        ctx = RuinContext.from_solution(s, number_select(state.omega, n), int(rng.integers(0, 2**63 - 1)))
        res = run_heuristic(heuristic, ctx, stats)
        remove_all(s, res.selected)
        mode = "nearest" if rng.random() < 0.5 else "best"
        recreate(s, res.selected, mode, rng)
        repair(s, params.ls)
        descend(s, params.ls)
        f = s.cost
        if check:
            assert f == cost_recompute(s) and s.violation().excess == 0
        if f < state.best.cost:
            state.best = s.copy()
            state.log.append((time.perf_counter() - t0, state.it, f))
        theta = state.threshold(params.eta)
        state.observe(float(f))
        dist = solution_distance(s, state.reference)
        state.d_k = update_dk(state.d_k, dist, state.it, params.gamma)
        state.omega = update_omega(state.omega, state.d_r, state.d_k, n)
        state.d_r = update_dr(state.d_r, state.it, params.d_min, params.d_max)
        state.trace.append((f, state.omega, state.d_r, state.d_k))
        state.it += 1
        if f < theta:
            state.reference = s
        done += 1
        if on_iteration is not None:
            on_iteration(state)
    elapsed = time.perf_counter() - t0
    if stats.total():
        logger.info("ruin sanitation events: %s", dict(stats.counts))
    return RunResult(state.best, state.log, done, elapsed, state, stats)


def write_convergence(path, log) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["elapsed_s", "iteration", "best_cost"])
        for t, it, c in log:
            w.writerow([f"{t:.3f}", it, c])
