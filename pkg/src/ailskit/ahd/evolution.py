"""Evolutionary search over ruin heuristics with a language model as variation operator."""

from __future__ import annotations

import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from ..bks import gap_percent, instance_key, load_bks
from ..engine import AilsParams, Budget, run
from ..instance import parse_instance
from .population import (HeuristicCandidate, Population, early_stop_probability, judge_candidate,
                         judge_metrics, select_parents, update_population)
from .prompts import PARENT_COUNT, build_prompt, description_of, parse_response
from .provider import ProviderError, ProviderExhausted
from .runtime import CandidateError, CandidateHeuristic, CandidateRunner, check_source

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
SEEDS_DIR = Path(__file__).parent / "seeds"

EVAL_INSTANCES = ("X-n251-k28", "X-n256-k16", "X-n275-k28", "X-n359-k29", "X-n411-k19",
                  "X-n459-k26", "X-n561-k42", "X-n613-k62", "X-n701-k44", "X-n783-k48")


def data_dir(explicit=None) -> Path:
    return Path(explicit or os.environ.get("AILSKIT_DATA", "data"))


def find_instance(name: str, directory=None) -> Path:
    """Resolve an instance id under the data directory; an existing file path is used as is."""
    if Path(name).is_file():
        return Path(name)
    d = data_dir(directory)
    for cand in (d / f"{name}.vrp", d / name):
        if cand.is_file():
            return cand
    raise FileNotFoundError(f"instance {name} not found under {d} (set AILSKIT_DATA or --data-dir)")


@dataclass
class EvalConfig:
    instances: tuple[str, ...] = EVAL_INSTANCES
    data_dir: str | None = None
    seeds: tuple[int, ...] = (0, 1)
    seconds: float | None = 30.0
    iterations: int | None = None
    workers: int = 1
    strict: bool = True
    bks_file: str | None = None  # shipped table when unset


@dataclass
class EvolutionConfig:
    pop_size: int = 25
    generations: int = 10
    operators: tuple[str, ...] = ("O1", "O2", "O3", "O4")
    offspring_per_operator: int | None = None  # defaults to pop_size
    judge_votes: int = 0  # 0 disables judging
    label_skipped: bool = False
    early_stop: bool = True
    p_lo: float = 0.05
    seed: int = 0
    gen_temperature: float = 1.0
    judge_temperature: float = 0.7
    retries: int = 2
    eval: EvalConfig = field(default_factory=EvalConfig)

    @property
    def offspring(self) -> int:
        return self.offspring_per_operator or self.pop_size

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvolutionConfig":
        d = dict(d)
        ev = EvalConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.pop("eval", {}).items()})
        if "operators" in d:
            d["operators"] = tuple(d["operators"])
        return cls(eval=ev, **d)


@dataclass
class EvalOutcome:
    runs: list[tuple[str, int, float]]
    status: str  # evaluated | early-stopped | invalid
    reason: str = ""


class Evaluator(Protocol):
    def __call__(self, cand: HeuristicCandidate, worst: float | None,
                 rng: np.random.Generator) -> EvalOutcome: ...


def should_stop(gap_pct: float, worst: float | None, p_lo: float, rng: np.random.Generator) -> bool:
    """Early-stopping draw after a run; only runs worse than the worst member can stop."""
    if worst is None or gap_pct <= worst:
        return False
    return bool(rng.random() < early_stop_probability(gap_pct / 100.0, p_lo))


def _one_run(path: str, inst_path: str, bks: float, seed: int, seconds, iterations, strict) -> tuple:
    inst = parse_instance(inst_path)
    runner = CandidateRunner(path)
    try:
        h = CandidateHeuristic(runner, token=inst.name, strict=strict)
        res = run(inst, AilsParams(seed=seed), h, Budget(seconds=seconds, iterations=iterations))
        return gap_percent(res.cost, bks), None
    except CandidateError as exc:
        return None, f"{exc.reason}: {exc.detail}"[:300]
    finally:
        runner.close()


class HarnessEvaluator:
    """Runs AILS with the candidate on every (instance, seed) pair in order and
    averages the gaps. Runs are dispatched to `workers` processes; results
    are consumed in order so early stopping stays deterministic."""

    def __init__(self, cfg: EvalConfig, p_lo: float = 0.05, early_stop: bool = True, workdir=None):
        self.cfg = cfg
        self.p_lo = p_lo
        self.early_stop = early_stop
        self.workdir = Path(workdir or tempfile.mkdtemp(prefix="ailskit-cand-"))
        self.workdir.mkdir(parents=True, exist_ok=True)
        bks = load_bks(cfg.bks_file)
        self.jobs = []
        for ident in cfg.instances:
            path = find_instance(ident, cfg.data_dir)
            name = instance_key(path)
            if name not in bks:
                raise KeyError(f"no best-known value for {name}")
            for s in cfg.seeds:
                self.jobs.append((name, str(path), bks[name], int(s)))

    def __call__(self, cand, worst, rng):
        path = self.workdir / f"candidate_{cand.id:05d}.py"
        path.write_text(cand.source)
        args = [(str(path), p, b, s, self.cfg.seconds, self.cfg.iterations, self.cfg.strict)
                for _, p, b, s in self.jobs]
        runs: list[tuple[str, int, float]] = []
        pool = ProcessPoolExecutor(self.cfg.workers) if self.cfg.workers > 1 else None
        try:
            futures = [pool.submit(_one_run, *a) for a in args] if pool else None
            for i, (name, _, _, seed) in enumerate(self.jobs):
                gap, err = futures[i].result() if pool else _one_run(*args[i])
                if err is not None:
                    return EvalOutcome(runs, "invalid", err)
                runs.append((name, seed, gap))
                if self.early_stop and should_stop(gap, worst, self.p_lo, rng):
                    return EvalOutcome(runs, "early-stopped", f"stopped after {len(runs)} runs")
        finally:
            if pool:
                pool.shutdown(wait=False, cancel_futures=True)
        return EvalOutcome(runs, "evaluated")


@dataclass
class EvolutionResult:
    population: Population
    events: list[dict]
    archive: list[HeuristicCandidate]

    def best_curve(self) -> list[tuple[int, float]]:
        """(number of generated samples, best fitness) after each event."""
        return [(e["seq"], e["best"]) for e in self.events]

    def judge_report(self):
        recs = [(e["truth"], e["decision"]) for e in self.events
                if e.get("decision") is not None and e.get("truth") is not None]
        return judge_metrics(recs)


def load_seed_candidates(names=("seed",)) -> list[HeuristicCandidate]:
    out = []
    for i, name in enumerate(names):
        src = (SEEDS_DIR / f"{name}.py").read_text()
        out.append(HeuristicCandidate(id=i, description=description_of(src), source=src,
                                      operator="seed"))
    return out


def generate_offspring(provider, prompt: str, cand_id: int, temperature: float = 1.0,
                       retries: int = 2) -> HeuristicCandidate:
    """Ask the provider for one heuristic; failures yield an invalid candidate."""
    text = None
    err = ""
    for _ in range(retries + 1):
        try:
            text = provider.complete(prompt, role="generate", temperature=temperature)
            break
        except ProviderError as exc:
            err = f"provider error: {exc}"
    if text is None:
        return HeuristicCandidate(cand_id, "", "", status="invalid", reason=err)
    desc, code, perr = parse_response(text)
    if perr is not None:
        return HeuristicCandidate(cand_id, desc or "", code or "", status="invalid", reason=perr)
    bad = check_source(code)
    if bad is not None:
        return HeuristicCandidate(cand_id, desc, code, status="invalid", reason=bad)
    return HeuristicCandidate(cand_id, desc, code)


class Checkpoint:
    def __init__(self, path):
        self.path = Path(path)

    def save(self, data: dict) -> None:
        data = dict(data, version=CHECKPOINT_VERSION)
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(json.dumps(data))
        os.replace(tmp, self.path)

    def load(self) -> dict:
        data = json.loads(self.path.read_text())
        if data.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {data.get('version')}")
        return data


class StopRequested(Exception):
    pass


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def run_evolution(provider, cfg: EvolutionConfig, evaluator: Evaluator | None = None,
                  seeds: list[HeuristicCandidate] | None = None, checkpoint=None,
                  resume: bool = False, stop_after: int | None = None,
                  on_event: Callable[[dict], None] | None = None) -> EvolutionResult:
    """Generate, screen, evaluate and select heuristics for cfg.generations rounds.

    Each generation applies every operator cfg.offspring times. A checkpoint,
    if given, is rewritten after every candidate; on provider exhaustion it
    holds the state just before the failed request and the error propagates.
    `stop_after` ends the run early after that many events (for resume tests)."""
    evaluator = evaluator or HarnessEvaluator(cfg.eval, cfg.p_lo, cfg.early_stop)
    ckpt = Checkpoint(checkpoint) if checkpoint else None
    rng = np.random.default_rng(cfg.seed)

    if resume:
        if ckpt is None:
            raise ValueError("resume needs a checkpoint path")
        data = ckpt.load()
        pop = Population(cfg.pop_size, [HeuristicCandidate.from_dict(c) for c in data["population"]])
        archive = [HeuristicCandidate.from_dict(c) for c in data["archive"]]
        events = data["events"]
        rng.bit_generator.state = data["rng"]
        provider.restore(data["provider"])
        pos = tuple(data["position"])
        next_id = data["next_id"]
        seen = set(data["seen"])
    else:
        pop = Population(cfg.pop_size)
        archive = []
        events = []
        seen = set()
        for c in seeds if seeds is not None else load_seed_candidates():
            out = evaluator(c, None, rng)
            c.set_result(out.runs, out.status)
            c.reason = out.reason
            archive.append(c)
            seen.add(c.hash)
            if c.status == "evaluated":
                update_population(pop, c)
        if len(pop) == 0:
            raise RuntimeError("no seed heuristic could be evaluated")
        next_id = max(c.id for c in archive) + 1
        pos = (0, 0, 0)

    def snapshot(position):
        return {
            "config": cfg.to_dict(),
            "population": [c.to_dict() for c in pop],
            "archive": [c.to_dict() for c in archive],
            "events": events,
            "rng": _rng_state(rng),
            "provider": provider.state(),
            "position": list(position),
            "next_id": next_id,
            "seen": sorted(seen),
        }

    positions = [(g, oi, k) for g in range(cfg.generations)
                 for oi in range(len(cfg.operators)) for k in range(cfg.offspring)]
    start = positions.index(pos) if pos in positions else len(positions)
    if ckpt:
        ckpt.save(snapshot(positions[start] if start < len(positions) else (cfg.generations, 0, 0)))

    for idx in range(start, len(positions)):
        g, oi, k = positions[idx]
        op = cfg.operators[oi]
        if stop_after is not None and len(events) >= stop_after:
            break
        saved = snapshot((g, oi, k)) if ckpt else None
        try:
            parents = select_parents(pop, min(PARENT_COUNT[op], len(pop)), rng)
            prompt = build_prompt(parents, op).text
            cand = generate_offspring(provider, prompt, next_id, cfg.gen_temperature, cfg.retries)
            cand.generation, cand.operator, cand.parents = g + 1, op, tuple(p.id for p in parents)
            worst = pop.worst.fitness if pop.full else None
            decision = None
            votes = None
            if cand.status != "invalid" and cand.hash in seen:
                cand.status, cand.reason = "invalid", "duplicate source"
            if cand.status != "invalid" and cfg.judge_votes > 0 and pop.full:
                verdict = judge_candidate(provider, cand, pop, cfg.judge_votes, cfg.judge_temperature)
                decision, votes = verdict.decision, verdict.votes
        except ProviderExhausted:
            if ckpt:
                ckpt.save(saved)
            raise
        next_id += 1
        truth = None
        if cand.status != "invalid":
            seen.add(cand.hash)
            if decision is False:
                cand.status = "judged-skip"
                if cfg.label_skipped:
                    out = evaluator(cand, None, np.random.default_rng([cfg.seed, cand.id]))
                    if out.status == "evaluated":
                        truth = float(np.mean([x[2] for x in out.runs])) < worst
                        cand.per_instance = [tuple(r) for r in out.runs]
            else:
                out = evaluator(cand, worst if cfg.early_stop else None, rng)
                cand.set_result(out.runs, out.status)
                cand.reason = out.reason
                if cand.status == "evaluated":
                    if worst is not None:
                        truth = cand.fitness < worst
                    update_population(pop, cand)
                elif cand.status == "early-stopped" and worst is not None:
                    truth = False
        archive.append(cand)
        ev = {
            "seq": len(events) + 1,
            "generation": g + 1,
            "operator": op,
            "candidate": cand.id,
            "parents": list(cand.parents),
            "status": cand.status,
            "fitness": cand.fitness,
            "reason": cand.reason,
            "votes": votes,
            "decision": decision,
            "truth": truth,
            "best": pop.best.fitness,
            "worst": pop.worst.fitness,
            "population": pop.ids(),
        }
        events.append(ev)
        if on_event:
            on_event(ev)
        if ckpt:
            nxt = positions[idx + 1] if idx + 1 < len(positions) else (cfg.generations, 0, 0)
            ckpt.save(snapshot(nxt))
    return EvolutionResult(pop, events, archive)
