"""Command-line harness: solve, compare, ablate-lambda, evolve, verify-sol."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .bks import gap_percent, instance_key, load_bks
from .engine import AilsParams, Budget, run
from .instance import parse_instance, parse_solution, route_list_cost, write_solution
from .localsearch import LocalSearchConfig
from .ruin import BUILTINS, DEFAULT_EN_STEP, get_heuristic
from .stats import (RunRecord, compare_records, markdown_summary, read_runs, summarize,
                    write_convergence_rows, write_runs)

logger = logging.getLogger("ailskit")

PARAM_KEYS = {f.name for f in fields(AilsParams)} - {"ls", "seed"}
LS_KEYS = {f.name for f in fields(LocalSearchConfig)}


# ------------------------------------------------------------------ config


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path) -> dict:
    """Flat settings from a JSON object or `key = value` lines (`#` comments).

    Evaluation settings use an `eval.` prefix, e.g. `eval.seconds = 30`."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        flat = {k: v for k, v in data.items() if k != "eval"}
        flat.update({f"eval.{k}": v for k, v in data.get("eval", {}).items()})
        return flat
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip()] = _value(val.strip())
    return out


def params_from_config(cfg: dict, seed: int = 0) -> AilsParams:
    ls = {k: cfg[k] for k in LS_KEYS if k in cfg}
    if "operators" in ls:
        ls["operators"] = tuple(ls["operators"])
    unknown = set(cfg) - PARAM_KEYS - LS_KEYS - _EVOLVE_KEYS - {"en_step"} - {k for k in cfg if k.startswith("eval.")}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return AilsParams(seed=seed, ls=LocalSearchConfig(**ls), **{k: cfg[k] for k in PARAM_KEYS if k in cfg})


# ------------------------------------------------------------------ solve


def resolve_heuristic(spec: str, inst_name: str, en_step: float = DEFAULT_EN_STEP):
    """Returns (heuristic, closer). `candidate:<file>` is hosted in a child process."""
    if spec.startswith("candidate:"):
        from .ahd.runtime import CandidateHeuristic, CandidateRunner

        path = spec.split(":", 1)[1]
        if not Path(path).is_file():
            raise ValueError(f"candidate file {path} not found")
        runner = CandidateRunner(path)
        return CandidateHeuristic(runner, token=inst_name, strict=False), runner.close
    return get_heuristic(spec, en_step), None


def check_heuristic_id(spec: str) -> None:
    if spec.startswith("candidate:"):
        if not Path(spec.split(":", 1)[1]).is_file():
            raise ValueError(f"candidate file {spec.split(':', 1)[1]} not found")
    elif spec.lower() not in BUILTINS:
        raise ValueError(f"unknown heuristic {spec!r}; choose from {sorted(BUILTINS)} or candidate:<file>")


def solve_one(inst_path: str, heuristic: str, seed: int, seconds, iterations, cfg: dict,
              bks_value=None, label: str | None = None, sol_path: str | None = None) -> RunRecord:
    inst = parse_instance(inst_path)
    params = params_from_config(cfg, seed)
    h, close = resolve_heuristic(heuristic, inst.name, float(cfg.get("en_step", DEFAULT_EN_STEP)))
    try:
        t0 = time.perf_counter()
        res = run(inst, params, h, Budget(seconds=seconds, iterations=iterations))
        wall = time.perf_counter() - t0
    finally:
        if close:
            close()
    if sol_path:
        write_solution(sol_path, res.best.routes(), res.cost)
    gap = gap_percent(res.cost, bks_value) if bks_value is not None else None
    return RunRecord(instance_key(inst_path), label or heuristic, seed, seconds, res.iterations,
                     res.cost, gap, wall, [(float(t), int(i), int(c)) for t, i, c in res.log])


def _budget_for(n: int, args) -> tuple[float | None, int | None]:
    if args.seconds is None and args.iterations is None:
        return (10.0 if args.bks_hunt else 3.0) * n, None
    return args.seconds, args.iterations


def run_jobs(jobs, workers: int) -> list[RunRecord]:
    """Run solve_one over jobs; the result order follows the job order."""
    if workers <= 1 or len(jobs) <= 1:
        return [solve_one(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(solve_one, *j) for j in jobs]
        return [f.result() for f in futs]


def _instance_size(path: str) -> int:
    for line in Path(path).read_text().splitlines():
        if line.strip().upper().startswith("DIMENSION"):
            return int(line.split(":")[-1])
    raise ValueError(f"{path}: no DIMENSION line")


def cmd_solve(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    if args.en_step is not None:
        cfg["en_step"] = args.en_step
    for h in args.heuristic:
        check_heuristic_id(h)
    bks = load_bks(args.bks)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for path in args.instances:
        key = instance_key(path)
        if key not in bks:
            logger.warning("no best-known value for %s; gap omitted", key)
        seconds, iterations = _budget_for(_instance_size(path), args)
        for h in args.heuristic:
            label = Path(h.split(":", 1)[1]).stem if h.startswith("candidate:") else h.lower()
            for i in range(args.runs):
                sol = str(out / f"{key}__{label}__seed{args.seed0 + i}.sol") if args.write_solutions else None
                jobs.append((path, h, args.seed0 + i, seconds, iterations, cfg, bks.get(key), label, sol))
    workers = args.workers or min(len(jobs), os.cpu_count() or 1)
    records = run_jobs(jobs, workers)
    write_runs(out / "runs.csv", records)
    write_convergence_rows(out / "convergence.csv", records)
    (out / "summary.md").write_text(markdown_summary(records, bks))
    for s in summarize(records):
        line = f"{s['instance']} {s['heuristic']}: cost {s['mean']:.2f} ± {s['std']:.2f} (best {s['best']})"
        if s["gap_mean"] is not None:
            line += f", gap {s['gap_mean']:.4f}% ± {s['gap_std']:.4f}%"
        print(line)
    print(f"wrote {out / 'runs.csv'}, {out / 'convergence.csv'}, {out / 'summary.md'}")
    return 0


# ------------------------------------------------------------------ compare


def cmd_compare(args) -> int:
    a = read_runs(args.a)
    b = read_runs(args.b)
    cmp = compare_records(a, b, args.alpha)
    text = cmp.format(args.label_a or Path(args.a).stem, args.label_b or Path(args.b).stem)
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text)
    return 0


# ------------------------------------------------------------------ ablation


def dedupe_values(values) -> list[float]:
    out = []
    for v in values:
        if v in out:
            warnings.warn(f"duplicate lambda value {v} ignored", stacklevel=2)
            continue
        out.append(v)
    return out


def cmd_ablate(args) -> int:
    values = dedupe_values(args.values)
    if not values or any(v <= 0 for v in values):
        raise ValueError("lambda values must be positive and nonempty")
    cfg = load_config(args.config) if args.config else {}
    bks = load_bks(args.bks)
    jobs, meta = [], []
    for lam in values:
        c = dict(cfg, en_step=lam)
        for path in args.instances:
            key = instance_key(path)
            seconds, iterations = _budget_for(_instance_size(path), args)
            for i in range(args.runs):
                jobs.append((path, "en", args.seed0 + i, seconds, iterations, c, bks.get(key), f"en-{lam:g}"))
                meta.append((lam, key, i))
    records = run_jobs(jobs, args.workers or min(len(jobs), os.cpu_count() or 1))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "instance", "run", "gap", "cost"])
        for (lam, key, i), r in zip(meta, records):
            w.writerow([f"{lam:g}", key, i, "" if r.gap is None else repr(r.gap), r.best_cost])
    for lam in values:
        gaps = [r.gap for (l, _, _), r in zip(meta, records) if l == lam and r.gap is not None]
        costs = [r.best_cost for (l, _, _), r in zip(meta, records) if l == lam]
        med = f"median gap {np.median(gaps):.4f}%" if gaps else f"median cost {np.median(costs):.1f}"
        print(f"lambda {lam:g}: {med} over {len(costs)} runs")
    print(f"wrote {out}")
    return 0


# ------------------------------------------------------------------ evolve

_EVOLVE_KEYS = {"pop_size", "generations", "operators", "offspring_per_operator", "judge_votes",
                "label_skipped", "early_stop", "p_lo", "gen_temperature", "judge_temperature",
                "retries", "base_url", "model", "api_key_env"}


def evolution_config(cfg: dict, args):
    from .ahd.evolution import EvalConfig, EvolutionConfig

    ev = {k[5:]: v for k, v in cfg.items() if k.startswith("eval.")}
    for k in ("instances", "seeds"):
        if k in ev:
            ev[k] = tuple(ev[k])
    top = {k: v for k, v in cfg.items() if k in _EVOLVE_KEYS - {"base_url", "model", "api_key_env"}}
    if "operators" in top:
        top["operators"] = tuple(top["operators"])
    ec = EvolutionConfig(eval=EvalConfig(**ev), **top)
    over = {k: getattr(args, k) for k in ("pop_size", "generations", "judge_votes", "seed")
            if getattr(args, k) is not None}
    ec = replace(ec, **over)
    ev_over = {}
    if args.eval_instances:
        ev_over["instances"] = tuple(args.eval_instances)
    if args.eval_seeds:
        ev_over["seeds"] = tuple(args.eval_seeds)
    if args.eval_seconds is not None:
        ev_over["seconds"] = args.eval_seconds
    if args.eval_iterations is not None:
        ev_over["iterations"] = args.eval_iterations
        if args.eval_seconds is None:
            ev_over["seconds"] = None
    if args.data_dir:
        ev_over["data_dir"] = args.data_dir
    if args.bks:
        ev_over["bks_file"] = args.bks
    if args.workers:
        ev_over["workers"] = args.workers
    return replace(ec, eval=replace(ec.eval, **ev_over))


def cmd_evolve(args) -> int:
    from .ahd.evolution import run_evolution
    from .ahd.provider import ChatCompletionProvider, MockProvider, ProviderExhausted

    cfg = load_config(args.config) if args.config else {}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.mock_fixtures:
        provider = MockProvider(args.mock_fixtures)
    else:
        base_url = args.base_url or cfg.get("base_url")
        model = args.model or cfg.get("model")
        key_env = args.api_key_env or cfg.get("api_key_env", "AILSKIT_API_KEY")
        if not os.environ.get(key_env):
            print(f"error: environment variable {key_env} is not set (needed for the live provider)",
                  file=sys.stderr)
            return 2
        if not base_url or not model:
            print("error: live mode needs --base-url and --model", file=sys.stderr)
            return 2
        provider = ChatCompletionProvider(base_url, model, key_env, transcript_dir=out / "transcripts")
    ecfg = evolution_config(cfg, args)
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "checkpoint.json"
    log = open(out / "events.jsonl", "a" if args.resume else "w")

    def on_event(ev):
        log.write(json.dumps(ev) + "\n")
        log.flush()
        fit = "-" if ev["fitness"] is None else f"{ev['fitness']:.4f}"
        print(f"[{ev['seq']}] gen {ev['generation']} {ev['operator']} cand {ev['candidate']}: "
              f"{ev['status']} fitness {fit} best {ev['best']:.4f}")

    try:
        res = run_evolution(provider, ecfg, checkpoint=ckpt, resume=args.resume, on_event=on_event)
    except ProviderExhausted as exc:
        print(f"provider exhausted ({exc}); state saved to {ckpt}, continue with --resume", file=sys.stderr)
        return 3
    finally:
        log.close()
    with open(out / "best_curve.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["samples", "best_fitness"])
        w.writerows((s, repr(b)) for s, b in res.best_curve())
    (out / "population.json").write_text(json.dumps([c.to_dict() for c in res.population], indent=1))
    best = res.population.best
    (out / "best_heuristic.py").write_text(best.source)
    print(f"best candidate {best.id}: fitness {best.fitness:.4f}")
    try:
        print("judge: " + res.judge_report().format())
    except ValueError:
        pass
    return 0


# ------------------------------------------------------------------ verify


def cmd_verify(args) -> int:
    inst = parse_instance(args.instance)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = parse_solution(args.solution, inst)
    loads = [sum(int(inst.demands[v]) for v in r) for r in sol.routes]
    over = [(k + 1, l) for k, l in enumerate(loads) if l > inst.capacity]
    cost = route_list_cost(inst, sol.routes)
    ok = not over and cost == sol.cost
    print(f"{inst.name}: {len(sol.routes)} routes, recomputed cost {cost}, declared {sol.cost}")
    for k, l in over:
        print(f"route {k} load {l} exceeds capacity {inst.capacity}")
    for w in caught:
        print(f"warning: {w.message}")
    bks = load_bks(args.bks)
    if inst.name in bks:
        print(f"gap to best known {bks[inst.name]}: {gap_percent(cost, bks[inst.name]):.4f}%")
    print("feasible" if ok else "INVALID")
    return 0 if ok else 1


# ------------------------------------------------------------------ parser


def _budget_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seconds", type=float, help="wall-clock budget per run (default 3n)")
    p.add_argument("--iterations", type=int, help="iteration budget per run")
    p.add_argument("--bks-hunt", action="store_true", help="default budget 10n seconds instead of 3n")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed0", type=int, default=0, help="run i uses seed0 + i")
    p.add_argument("--workers", type=int, help="parallel runs (default: cpu count)")
    p.add_argument("--config", help="key = value or JSON settings file")
    p.add_argument("--bks", help="best-known value table (default: shipped table)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ailskit", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="run AILS on instances")
    p.add_argument("instances", nargs="+")
    p.add_argument("-H", "--heuristic", action="append",
                   help="seed, en, ddd, pfd, knearest, sequence or candidate:<file>; repeatable")
    p.add_argument("--en-step", type=float, help="expansion step of the en heuristic")
    p.add_argument("--out", default="results")
    p.add_argument("--write-solutions", action="store_true")
    _budget_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="rank-sum comparison of two runs.csv files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--label-a")
    p.add_argument("--label-b")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ablate-lambda", help="gap distribution of en per expansion step")
    p.add_argument("instances", nargs="+")
    p.add_argument("--values", type=float, nargs="+", default=[2, 10, 100, 500, 1000, 1500])
    p.add_argument("--out", default="results/ablation.csv")
    _budget_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("evolve", help="evolve ruin heuristics with a language model")
    p.add_argument("--config")
    p.add_argument("--out", default="evolution")
    p.add_argument("--mock-fixtures", help="replay fixture responses from this directory")
    p.add_argument("--base-url")
    p.add_argument("--model")
    p.add_argument("--api-key-env")
    p.add_argument("--checkpoint")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--pop-size", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--judge-votes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--eval-instances", nargs="+", help="instance ids or .vrp paths")
    p.add_argument("--eval-seeds", type=int, nargs="+")
    p.add_argument("--eval-seconds", type=float)
    p.add_argument("--eval-iterations", type=int)
    p.add_argument("--data-dir")
    p.add_argument("--bks")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("verify-sol", help="check a solution file against an instance")
    p.add_argument("instance")
    p.add_argument("solution")
    p.add_argument("--bks")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "heuristic", "-") is None:
        args.heuristic = ["en"]
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
