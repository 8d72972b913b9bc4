import json
from pathlib import Path

import numpy as np
import pytest

from ailskit.ahd.evolution import (EvalConfig, HarnessEvaluator, generate_offspring, load_seed_candidates,
                                   run_evolution, should_stop)
from ailskit.ahd.population import (HeuristicCandidate, Population, early_stop_probability, judge_candidate,
                                    judge_metrics, majority, select_parents, selection_probabilities,
                                    update_population)
from ailskit.ahd.prompts import build_judge_prompt, build_prompt, parse_response, parse_verdict
from ailskit.ahd.provider import MockProvider, ProviderExhausted
from ailskit.ahd.runtime import (CandidateError, CandidateHeuristic, CandidateRunner, check_source,
                                 run_candidate, time_cap)
from ailskit.instance import serialize_instance
from ailskit.ruin import RuinContext, ruin_en
from ailskit.solution import LinkedSolution
from conftest import random_instance, random_routes
import evo_script

FIXTURES = Path(__file__).parent / "fixtures"


def cand(i, fitness, source=None):
    c = HeuristicCandidate(i, f"candidate {i}", source or f"def select_nodes(ctx):\n    return []  # {i}\n")
    c.set_result([("x", 0, fitness)])
    return c


def context(n=30, seed=0, ns=5):
    inst = random_instance(n, seed)
    sol = LinkedSolution.from_routes(inst, random_routes(inst, np.random.default_rng(seed)))
    return RuinContext.from_solution(sol, ns, seed)


# ------------------------------------------------------------------ prompts


def test_prompt_o1_golden():
    parents = load_seed_candidates(("seed", "en"))
    text = build_prompt(parents, "O1").text
    assert text == (FIXTURES / "golden_prompt_O1.txt").read_text()


def test_prompt_o3_contains_parent_code():
    parent = load_seed_candidates(("en",))[0]
    text = build_prompt([parent], "O3").text
    assert parent.source.rstrip() in text and "I have 1 existing heuristic" in text


def test_prompt_preconditions():
    with pytest.raises(ValueError):
        build_prompt([], "O1")
    with pytest.raises(ValueError):
        build_prompt(load_seed_candidates(), "O9")


def test_judge_prompt_mentions_both():
    a, b = cand(1, 2.0), cand(2, 3.0)
    text = build_judge_prompt(a, b)
    assert a.source.rstrip() in text and b.source.rstrip() in text and "3.0000%" in text


def test_parse_response():
    desc, code, err = parse_response("{Take a  ring\n of nodes.}\n```python\ndef select_nodes(ctx):\n    return []\n```\n")
    assert (desc, err) == ("Take a ring of nodes.", None) and code.startswith("def select_nodes")
    assert parse_response("")[2] == "empty response"
    assert parse_response("{idea} but no code")[2] == "missing code block"
    assert parse_response("```python\nx = 1\n```")[2] == "missing description in braces"


def test_parse_verdict():
    assert parse_verdict("reasoning...\nVERDICT: YES") is True
    assert parse_verdict("VERDICT: yes\nthen again\nVERDICT: NO") is False
    assert parse_verdict("I think it is better") is None


def test_check_source():
    assert check_source("def select_nodes(ctx):\n    return []\n") is None
    assert "syntax" in check_source("def select_nodes(ctx)\n")
    assert "no top-level" in check_source("def other(ctx):\n    return []\n")
    assert "accept" in check_source("def select_nodes():\n    return []\n")
    assert check_source("  ") == "empty source"


# ------------------------------------------------------------------ provider


def _write_fixtures(root, role, texts):
    d = root / role
    d.mkdir(parents=True, exist_ok=True)
    for i, (suffix, t) in enumerate(texts):
        (d / f"{i:03d}{suffix}").write_text(t)


def test_mock_provider_replays_and_restores(tmp_path):
    _write_fixtures(tmp_path, "generate", [(".txt", "a"), (".error", "boom"), (".txt", "c")])
    p = MockProvider(tmp_path)
    assert p.complete("x", role="generate") == "a"
    with pytest.raises(Exception, match="boom"):
        p.complete("x", role="generate")
    state = p.state()
    assert p.complete("x", role="generate") == "c"
    with pytest.raises(ProviderExhausted):
        p.complete("x", role="generate")
    with pytest.raises(ProviderExhausted):
        p.complete("x", role="judge")
    p.restore(state)
    assert p.complete("x", role="generate") == "c"


def test_generate_offspring_cases(tmp_path):
    good = "{Ring removal.}\n```python\ndef select_nodes(ctx):\n    return []\n```\n"
    _write_fixtures(tmp_path, "generate", [(".txt", good), (".txt", "{no fence} def select_nodes(ctx): pass"),
                                           (".txt", ""), (".error", "down"), (".txt", good)])
    p = MockProvider(tmp_path)
    c = generate_offspring(p, "prompt", 10)
    assert c.status == "pending" and c.description == "Ring removal."
    assert generate_offspring(p, "prompt", 11).reason == "missing code block"
    assert generate_offspring(p, "prompt", 12).reason == "empty response"
    # the scripted error is retried and the next response is used
    assert generate_offspring(p, "prompt", 13, retries=1).status == "pending"


# ------------------------------------------------------------------ population


def test_selection_probabilities_from_scores():
    # gaps chosen so that 1/(gap + eps) gives scores 3 and 1
    pop = Population(5, [cand(0, 1 / 3 - 1e-3), cand(1, 1 - 1e-3)])
    assert selection_probabilities(pop) == pytest.approx([0.75, 0.25], abs=1e-12)


def test_single_member_always_chosen():
    pop = Population(5, [cand(0, 2.0)])
    rng = np.random.default_rng(0)
    assert all(select_parents(pop, 1, rng)[0].id == 0 for _ in range(20))
    with pytest.raises(ValueError):
        select_parents(pop, 2, rng)
    with pytest.raises(ValueError):
        select_parents(Population(3), 1, rng)


def test_selection_empirical_frequencies():
    pop = Population(4, [cand(i, g) for i, g in enumerate([0.5, 1.0, 2.0, 4.0])])
    p = selection_probabilities(pop)
    rng = np.random.default_rng(1)
    draws = 100_000
    counts = np.zeros(4)
    for _ in range(draws):
        counts[pop.ids().index(select_parents(pop, 1, rng)[0].id)] += 1
    assert np.abs(counts / draws - p).max() <= 0.01


def test_select_parents_distinct():
    pop = Population(4, [cand(i, g) for i, g in enumerate([0.5, 1.0, 2.0, 4.0])])
    rng = np.random.default_rng(2)
    for _ in range(200):
        ids = [c.id for c in select_parents(pop, 2, rng)]
        assert len(set(ids)) == 2


def test_early_stop_probability_examples():
    assert early_stop_probability(0.5, 0.05) == pytest.approx(0.15, abs=1e-15)
    assert early_stop_probability(0.07, 0.05) == 0.07
    assert early_stop_probability(0.01, 0.05) == 0.05
    with pytest.raises(ValueError):
        early_stop_probability(0.1, 0.95)


def test_should_stop_only_when_worse_than_worst():
    rng = np.random.default_rng(0)
    assert not should_stop(50.0, None, 0.05, rng)
    assert not should_stop(2.0, 3.0, 0.05, rng)
    hits = sum(should_stop(50.0, 3.0, 0.05, rng) for _ in range(10_000))
    assert abs(hits / 10_000 - 0.15) <= 0.01


def test_update_population_cases():
    pop = Population(3, [cand(0, 3.0), cand(1, 1.0)])
    assert update_population(pop, cand(2, 2.0)) and pop.ids() == [1, 2, 0]
    assert not update_population(pop, cand(3, 9.0)) and pop.ids() == [1, 2, 0]
    assert update_population(pop, cand(4, 1.5)) and pop.ids() == [1, 4, 2]
    dup = cand(5, 0.1, source=pop.best.source)
    assert not update_population(pop, dup) and pop.ids() == [1, 4, 2]
    bad = HeuristicCandidate(6, "", "x", status="invalid")
    with pytest.raises(ValueError):
        update_population(pop, bad)


def test_fitness_is_mean_of_gaps():
    c = HeuristicCandidate(0, "", "")
    c.set_result([("a", 0, 1.5), ("a", 1, 2.5)])
    assert c.fitness == 2.0


# ------------------------------------------------------------------ judging


def test_majority():
    assert majority([True, True, False])
    assert not majority([False])
    assert not majority([True, False, False])


def test_judge_votes_and_fail_open(tmp_path):
    _write_fixtures(tmp_path, "judge", [(".txt", "VERDICT: YES"), (".txt", "VERDICT: YES"), (".txt", "VERDICT: NO"),
                                        (".txt", "VERDICT: NO"),
                                        (".error", "rate limited"), (".txt", "no verdict here"), (".txt", "VERDICT: NO")])
    p = MockProvider(tmp_path)
    pop = Population(2, [cand(0, 1.0), cand(1, 2.0)])
    new = cand(9, 0.0)
    v = judge_candidate(p, new, pop, 3)
    assert v.votes == [True, True, False] and v.decision
    assert not judge_candidate(p, new, pop, 1).decision
    v = judge_candidate(p, new, pop, 3)
    assert v.votes == [True, True, False] and v.decision
    with pytest.raises(ValueError):
        judge_candidate(p, new, pop, 2)


def test_judge_metrics_hand_count():
    log = [(True, True)] * 3 + [(True, False)] * 2 + [(False, True)] * 1 + [(False, False)] * 4
    r = judge_metrics(log)
    assert (r.tt, r.tf, r.ft, r.ff, r.accuracy, r.count) == (30.0, 20.0, 10.0, 40.0, 70.0, 10)
    assert r.retention == 60.0
    assert judge_metrics([(True, True), (False, False)]).accuracy == 100.0
    with pytest.raises(ValueError):
        judge_metrics([])


# ------------------------------------------------------------------ candidate runtime


def _cand_file(tmp_path, body, name="c.py"):
    p = tmp_path / name
    p.write_text(body)
    return p


def test_protocol_en_matches_in_process():
    path = Path(__file__).parents[1] / "src" / "ailskit" / "ahd" / "seeds" / "en.py"
    with CandidateRunner(path) as runner:
        for s in range(10):
            ctx = context(40, s, ns=1 + s)
            ref = ruin_en(ctx.fresh())
            assert runner.raw_select(ctx.fresh(), token=f"R40-{s}") == ref


def test_garbage_output_is_malformed(tmp_path):
    p = _cand_file(tmp_path, "import os\n\ndef select_nodes(ctx):\n    os.write(1, b'garbage\\n')\n    return [1]\n")
    with pytest.raises(CandidateError) as info:
        run_candidate(p, context())
    assert info.value.reason == "malformed"


def test_print_does_not_break_protocol(tmp_path):
    p = _cand_file(tmp_path, "def select_nodes(ctx):\n    print('debug')\n    return [1, 2, 3, 4, 5]\n")
    res = run_candidate(p, context())
    assert res.selected.tolist() == [1, 2, 3, 4, 5] and not res.events


def test_timeout(tmp_path):
    p = _cand_file(tmp_path, "import time\n\ndef select_nodes(ctx):\n    time.sleep(0.3)\n    return [1]\n")
    with pytest.raises(CandidateError) as info:
        run_candidate(p, context(), cap=0.05)
    assert info.value.reason == "timeout"


def test_crash_and_load_failure(tmp_path):
    p = _cand_file(tmp_path, "def select_nodes(ctx):\n    raise RuntimeError('bad')\n")
    with pytest.raises(CandidateError) as info:
        run_candidate(p, context())
    assert info.value.reason == "crash" and "bad" in info.value.detail
    q = _cand_file(tmp_path, "raise SystemError('at import')\n", "d.py")
    with pytest.raises(CandidateError) as info:
        run_candidate(q, context())
    assert info.value.reason == "crash"


def test_depot_is_contract_violation(tmp_path):
    p = _cand_file(tmp_path, "def select_nodes(ctx):\n    return [0] + [v for v in range(1, ctx.number_select)]\n")
    with CandidateRunner(p) as runner:
        with pytest.raises(CandidateError) as info:
            CandidateHeuristic(runner, strict=True)(context())
        assert info.value.reason == "contract"
        # lenient mode hands the raw list on for sanitation
        assert CandidateHeuristic(runner, strict=False)(context())[0] == 0


def test_time_cap_scaling():
    assert time_cap(101) == 0.05 and time_cap(1000) == 0.05 and time_cap(1001) == 0.10


def test_harness_evaluator_mean_of_two_gaps(tmp_path):
    inst = random_instance(25, 3)
    (tmp_path / "R25-3.vrp").write_text(serialize_instance(inst))
    (tmp_path / "bks.txt").write_text("R25-3 100\n")
    src = (Path(__file__).parents[1] / "src" / "ailskit" / "ahd" / "seeds" / "en.py").read_text()
    ev = HarnessEvaluator(EvalConfig(instances=("R25-3",), data_dir=str(tmp_path), seeds=(0, 1), seconds=None,
                                     iterations=5, bks_file=str(tmp_path / "bks.txt")), workdir=tmp_path / "w")
    out = ev(HeuristicCandidate(0, "en", src), None, np.random.default_rng(0))
    assert out.status == "evaluated" and [(r[0], r[1]) for r in out.runs] == [("R25-3", 0), ("R25-3", 1)]
    c = HeuristicCandidate(0, "en", src)
    c.set_result(out.runs)
    assert c.fitness == pytest.approx((out.runs[0][2] + out.runs[1][2]) / 2)
    depot = HeuristicCandidate(1, "depot", "def select_nodes(ctx):\n    return [0]\n")
    assert ev(depot, None, np.random.default_rng(0)).status == "invalid"


# ------------------------------------------------------------------ evolution loop


def test_scripted_evolution_matches_hand_simulation():
    res = run_evolution(MockProvider(evo_script.MOCK_DIR), evo_script.config(), evo_script.scripted_evaluator,
                        seeds=evo_script.seeds())
    assert [e["status"] for e in res.events] == evo_script.EXPECTED_STATUS
    assert [e["population"] for e in res.events] == evo_script.EXPECTED_POP_AFTER
    assert [e["best"] for e in res.events] == evo_script.EXPECTED_BEST
    assert [(c.id, c.fitness) for c in res.population] == evo_script.EXPECTED_FINAL
    assert res.events[4]["reason"] == "duplicate source"
    assert all(e["parents"] and len(e["parents"]) == 1 for e in res.events)


def test_zero_generations_keeps_seeds():
    res = run_evolution(MockProvider(evo_script.MOCK_DIR), evo_script.config(generations=0),
                        evo_script.scripted_evaluator, seeds=evo_script.seeds())
    assert res.events == [] and res.population.ids() == [2, 1, 0]


def test_resume_reproduces_uninterrupted_run(tmp_path):
    full = run_evolution(MockProvider(evo_script.MOCK_DIR), evo_script.config(), evo_script.scripted_evaluator,
                         seeds=evo_script.seeds())
    ck = tmp_path / "ck.json"
    part = run_evolution(MockProvider(evo_script.MOCK_DIR), evo_script.config(), evo_script.scripted_evaluator,
                         seeds=evo_script.seeds(), checkpoint=ck, stop_after=2)
    assert len(part.events) == 2
    resumed = run_evolution(MockProvider(evo_script.MOCK_DIR), evo_script.config(), evo_script.scripted_evaluator,
                            checkpoint=ck, resume=True)
    assert resumed.events == full.events
    assert [c.to_dict() for c in resumed.population] == [c.to_dict() for c in full.population]


def test_exhaustion_checkpoints_then_resumes(tmp_path):
    short = tmp_path / "short"
    (short / "generate").mkdir(parents=True)
    for f in sorted((evo_script.MOCK_DIR / "generate").iterdir())[:4]:
        (short / "generate" / f.name).write_text(f.read_text())
    ck = tmp_path / "ck.json"
    with pytest.raises(ProviderExhausted):
        run_evolution(MockProvider(short), evo_script.config(), evo_script.scripted_evaluator,
                      seeds=evo_script.seeds(), checkpoint=ck)
    assert len(json.loads(ck.read_text())["events"]) == 4
    resumed = run_evolution(MockProvider(evo_script.MOCK_DIR), evo_script.config(), evo_script.scripted_evaluator,
                            checkpoint=ck, resume=True)
    full = run_evolution(MockProvider(evo_script.MOCK_DIR), evo_script.config(), evo_script.scripted_evaluator,
                         seeds=evo_script.seeds())
    assert resumed.events == full.events


def test_judge_skips_and_labels(tmp_path):
    root = tmp_path / "fx"
    (root / "generate").mkdir(parents=True)
    for f in sorted((evo_script.MOCK_DIR / "generate").iterdir())[:3]:
        (root / "generate" / f.name).write_text(f.read_text())
    # cand 3 (4.5 < worst 5.0, truly better) is skipped; cand 5 (6.0, worse) is let through
    _write_fixtures(root, "judge", [(".txt", "VERDICT: NO"), (".txt", "VERDICT: YES")])
    cfg = evo_script.config(generations=1, judge_votes=1, label_skipped=True)
    res = run_evolution(MockProvider(root), cfg, evo_script.scripted_evaluator, seeds=evo_script.seeds())
    assert [e["status"] for e in res.events] == ["judged-skip", "invalid", "evaluated"]
    assert [(e["truth"], e["decision"]) for e in res.events] == [(True, False), (None, None), (False, True)]
    report = res.judge_report()
    assert (report.tf, report.ft, report.accuracy) == (50.0, 50.0, 0.0)
