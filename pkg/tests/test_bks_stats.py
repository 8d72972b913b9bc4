import itertools

import numpy as np
import pytest

from ailskit.bks import BksFormatError, gap_percent, instance_key, load_bks, parse_bks
from ailskit.stats import (RunRecord, compare_records, compare_samples, markdown_summary, rank_sum_pvalue,
                           read_runs, summarize, write_convergence_rows, write_runs)


def test_shipped_table():
    bks = load_bks()
    assert bks["X-n101-k25"] == 27591
    assert bks["Antwerp1"] == 477261
    assert sum(k.startswith("X-n") for k in bks) == 100
    assert all(v > 0 for v in bks.values())


def test_parse_bks_errors():
    assert parse_bks("# header\nA 10  # trailing\n\nB 2.5\n") == {"A": 10, "B": 2.5}
    for text, line in [("A 10\nB\n", 2), ("A ten\n", 1), ("A 10\nB 0\n", 2), ("A 1\n# c\nA 2\n", 3)]:
        with pytest.raises(BksFormatError) as info:
            parse_bks(text)
        assert info.value.line == line and f"line {line}:" in str(info.value)


def test_gap():
    assert gap_percent(27591, 27591) == 0
    assert gap_percent(110, 100) == pytest.approx(10.0)
    assert instance_key("/a/b/X-n101-k25.vrp") == "X-n101-k25" == instance_key("X-n101-k25")


def _records():
    return [
        RunRecord("I1", "en", 0, 3.0, 120, 1000, 0.5, 3.01, [(0.0, 0, 1100), (1.25, 7, 1000)]),
        RunRecord("I1", "en", 1, None, 50, 1005, None, 0.5),
        RunRecord("I2", "seed", 0, 1.5, 10, 77, 1 / 3, 1.5, [(0.1, 0, 77)]),
    ]


def test_csv_round_trip(tmp_path):
    recs = _records()
    write_runs(tmp_path / "runs.csv", recs)
    write_convergence_rows(tmp_path / "conv.csv", recs)
    back = read_runs(tmp_path / "runs.csv", tmp_path / "conv.csv")
    assert back == recs


def test_read_runs_missing_column(tmp_path):
    (tmp_path / "r.csv").write_text("instance,seed\nA,0\n")
    with pytest.raises(ValueError, match="missing columns"):
        read_runs(tmp_path / "r.csv")


def _exact_two_sided(a, b):
    """Brute force over all rank assignments (untied samples)."""
    pooled = sorted(list(a) + list(b))
    ranks = {v: i + 1 for i, v in enumerate(pooled)}
    n1, n2 = len(a), len(b)
    obs = sum(ranks[v] for v in a) - n1 * (n1 + 1) / 2
    mid = n1 * n2 / 2
    hits = total = 0
    for combo in itertools.combinations(range(1, n1 + n2 + 1), n1):
        u = sum(combo) - n1 * (n1 + 1) / 2
        total += 1
        hits += abs(u - mid) >= abs(obs - mid) - 1e-12
    return hits / total


@pytest.mark.parametrize("seed", range(6))
def test_exact_pvalue_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    vals = rng.permutation(1000)[:11]
    a, b = vals[:5], vals[5:]
    assert rank_sum_pvalue(a, b) == pytest.approx(_exact_two_sided(a, b), rel=1e-9)


def test_compare_symmetry_and_identity():
    rng = np.random.default_rng(3)
    a = rng.integers(900, 1100, 12)
    b = rng.integers(950, 1200, 12)
    flip = {"+": "-", "-": "+", "=": "="}
    assert compare_samples(a, b) == flip[compare_samples(b, a)]
    assert rank_sum_pvalue(a, b) == pytest.approx(rank_sum_pvalue(b, a))
    assert compare_samples([5, 5, 5], [5, 5, 5]) == "="
    assert rank_sum_pvalue([5, 5, 5], [5, 5, 5]) == 1.0


def test_clear_difference_detected():
    rng = np.random.default_rng(4)
    b = rng.integers(20_000, 20_100, 30)
    a = b - 1000
    assert compare_samples(a, b) == "+"
    assert compare_samples(b, a) == "-"


def test_single_run_rejected():
    with pytest.raises(ValueError):
        rank_sum_pvalue([1], [2, 3])


def test_compare_records_table():
    a = [RunRecord("I", "en", s, 1, 1, 100 + s, None, 1) for s in range(5)]
    b = [RunRecord("I", "seed", s, 1, 1, 200 + s, None, 1) for s in range(5)]
    other = [RunRecord("J", "seed", 0, 1, 1, 1, None, 1)]
    cmp = compare_records(a, b + other)
    assert [r[0] for r in cmp.rows] == ["I"] and cmp.counts == (1, 0, 0)
    assert "| (+/-/=) | | | | 1/0/0 |" in cmp.format("EN", "Seed")
    with pytest.raises(ValueError):
        compare_records(a, other)


def test_summary():
    s = summarize(_records())
    assert s[0]["runs"] == 2 and s[0]["best"] == 1000 and s[0]["gap_mean"] == 0.5
    assert s[1]["gap_std"] == 0.0
    md = markdown_summary(_records(), {"I1": 995})
    assert "| I1 | 995 | en | 2 | 1000 | 1002.50 |" in md and "| I2 | - | seed |" in md
