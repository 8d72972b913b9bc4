import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ailskit.instance import Instance  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


def random_instance(n: int, seed: int, grid: int = 100, qmax: int = 10, fill: float = 2.5,
                    name: str | None = None) -> Instance:
    """Uniform points with integer demands; capacity set so about `fill` routes are needed."""
    rng = np.random.default_rng(seed)
    xy = rng.integers(0, grid + 1, size=(n, 2))
    q = rng.integers(1, qmax + 1, size=n)
    q[0] = 0
    cap = max(int(q.max()), int(np.ceil(q.sum() / fill)))
    return Instance(name or f"R{n}-{seed}", xy, q, cap)


def random_routes(inst: Instance, rng: np.random.Generator) -> list[list[int]]:
    """A random capacity-feasible route list (first fit over a random order)."""
    routes, loads = [], []
    for v in rng.permutation(np.arange(1, inst.n)):
        v = int(v)
        q = int(inst.demands[v])
        opts = [i for i, l in enumerate(loads) if l + q <= inst.capacity]
        if opts and rng.random() < 0.8:
            i = int(rng.choice(opts))
            routes[i].insert(int(rng.integers(0, len(routes[i]) + 1)), v)
            loads[i] += q
        else:
            routes.append([v])
            loads.append(q)
    return routes


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# ------------------------------------------------------------------ acceptance report

_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        detail = dict(item.user_properties).get("detail", "")
        if rep.failed and not detail:
            detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
        _CRITERIA.append((mark.args[0], rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for label, ok, detail in sorted(_CRITERIA, key=lambda r: int(r[0][1:].split()[0])):
        terminalreporter.write_line(f"{label}: {'PASS' if ok else 'FAIL'}  {detail}")
