import json
from pathlib import Path

import numpy as np
import pytest

from satconsensus.graph import DirectedGraph

FROZEN = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture
def frozen():
    return FROZEN


def reachable(weights, root):
    """Plain BFS over edges j -> i (a_ij > 0); independent of the package's SCC code."""
    n = len(weights)
    seen = {root}
    frontier = [root]
    while frontier:
        j = frontier.pop()
        for i in range(n):
            if weights[i][j] > 0 and i not in seen:
                seen.add(i)
                frontier.append(i)
    return seen


def random_strongly_connected(rng, n, density=0.2):
    w = (rng.random((n, n)) < density) * rng.uniform(0.1, 3.0, (n, n))
    perm = rng.permutation(n)
    for a, b in zip(perm, np.roll(perm, -1)):
        w[b, a] = rng.uniform(0.1, 3.0)
    np.fill_diagonal(w, 0.0)
    return DirectedGraph(w)


def random_spanning_tree_graph(rng, n_max=30):
    """Random DAG of strongly connected pieces with a single source piece."""
    sizes = []
    remaining = int(rng.integers(1, n_max + 1))
    while remaining:
        s = int(rng.integers(1, min(remaining, 6) + 1))
        sizes.append(s)
        remaining -= s
    n = sum(sizes)
    w = np.zeros((n, n))
    groups = []
    start = 0
    for s in sizes:
        idx = list(range(start, start + s))
        groups.append(idx)
        if s > 1:
            sub = random_strongly_connected(rng, s, 0.3).weights
            w[np.ix_(idx, idx)] = sub
        start += s
    for g_i in range(1, len(groups)):
        # at least one edge from an earlier piece keeps a single root
        src = int(rng.choice(groups[int(rng.integers(0, g_i))]))
        dst = int(rng.choice(groups[g_i]))
        w[dst, src] = rng.uniform(0.1, 3.0)
        for g_j in range(g_i):
            if rng.random() < 0.2:
                w[int(rng.choice(groups[g_i])), int(rng.choice(groups[g_j]))] = rng.uniform(0.1, 3.0)
    perm = rng.permutation(n)
    w = w[np.ix_(perm, perm)]
    return DirectedGraph(w)


ACCEPTANCE_LINES = []


def record_acceptance(number, passed, elapsed, budget, detail):
    ok = passed and elapsed < budget
    ACCEPTANCE_LINES.append(
        f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  [{elapsed:6.2f} s of {budget:g} s]  {detail}"
    )
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
