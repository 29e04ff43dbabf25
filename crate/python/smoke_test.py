"""Smoke test for the pylocalizability extension.

Build and install with `pip install --no-build-isolation -e crates/python`
(needs maturin), then run `python3 python/smoke_test.py`.
"""

import json
import math

import pylocalizability as pl

# Two tags ranging to each other and to three anchors.
DIM, TAGS, ANCHORS = 2, 2, 3
PAIRS = [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)]
POINTS = [[1.0, 2.0], [3.0, 1.5], [0.0, 0.0], [5.0, 0.0], [2.0, 4.0]]
SIGMA = 0.1


def check_fim():
    f = pl.fim(DIM, TAGS, ANCHORS, PAIRS, POINTS, SIGMA)
    n = DIM * (TAGS + ANCHORS)
    assert len(f) == n and all(len(row) == n for row in f)
    for i in range(n):
        for j in range(n):
            assert abs(f[i][j] - f[j][i]) < 1e-12
    # Additive noise: each tag-block trace term is 1 / sigma^2 per incident edge.
    degree = sum(1 for a, b in PAIRS for t in (a, b) if t < TAGS)
    trace = sum(f[i][i] for i in range(DIM * TAGS))
    assert abs(trace - degree / SIGMA**2) < 1e-9 * trace
    r = pl.rigidity_matrix(DIM, TAGS, ANCHORS, PAIRS, POINTS)
    assert len(r) == len(PAIRS) + ANCHORS * (ANCHORS - 1) // 2


def check_gradient():
    h = 1e-6
    for kind in ("A", "D", "E"):
        grad = pl.potential_gradient(kind, DIM, TAGS, ANCHORS, PAIRS, POINTS, SIGMA)
        assert sorted(grad) == list(range(TAGS + ANCHORS))
        for node in (0, 3):
            for c in range(DIM):
                plus = [p[:] for p in POINTS]
                minus = [p[:] for p in POINTS]
                plus[node][c] += h
                minus[node][c] -= h
                fd = (
                    pl.potential(kind, DIM, TAGS, ANCHORS, PAIRS, plus, SIGMA)
                    - pl.potential(kind, DIM, TAGS, ANCHORS, PAIRS, minus, SIGMA)
                ) / (2 * h)
                assert math.isclose(grad[node][c], fd, rel_tol=1e-5, abs_tol=1e-6), (kind, node, c)


def check_errors():
    try:
        pl.potential("Z", DIM, TAGS, ANCHORS, PAIRS, POINTS, SIGMA)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown potential accepted")
    try:
        pl.fim(DIM, TAGS, ANCHORS, PAIRS, POINTS[:-1], SIGMA)
    except ValueError:
        pass
    else:
        raise AssertionError("point count mismatch accepted")


def check_suites_and_scenario():
    reports = pl.verify(seed=1, instances=2, power_instances=1)
    assert reports and all(passed for _, passed, *_ in reports), reports
    summary = json.loads(pl.run_scenario("[scenario]\nsteps = 10\n[montecarlo]\ntrials = 10\n"))
    assert summary["scenario"] == "inspection"
    assert summary["final_potential"] < summary["initial_potential"]


if __name__ == "__main__":
    check_fim()
    check_gradient()
    check_errors()
    check_suites_and_scenario()
    print("pylocalizability smoke test passed")
