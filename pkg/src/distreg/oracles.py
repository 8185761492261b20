"""Brute-force self-checks runnable from the CLI.

Each suite re-derives a quantity by the dumbest available method (nested
double sums, exhaustive grid search, hand-worked BFS answers) and
compares it against the fast implementation. Everything is seeded, so
output is identical across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import simplex_qp
from .kernels import GAUSSIAN, LAPLACE, KernelConfig, SampleSet, embed, eval_kernel, inner, mmd2
from .network import Graph, bfs_distance, disrupted_adjacency

__all__ = ["OracleCase", "run_suite", "SUITES"]


@dataclass(frozen=True)
class OracleCase:
    name: str
    passed: bool
    detail: str


def _double_sum_inner(k: KernelConfig, a, b) -> float:
    total = 0.0
    for i, x in enumerate(a.sample_set.samples):
        for j, y in enumerate(b.sample_set.samples):
            total += a.weights[i] * b.weights[j] * eval_kernel(k, x, y)
    return total


def _gram_suite() -> list[OracleCase]:
    rng = np.random.default_rng(20240601)
    cases = []
    for idx, family in enumerate([GAUSSIAN, LAPLACE]):
        k = KernelConfig(family=family, rho=0.7)
        for trial in range(3):
            a = embed(k, SampleSet(rng.normal(size=(4 + trial, 2))))
            b = embed(k, SampleSet(rng.normal(size=(3 + trial, 2))))
            fast = inner(a, b)
            slow = _double_sum_inner(k, a, b)
            ok = abs(fast - slow) <= 1e-12
            cases.append(
                OracleCase(
                    name=f"gram/double-sum-{family}-{trial}",
                    passed=ok,
                    detail=f"fast={fast:.15f} slow={slow:.15f}",
                )
            )
            m_fast = mmd2(a, b)
            m_slow = (
                _double_sum_inner(k, a, a)
                - 2.0 * _double_sum_inner(k, a, b)
                + _double_sum_inner(k, b, b)
            )
            ok = abs(m_fast - max(m_slow, 0.0)) <= 1e-12
            cases.append(
                OracleCase(
                    name=f"gram/mmd2-{family}-{trial}",
                    passed=ok,
                    detail=f"fast={m_fast:.15f} slow={m_slow:.15f}",
                )
            )
    return cases


def _simplex_grid(n: int, step: float) -> np.ndarray:
    ticks = int(round(1.0 / step))
    if n == 2:
        pts = [(i / ticks, 1.0 - i / ticks) for i in range(ticks + 1)]
    elif n == 3:
        pts = [
            (i / ticks, j / ticks, (ticks - i - j) / ticks)
            for i in range(ticks + 1)
            for j in range(ticks + 1 - i)
        ]
    else:
        raise ValueError("grid oracle only covers n in {2, 3}")
    return np.array(pts)


def _qp_suite() -> list[OracleCase]:
    rng = np.random.default_rng(20240602)
    cases = []
    for trial in range(10):
        n = 2 if trial < 6 else 3
        A = rng.normal(size=(n, n))
        G = A.T @ A
        G = (G + G.T) / 2.0
        b = rng.normal(size=n)
        sol = simplex_qp.solve(simplex_qp.SimplexQPProblem(G=G, b=b))
        grid = _simplex_grid(n, 0.01)
        grid_objs = np.einsum("ki,ij,kj->k", grid, G, grid) - 2.0 * grid @ b
        gap = sol.objective - float(np.min(grid_objs))
        ok = gap <= 1e-6 and sol.kkt_residual <= 1e-8
        cases.append(
            OracleCase(
                name=f"qp/grid-n{n}-{trial}",
                passed=ok,
                detail=f"gap={gap:.3e} kkt={sol.kkt_residual:.3e}",
            )
        )
    return cases


def _bfs_suite() -> list[OracleCase]:
    cases = []
    path3 = Graph.from_edges(3, [(0, 1), (1, 2)])
    got = bfs_distance(path3, 0)
    cases.append(
        OracleCase(
            name="bfs/path-0-1-2",
            passed=bool(np.array_equal(got, [0.0, 1.0, 2.0])),
            detail=f"dist={got.tolist()}",
        )
    )
    isolated = Graph.from_edges(3, [(0, 1)])
    got = bfs_distance(isolated, 2)
    cases.append(
        OracleCase(
            name="bfs/isolated-node",
            passed=bool(got[2] == 0.0 and np.all(np.isinf(got[[0, 1]]))),
            detail=f"dist={got.tolist()}",
        )
    )
    cycle4 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    got = bfs_distance(cycle4, 0)
    cases.append(
        OracleCase(
            name="bfs/4-cycle-opposite",
            passed=bool(got[2] == 2.0),
            detail=f"dist(0,2)={got[2]}",
        )
    )
    disrupted = disrupted_adjacency(cycle4, [1])
    got = bfs_distance(disrupted, 0)
    cases.append(
        OracleCase(
            name="bfs/4-cycle-roi-1-detour",
            passed=bool(got[2] == 2.0 and got[3] == 1.0 and np.isinf(got[1])),
            detail=f"dist={got.tolist()}",
        )
    )
    return cases


SUITES = {
    "gram": _gram_suite,
    "qp": _qp_suite,
    "bfs": _bfs_suite,
}


def run_suite(name: str) -> list[OracleCase]:
    if name == "all":
        out = []
        for suite_name in ("gram", "qp", "bfs"):
            out.extend(SUITES[suite_name]())
        return out
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name]()
