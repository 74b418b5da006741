"""Brute-force certification of the fair solver on small populations.

The oracle never touches the multiplier machinery. It builds the risk and
disparity of a product classifier as linear functions of the per-unit
acceptance probabilities straight from the atom masses, then searches a
uniform grid plus every edge of the unit cube, solving the single free
coordinate of each edge exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from fairlevel import kernels
from fairlevel.classifier import (
    Notion,
    RandomizedClassifier,
    Regime,
    decision_units,
    disparity,
    risk_cs,
)
from fairlevel.fairbayes import FairSolveResult, solve
from fairlevel.population import PopulationSpec

MAX_UNITS = 8
MAX_RESOLUTION = 101
MAX_GRID_POINTS = 20_000_000
CERTIFY_RTOL = 1e-4
_GRID_CHUNK = 1 << 16
# float noise on grid sums only; the edge pass uses the exact |DM| <= delta bounds
ORACLE_SLACK = 1e-12


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class OracleResult:
    best_risk: float
    best_classifier: RandomizedClassifier
    grid_resolution: int
    feasible_count: int


def _linear_parts(pop: PopulationSpec, c: float, notion: Notion, regime: Regime):
    """Return ``(const, gain, slope)`` with risk = const + gain @ f, DM = slope @ f."""
    table = decision_units(pop, regime)
    m = table.mass
    pos = m[:, :, 1].sum(axis=1)
    neg = m[:, :, 0].sum(axis=1)
    const = (1.0 - c) * pos.sum()
    gain = c * neg - (1.0 - c) * pos
    labels = list(Notion(notion).labels)
    per_group = m[:, :, labels].sum(axis=2)
    totals = per_group.sum(axis=0)
    slope = per_group[:, 1] / totals[1] - per_group[:, 0] / totals[0]
    return table, float(const), gain, slope


def brute_force(pop: PopulationSpec, c: float, notion: Notion, regime: Regime,
                delta: float, grid_resolution: int = 5, *,
                tol_dm: float = ORACLE_SLACK) -> OracleResult:
    """Minimum feasible risk over product randomized classifiers."""
    notion, regime = Notion(notion), Regime(regime)
    table, const, gain, slope = _linear_parts(pop, c, notion, regime)
    n = len(table.keys)
    if n > MAX_UNITS:
        raise OracleError(f"{n} decision units; the oracle handles at most {MAX_UNITS}")
    if not 2 <= grid_resolution <= MAX_RESOLUTION:
        raise OracleError(f"grid_resolution must be in [2, {MAX_RESOLUTION}]")
    if grid_resolution ** n > MAX_GRID_POINTS:
        raise OracleError(
            f"grid of {grid_resolution}^{n} points is too large; lower grid_resolution"
        )
    lo, hi = -delta - tol_dm, delta + tol_dm

    levels = np.linspace(0.0, 1.0, grid_resolution)
    best_val, best_vec, feasible = np.inf, None, 0
    # leading coordinates iterate in Python, the trailing block is vectorised
    tail = min(n, max(1, int(np.log(_GRID_CHUNK) / np.log(grid_resolution))))
    tail_grid = np.array(list(itertools.product(levels, repeat=tail)))
    for head in itertools.product(levels, repeat=n - tail):
        head = np.array(head)
        g0 = float(head @ gain[:n - tail]) if head.size else 0.0
        d0 = float(head @ slope[:n - tail]) if head.size else 0.0
        vals = g0 + tail_grid @ gain[n - tail:]
        dms = d0 + tail_grid @ slope[n - tail:]
        ok = (dms >= lo) & (dms <= hi)
        feasible += int(ok.sum())
        if ok.any():
            idx = np.flatnonzero(ok)
            k = idx[np.argmin(vals[idx])]
            if vals[k] < best_val - 1e-15:
                best_val = float(vals[k])
                best_vec = np.concatenate([head, tail_grid[k]])

    # the edge pass solves its free coordinate against the exact bounds
    edge = kernels.edge_search(
        np.ascontiguousarray(gain, dtype=np.float64),
        np.ascontiguousarray(slope, dtype=np.float64), -delta, delta)
    if edge is not None and edge[0] < best_val - 1e-15:
        best_val, best_vec = edge[0], np.asarray(edge[1])
    if best_vec is None:
        raise OracleError("internal error: no feasible classifier (accept-all is always feasible)")
    f = RandomizedClassifier.from_vector(table, np.clip(best_vec, 0.0, 1.0))
    return OracleResult(
        best_risk=const + best_val,
        best_classifier=f,
        grid_resolution=grid_resolution,
        feasible_count=feasible,
    )


@dataclass(frozen=True)
class Certificate:
    passed: bool
    gap: float
    solver: FairSolveResult
    oracle: OracleResult


def certify(pop: PopulationSpec, c: float, notion: Notion, regime: Regime, delta: float,
            grid_resolution: int = 5, rtol: float = CERTIFY_RTOL, **tols) -> Certificate:
    """Compare the solver's risk to the oracle's; pass within ``rtol`` relative."""
    result = solve(pop, c, notion, regime, delta, **tols)
    orc = brute_force(pop, c, notion, regime, delta, grid_resolution)
    gap = abs(result.achieved_risk - orc.best_risk)
    return Certificate(gap <= rtol * max(1.0, orc.best_risk), gap, result, orc)


def recheck(orc: OracleResult, pop: PopulationSpec, c: float, notion: Notion) -> tuple[float, float]:
    """Risk and disparity of the oracle's classifier via the shared metrics."""
    return risk_cs(orc.best_classifier, pop, c), disparity(orc.best_classifier, pop, notion)
