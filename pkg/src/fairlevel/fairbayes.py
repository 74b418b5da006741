"""Unconstrained and fairness-constrained Bayes-optimal classifiers.

The fair rule accepts a unit when ``eta - c - lam * nu > 0``, randomizing on
the boundary ``eta - c - lam * nu = 0``. On a finite support the disparity of
this family is a step function of ``lam`` whose jumps sit at the breakpoints
``zeta = (eta - c) / nu``; boundary randomization fills each jump, so the
solver enumerates breakpoints and interpolates on the boundary mass.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterator, Mapping, Sequence

import numpy as np

from fairlevel import kernels
from fairlevel.classifier import (
    Notion,
    RandomizedClassifier,
    Regime,
    UnitTable,
    decision_units,
    disparity,
    ntr,
    rates,
    risk_cs,
)
from fairlevel.population import PopulationSpec, derive_posteriors

log = logging.getLogger(__name__)

TOL_DM = 1e-9
TOL_BOUNDARY = 1e-12
# |nu| below this is treated as an exactly balanced (neutral) unit
NU_ZERO = 1e-12
RISK_TIE = 1e-12


class SolverError(RuntimeError):
    """No member of the threshold family satisfies the constraint."""


@dataclass(frozen=True)
class FairnessCorrection:
    regime: Regime
    notion: Notion
    nu: Mapping[Hashable, float]

    def vector(self, table: UnitTable) -> np.ndarray:
        return np.array([self.nu[k] for k in table.keys], dtype=np.float64)


@dataclass(frozen=True)
class FairSolveResult:
    classifier: RandomizedClassifier
    lambda_star: float
    boundary_alpha: Mapping[Hashable, float]
    achieved_dm: float
    achieved_risk: float
    tolerance_delta: float
    already_fair: bool
    notion: Notion
    regime: Regime
    c: float


def _snap(v: float) -> float:
    return 0.0 if abs(v) < NU_ZERO else v


def correction(pop: PopulationSpec, notion: Notion, regime: Regime) -> FairnessCorrection:
    """Per-unit fairness correction, from the posterior tables.

    Aware: ``(2s-1)/P(S=s)``, ``(2s-1) eta(x,s)/P(S=s,Y=1)`` and
    ``(2s-1)(1-eta(x,s))/P(S=s,Y=0)`` for DP, EO and PE. Blind: the
    difference of group-normalised conditionals ``P(S=1,Y in y*|x)/P(S=1,Y in y*)
    - P(S=0,Y in y*|x)/P(S=0,Y in y*)``.
    """
    notion, regime = Notion(notion), Regime(regime)
    post = derive_posteriors(pop)
    table = decision_units(pop, regime)
    nu = {}
    if regime is Regime.AWARE:
        for x, s in table.keys:
            sign = 2 * s - 1
            eta = post.eta_aware[(x, s)]
            if notion is Notion.DP:
                val = sign / post.prior_s[s]
            elif notion is Notion.EO:
                val = sign * eta / post.prior_sy[(s, 1)]
            else:
                val = sign * (1.0 - eta) / post.prior_sy[(s, 0)]
            nu[(x, s)] = _snap(val)
    else:
        for x in table.keys:
            if notion is Notion.DP:
                val = (post.group_given_x[(x, 1)] / post.prior_s[1]
                       - post.group_given_x[(x, 0)] / post.prior_s[0])
            else:
                y = 1 if notion is Notion.EO else 0
                val = (post.joint_given_x[(x, 1, y)] / post.prior_sy[(1, y)]
                       - post.joint_given_x[(x, 0, y)] / post.prior_sy[(0, y)])
            nu[x] = _snap(val)
    return FairnessCorrection(regime, notion, nu)


def bayes_unconstrained(pop: PopulationSpec, c: float, regime: Regime,
                        tol_boundary: float = TOL_BOUNDARY) -> RandomizedClassifier:
    """Accept exactly the units with ``eta > c``; the boundary gets probability 0."""
    table = decision_units(pop, regime)
    accept = (table.eta - c > tol_boundary).astype(np.float64)
    return RandomizedClassifier.from_vector(table, accept)


def fair_threshold(pop: PopulationSpec, c: float, notion: Notion, regime: Regime,
                   lam: float, alpha: Mapping[Hashable, float] | None = None,
                   tol_boundary: float = TOL_BOUNDARY) -> RandomizedClassifier:
    table = decision_units(pop, regime)
    nu = correction(pop, notion, regime).vector(table)
    h = table.eta - c - lam * nu
    alpha = dict(alpha or {})
    accept = {}
    for k, hk in zip(table.keys, h):
        if hk > tol_boundary:
            accept[k] = 1.0
        elif hk >= -tol_boundary:
            accept[k] = float(alpha.pop(k, 0.0))
        else:
            accept[k] = 0.0
    if alpha:
        raise ValueError(f"alpha given for non-boundary units {sorted(map(str, alpha))}")
    return RandomizedClassifier(Regime(regime), accept)


def _order_by_magnitude(idx, nu, keys, rtol=1e-12):
    """Sort by |nu| descending; magnitudes equal to within ``rtol`` fall back to key order."""
    idx = sorted(idx, key=lambda i: -abs(nu[i]))
    groups, out = [], []
    for i in idx:
        if groups and abs(abs(nu[groups[-1][0]]) - abs(nu[i])) <= rtol * abs(nu[i]):
            groups[-1].append(i)
        else:
            groups.append([i])
    for g in groups:
        out.extend(sorted(g, key=lambda i: str(keys[i])))
    return out


def mixed_boundary(result: "FairSolveResult", pop: PopulationSpec) -> bool:
    """True when units of both correction signs sit on the solved boundary (a risk tie)."""
    if not result.boundary_alpha:
        return False
    nu = correction(pop, result.notion, result.regime).nu
    signs = {nu[k] > 0 for k in result.boundary_alpha if nu[k] != 0.0}
    return len(signs) == 2


def _allocate(table, nu, h, base, target_dm, tol_boundary):
    """Boundary probabilities hitting ``target_dm``, starting from ``base``.

    Units move one at a time, largest |nu| first (cell id breaks ties), so at
    most one unit ends up strictly randomized.
    """
    w = table.weight
    boundary = np.flatnonzero((np.abs(h) <= tol_boundary) & (nu != 0.0))
    alpha = {i: float(base[i]) for i in boundary}
    current = float(np.dot(w * nu, base))
    need = target_dm - current
    if need != 0.0:
        want_down = need < 0
        movable = [
            i for i in boundary
            if (want_down and ((nu[i] > 0 and alpha[i] > 0) or (nu[i] < 0 and alpha[i] < 1)))
            or (not want_down and ((nu[i] > 0 and alpha[i] < 1) or (nu[i] < 0 and alpha[i] > 0)))
        ]
        movable = _order_by_magnitude(movable, nu, table.keys)
        remaining = abs(need)
        for i in movable:
            if remaining <= 0:
                break
            up = (nu[i] > 0) != want_down  # raise alpha[i]?
            room = (1.0 - alpha[i]) if up else alpha[i]
            cap = w[i] * abs(nu[i]) * room
            step = room if cap <= remaining else remaining / (w[i] * abs(nu[i]))
            alpha[i] = min(1.0, max(0.0, alpha[i] + (step if up else -step)))
            remaining -= min(cap, remaining)
    return alpha


def solve(pop: PopulationSpec, c: float, notion: Notion, regime: Regime, delta: float,
          *, tol_dm: float = TOL_DM, tol_boundary: float = TOL_BOUNDARY) -> FairSolveResult:
    """Minimum-risk member of the fair threshold family with ``|DM| <= delta``."""
    notion, regime = Notion(notion), Regime(regime)
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"cost c={c!r} outside [0, 1]")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"tolerance delta={delta!r} outside [0, 1]")
    table = decision_units(pop, regime)
    f_star = bayes_unconstrained(pop, c, regime, tol_boundary)
    dm0 = disparity(f_star, pop, notion)
    if abs(dm0) <= delta + tol_dm:
        return _result(pop, c, notion, regime, delta, f_star, 0.0, {}, True)

    nu = correction(pop, notion, regime).vector(table)
    eta, w = table.eta, table.weight
    active = nu != 0.0
    zeta = (eta[active] - c) / nu[active]
    lambdas = np.unique(np.concatenate([zeta, [0.0]]))
    scan = kernels.breakpoint_scan(
        np.ascontiguousarray(eta), np.ascontiguousarray(nu), np.ascontiguousarray(w),
        float(c), np.ascontiguousarray(lambdas), float(tol_boundary),
    )
    dm_acc, gain_acc, dm_pos, dm_neg = scan
    base_risk = (1.0 - c) * float(table.mass[:, :, 1].sum())

    candidates = []
    for j, lam in enumerate(lambdas):
        lo, hi = dm_acc[j] + dm_neg[j], dm_acc[j] + dm_pos[j]
        flo, fhi = max(lo, -delta), min(hi, delta)
        if flo > fhi + tol_dm:
            continue
        if lam > 0:
            target = fhi
        elif lam < 0:
            target = flo
        else:
            target = min(max(dm0, flo), fhi)
        target = min(max(target, lo), hi)
        # on the boundary c - eta = -lam * nu, so risk is linear in the target
        risk = base_risk + gain_acc[j] - lam * (target - dm_acc[j])
        candidates.append((risk, abs(lam), float(lam), float(target)))
    if not candidates:
        raise SolverError(
            f"no threshold-family member meets |DM| <= {delta} "
            f"({notion.value}, {regime.value}, c={c})"
        )
    best_risk = min(cand[0] for cand in candidates)
    tied = [cand for cand in candidates if cand[0] <= best_risk + RISK_TIE]
    smallest = min(cand[1] for cand in tied)
    base = f_star.vector(table)
    best = None
    for _, _, lam, target in sorted(cand for cand in tied if cand[1] == smallest):
        h = eta - c - lam * nu
        start = np.where(h > tol_boundary, 1.0, np.where(h < -tol_boundary, 0.0, base))
        alpha = _allocate(table, nu, h, start, target, tol_boundary)
        rmass = sum(w[i] for i, a in alpha.items() if 0.0 < a < 1.0)
        if best is None or rmass < best[0]:
            best = (rmass, lam, alpha)
    _, lam, alpha = best
    named = {table.keys[i]: a for i, a in alpha.items()}
    f = fair_threshold(pop, c, notion, regime, lam, named, tol_boundary)
    result = _result(pop, c, notion, regime, delta, f, lam, named, False)
    if abs(result.achieved_dm) > delta + tol_dm:
        raise SolverError(
            f"solver produced |DM| = {abs(result.achieved_dm)!r} > delta = {delta!r}"
        )
    return result


def _result(pop, c, notion, regime, delta, f, lam, alpha, already_fair):
    return FairSolveResult(
        classifier=f,
        lambda_star=float(lam),
        boundary_alpha=dict(alpha),
        achieved_dm=disparity(f, pop, notion),
        achieved_risk=risk_cs(f, pop, c),
        tolerance_delta=float(delta),
        already_fair=already_fair,
        notion=notion,
        regime=regime,
        c=float(c),
    )


SEPARATION_TOL = 1e-12


def _sep_slack(a: float, b: float) -> float:
    # margins equal up to rounding count as equal: the non-strict order holds, the strict one fails
    finite = [abs(v) for v in (a, b) if math.isfinite(v)]
    return SEPARATION_TOL * max([1.0, *finite])


@dataclass(frozen=True)
class ZetaExtrema:
    """Normalised margins and their extrema over ``nu > 0`` (A) and ``nu < 0`` (B).

    Empty sets give ``a_max = b_max = -inf`` and ``a_min = b_min = +inf``.
    """

    zeta: Mapping[Hashable, float]
    a_max: float
    a_min: float
    b_max: float
    b_min: float

    @property
    def high_separated(self) -> bool:
        return self.a_max <= self.b_min + _sep_slack(self.a_max, self.b_min)

    @property
    def low_separated(self) -> bool:
        return self.b_max < self.a_min - _sep_slack(self.b_max, self.a_min)

    @property
    def separation(self) -> str:
        if self.high_separated:
            return "a_max<=b_min"
        if self.low_separated:
            return "b_max<a_min"
        return "neither"


def zeta_extrema(pop: PopulationSpec, c: float, notion: Notion) -> ZetaExtrema:
    table = decision_units(pop, Regime.BLIND)
    nu = correction(pop, notion, Regime.BLIND).nu
    eta = dict(zip(table.keys, table.eta))
    zeta = {x: float((eta[x] - c) / nu[x]) for x in table.keys if nu[x] != 0.0}
    pos = [zeta[x] for x in zeta if nu[x] > 0]
    neg = [zeta[x] for x in zeta if nu[x] < 0]
    return ZetaExtrema(
        zeta=zeta,
        a_max=max(pos, default=-math.inf),
        a_min=min(pos, default=math.inf),
        b_max=max(neg, default=-math.inf),
        b_min=min(neg, default=math.inf),
    )


@dataclass(frozen=True)
class SweepViolation:
    group: int
    delta_before: float
    delta_after: float
    rate_before: float
    rate_after: float
    expected: str


@dataclass(frozen=True)
class SweepResult:
    """Solves along an increasing tolerance grid, plus any monotonicity breaks."""

    results: tuple[FairSolveResult, ...]
    expectation: Mapping[int, str] = field(default_factory=dict)
    violations: tuple[SweepViolation, ...] = ()

    def __iter__(self) -> Iterator[FairSolveResult]:
        return iter(self.results)

    def __len__(self) -> int:
        return len(self.results)

    def __getitem__(self, i):
        return self.results[i]


SWEEP_SLACK = 1e-9


def expected_sweep_direction(pop: PopulationSpec, c: float, notion: Notion,
                             regime: Regime) -> dict[int, str]:
    """Per-group direction each target rate must follow as the tolerance grows.

    Aware regime: advantaged group non-decreasing, disadvantaged non-increasing.
    Blind regime: both non-decreasing under ``a_max <= b_min``, both
    non-increasing under ``b_max < a_min``, nothing otherwise.
    """
    notion, regime = Notion(notion), Regime(regime)
    if regime is Regime.AWARE:
        f_star = bayes_unconstrained(pop, c, regime)
        r = rates(f_star, pop).roles[notion]
        return {r.advantaged: "non-decreasing", r.disadvantaged: "non-increasing"}
    ext = zeta_extrema(pop, c, notion)
    if ext.high_separated:
        return {0: "non-decreasing", 1: "non-decreasing"}
    if ext.low_separated:
        return {0: "non-increasing", 1: "non-increasing"}
    return {}


def delta_sweep(pop: PopulationSpec, c: float, notion: Notion, regime: Regime,
                deltas: Sequence[float], **tols) -> SweepResult:
    deltas = [float(d) for d in deltas]
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly increasing")
    if deltas and (deltas[0] < 0 or deltas[-1] > 1):
        raise ValueError("deltas must lie in [0, 1]")
    results = tuple(solve(pop, c, notion, regime, d, **tols) for d in deltas)
    expectation = expected_sweep_direction(pop, c, notion, regime)
    violations = []
    for s, direction in sorted(expectation.items()):
        series = [ntr(r.classifier, pop, notion, s) for r in results]
        for k in range(1, len(series)):
            step = series[k] - series[k - 1]
            bad = step < -SWEEP_SLACK if direction == "non-decreasing" else step > SWEEP_SLACK
            if bad:
                violations.append(SweepViolation(
                    s, deltas[k - 1], deltas[k], series[k - 1], series[k], direction))
    if violations:
        log.info("%d sweep monotonicity violations (%s, %s)",
                    len(violations), notion.value, regime.value)
    return SweepResult(results, expectation, tuple(violations))
