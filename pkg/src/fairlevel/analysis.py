"""Structural diagnostics: region partitions, leveling patterns, claim audits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Mapping

import numpy as np

from fairlevel.classifier import (
    Notion,
    Regime,
    decision_units,
    ntr,
    rates,
)
from fairlevel.fairbayes import (
    TOL_DM,
    FairSolveResult,
    ZetaExtrema,
    bayes_unconstrained,
    correction,
    delta_sweep,
    mixed_boundary,
    solve,
    zeta_extrema,
)
from fairlevel.formatting import dumps, fmt
from fairlevel.population import PopulationSpec, derive_posteriors

PATTERN_TOL = 1e-12
WEAK_SLACK = 1e-9
ALIGN_TOL = 1e-12
THRESHOLD_TOL = 1e-12


class RegimeError(ValueError):
    pass


@dataclass(frozen=True)
class RegionPartition:
    """Blind-regime cells split by the sign of ``lambda* nu(x)``.

    ``a_*``/``b_*`` are zeta extrema over ``nu > 0`` and ``nu < 0`` cells;
    they do not depend on the multiplier. ``label_high`` is the group the
    advantaged-like side resembles.
    """

    q_high: frozenset
    q_low: frozenset
    q_neutral: frozenset
    zeta: Mapping[str, float]
    a_max: float
    a_min: float
    b_max: float
    b_min: float
    lambda_star: float
    label_high: int

    def _extrema(self) -> ZetaExtrema:
        return ZetaExtrema(self.zeta, self.a_max, self.a_min, self.b_max, self.b_min)

    @property
    def high_separated(self) -> bool:
        return self._extrema().high_separated

    @property
    def low_separated(self) -> bool:
        return self._extrema().low_separated

    @property
    def separation(self) -> str:
        return self._extrema().separation


def partition(pop: PopulationSpec, c: float, notion: Notion,
              solve_result: FairSolveResult) -> RegionPartition:
    if Regime(solve_result.regime) is not Regime.BLIND:
        raise RegimeError("region partitions are defined for the blind regime only")
    lam = solve_result.lambda_star
    nu = correction(pop, notion, Regime.BLIND).nu
    ext = zeta_extrema(pop, c, notion)
    high, low, neutral = set(), set(), set()
    for x, v in nu.items():
        prod = lam * v
        (high if prod > 0 else low if prod < 0 else neutral).add(x)
    return RegionPartition(
        q_high=frozenset(high),
        q_low=frozenset(low),
        q_neutral=frozenset(neutral),
        zeta=dict(ext.zeta),
        a_max=ext.a_max,
        a_min=ext.a_min,
        b_max=ext.b_max,
        b_min=ext.b_min,
        lambda_star=lam,
        label_high=1 if lam >= 0 else 0,
    )


@dataclass(frozen=True)
class PatternVerdict:
    """How both groups' target rates moved from the unconstrained rule to the fair one.

    ``pattern`` is ``both-down``/``both-up`` when both groups move strictly the
    same way, ``opposite`` when they move strictly apart, ``no-change`` when
    neither moves and ``mixed`` when exactly one group moves.
    """

    pattern: str
    ntr_before: tuple[float, float]
    ntr_after: tuple[float, float]
    separation: str | None
    advantaged: int
    lambda_star: float
    expected: str | None = None
    consistent: bool | None = None
    note: str = ""

    @property
    def deltas(self) -> tuple[float, float]:
        return (self.ntr_after[0] - self.ntr_before[0], self.ntr_after[1] - self.ntr_before[1])


def _label(d0: float, d1: float) -> str:
    s0 = 0 if abs(d0) <= PATTERN_TOL else (1 if d0 > 0 else -1)
    s1 = 0 if abs(d1) <= PATTERN_TOL else (1 if d1 > 0 else -1)
    if s0 == 0 and s1 == 0:
        return "no-change"
    if s0 == 0 or s1 == 0:
        return "mixed"
    if s0 == s1:
        return "both-up" if s0 > 0 else "both-down"
    return "opposite"


def classify_pattern(pop: PopulationSpec, c: float, notion: Notion, regime: Regime,
                     delta: float, solve_result: FairSolveResult | None = None) -> PatternVerdict:
    notion, regime = Notion(notion), Regime(regime)
    res = solve_result or solve(pop, c, notion, regime, delta)
    f_star = bayes_unconstrained(pop, c, regime)
    before = tuple(ntr(f_star, pop, notion, s) for s in (0, 1))
    after = tuple(ntr(res.classifier, pop, notion, s) for s in (0, 1))
    d = (after[0] - before[0], after[1] - before[1])
    adv = rates(f_star, pop).roles[notion].advantaged
    separation = expected = consistent = None
    note = ""
    if regime is Regime.AWARE:
        expected = "advantaged-down/disadvantaged-up"
        consistent = d[adv] <= WEAK_SLACK and d[1 - adv] >= -WEAK_SLACK
    else:
        ext = zeta_extrema(pop, c, notion)
        separation = ext.separation
        if separation != "neither" and mixed_boundary(res, pop):
            # equal margins on both sides: deleting and adding cost the same risk
            note = "tied boundary"
        elif separation != "neither":
            down = d[0] <= WEAK_SLACK and d[1] <= WEAK_SLACK
            up = d[0] >= -WEAK_SLACK and d[1] >= -WEAK_SLACK
            if ext.high_separated and ext.low_separated:
                expected, consistent = "no-change", down and up
            elif ext.high_separated:
                expected, consistent = "both-down", down
            else:
                expected, consistent = "both-up", up
    return PatternVerdict(
        pattern=_label(*d),
        ntr_before=before,
        ntr_after=after,
        separation=separation,
        advantaged=adv,
        lambda_star=res.lambda_star,
        expected=expected,
        consistent=consistent,
        note=note,
    )


@dataclass(frozen=True)
class MaskedMassReport:
    """Group composition of the advantaged-like and disadvantaged-like regions.

    ``group_mass[(s, region)] = P(S=s, X in region)``; ``masked_fraction`` is
    the share of a region's mass whose group differs from the group the
    region resembles (``None`` for a zero-mass region).
    """

    group_mass: Mapping[tuple[int, str], float]
    region_mass: Mapping[str, float]
    masked_fraction: Mapping[str, float | None]


def masked_mass(pop: PopulationSpec, part: RegionPartition) -> MaskedMassReport:
    m = pop.masses
    index = {x: i for i, x in enumerate(pop.cell_ids)}
    group_mass, region_mass, masked = {}, {}, {}
    regions = (("q_high", part.q_high, part.label_high),
               ("q_low", part.q_low, 1 - part.label_high))
    for name, cells, label in regions:
        if not cells:
            continue
        rows = [index[x] for x in sorted(cells)]
        per_group = [float(m[rows, s, :].sum()) for s in (0, 1)]
        total = per_group[0] + per_group[1]
        for s in (0, 1):
            group_mass[(s, name)] = per_group[s]
        region_mass[name] = total
        masked[name] = per_group[1 - label] / total if total > 0 else None
    return MaskedMassReport(group_mass, region_mass, masked)


def order_aligned(g: Mapping[Hashable, float], h: Mapping[Hashable, float],
                  region: Iterable[Hashable], tol: float = ALIGN_TOL) -> bool:
    """Whether ``g(x) <= g(x')`` implies ``h(x) <= h(x')`` for every pair in ``region``.

    Checked pairwise, so ties in ``g`` force ties in ``h``.
    """
    region = list(region)
    gv, hv = [], []
    for x in region:
        a, b = g.get(x), h.get(x)
        if a is None or b is None or (isinstance(a, float) and math.isnan(a)) \
                or (isinstance(b, float) and math.isnan(b)):
            raise ValueError(f"undefined value at {x!r}")
        gv.append(float(a))
        hv.append(float(b))
    if len(region) < 2:
        return True
    gv, hv = np.array(gv), np.array(hv)
    g_le = gv[:, None] <= gv[None, :] + tol
    h_le = hv[:, None] <= hv[None, :] + tol
    return bool(np.all(~g_le | h_le))


@dataclass(frozen=True)
class PrecisionCase:
    case: str
    requires: str
    direction: str
    holds: bool


@dataclass(frozen=True)
class PrecisionVerdict:
    group: int
    precision_before: float | None
    precision_after: float | None
    cases: tuple[PrecisionCase, ...]
    note: str = ""

    @property
    def status(self) -> str:
        if not self.cases:
            return "not-applicable"
        return "verified" if all(c.holds for c in self.cases) else "violated"


def precision_cases(pop: PopulationSpec, c: float, notion: Notion, delta: float,
                    group: int, solve_result: FairSolveResult | None = None) -> PrecisionVerdict:
    """Check the blind-regime alignment conditions that fix a group's precision shift.

    With ``a_max <= b_min`` deletions happen on the advantaged-like side; if
    zeta is aligned there with the group posterior (signed by the advantaged
    group) precision rises, and with the opposite sign it falls. With
    ``b_max < a_min`` additions happen on the disadvantaged-like side, and the
    analogous alignment plus a sup/inf ordering of the posterior across the
    two sides decides the direction. Only cases whose conditions hold appear
    in ``cases``.
    """
    notion = Notion(notion)
    res = solve_result or solve(pop, c, notion, Regime.BLIND, delta)
    if Regime(res.regime) is not Regime.BLIND:
        raise RegimeError("precision cases are defined for the blind regime only")
    f_star = bayes_unconstrained(pop, c, Regime.BLIND)
    before = rates(f_star, pop).groups[group].precision
    after = rates(res.classifier, pop).groups[group].precision
    if before is None or after is None:
        return PrecisionVerdict(group, before, after, (), note="precision undefined")
    part = partition(pop, c, notion, res)
    adv = rates(f_star, pop).roles[notion].advantaged
    sign = 2 * adv - 1
    post = derive_posteriors(pop)
    eta_s = {x: post.eta_aware[(x, group)] for x in pop.cell_ids
             if post.eta_aware[(x, group)] is not None}
    up = {x: sign * v for x, v in eta_s.items()}
    down = {x: -sign * v for x, v in eta_s.items()}
    if mixed_boundary(res, pop):
        return PrecisionVerdict(group, before, after, (), note="tied boundary")
    if part.lambda_star != 0.0 and any(x in eta_s for x in part.q_neutral):
        # a positive-mass neutral set breaks the continuity the case analysis relies on
        return PrecisionVerdict(group, before, after, (),
                                note="neutral cells carry group mass")
    # cells without group-s mass carry no weight in this group's precision
    q_high = [x for x in sorted(part.q_high) if x in eta_s]
    q_low = [x for x in sorted(part.q_low) if x in eta_s]
    sup_h = max((eta_s[x] for x in q_high), default=-math.inf)
    inf_h = min((eta_s[x] for x in q_high), default=math.inf)
    sup_l = max((eta_s[x] for x in q_low), default=-math.inf)
    inf_l = min((eta_s[x] for x in q_low), default=math.inf)
    ge = after >= before - WEAK_SLACK
    le = after <= before + WEAK_SLACK
    cases = []
    if part.high_separated:
        if order_aligned(part.zeta, up, q_high):
            cases.append(PrecisionCase("deletion-aligned", "a_max<=b_min", ">=", ge))
        if order_aligned(part.zeta, down, q_high):
            cases.append(PrecisionCase("deletion-reversed", "a_max<=b_min", "<=", le))
    if part.low_separated:
        if sup_h <= inf_l and order_aligned(part.zeta, up, q_low):
            cases.append(PrecisionCase("addition-aligned", "b_max<a_min", ">=", ge))
        if sup_l <= inf_h and order_aligned(part.zeta, down, q_low):
            cases.append(PrecisionCase("addition-reversed", "b_max<a_min", "<=", le))
    note = "" if cases else "no case applies"
    return PrecisionVerdict(group, before, after, tuple(cases), note)


AWARE_CLAIMS = ("feasibility", "threshold-shift", "aware-rates", "aware-precision", "mech-aware",
                "aware-sweep")
BLIND_CLAIMS = ("feasibility", "blind-regions", "blind-rates", "blind-precision", "mech-blind",
                "blind-sweep")
STATUSES = ("verified", "violated", "not-applicable")


@dataclass(frozen=True)
class AuditEntry:
    claim: str
    regime: Regime
    notion: Notion
    delta: float | None  # None for sweep claims, which span the whole grid
    status: str
    detail: str = ""
    witness: Mapping[str, Any] = field(default_factory=dict)

    def sort_key(self):
        return (self.claim, self.regime.value, self.notion.value,
                -1.0 if self.delta is None else self.delta)


@dataclass(frozen=True)
class AuditReport:
    population: str
    c: float
    entries: tuple[AuditEntry, ...]

    @property
    def has_aware_violation(self) -> bool:
        return any(e.regime is Regime.AWARE and e.status == "violated" for e in self.entries)

    def violations(self) -> list[AuditEntry]:
        return [e for e in self.entries if e.status == "violated"]

    def counts(self) -> dict[str, int]:
        out = dict.fromkeys(STATUSES, 0)
        for e in self.entries:
            out[e.status] += 1
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "population": self.population,
            "c": self.c,
            "counts": self.counts(),
            "entries": [
                {
                    "claim": e.claim,
                    "regime": e.regime.value,
                    "notion": e.notion.value,
                    "delta": e.delta,
                    "status": e.status,
                    "detail": e.detail,
                    "witness": dict(e.witness),
                }
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_csv(self) -> str:
        lines = ["population,c,claim,regime,notion,delta,status,detail"]
        for e in self.entries:
            lines.append(",".join([
                self.population, fmt(self.c), e.claim, e.regime.value, e.notion.value,
                "sweep" if e.delta is None else fmt(e.delta), e.status,
                '"' + e.detail.replace('"', "'") + '"',
            ]))
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        rows = [("claim", "regime", "notion", "delta", "status", "detail")]
        for e in self.entries:
            rows.append((e.claim, e.regime.value, e.notion.value,
                         "sweep" if e.delta is None else fmt(e.delta), e.status, e.detail))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        out = [f"population {self.population or '<unnamed>'}, c={fmt(self.c)}"]
        for r in rows:
            out.append("  ".join(v.ljust(w) for v, w in zip(r[:5], widths)) + "  " + r[5])
        counts = self.counts()
        out.append(", ".join(f"{counts[k]} {k}" for k in STATUSES))
        return "\n".join(out).rstrip() + "\n"


def _unit_name(k) -> str:
    return f"{k[0]}|{k[1]}" if isinstance(k, tuple) else str(k)


def _entry(claim, regime, notion, delta, ok, detail, witness, pop):
    """``ok`` is True/False/None (None: preconditions fail, nothing asserted)."""
    status = "not-applicable" if ok is None else "verified" if ok else "violated"
    witness = dict(witness)
    if status == "violated":
        witness["population"] = pop.to_document()
    return AuditEntry(claim, regime, notion, delta, status, detail, witness)


def _common(pop, c, notion, regime, res, f_star):
    rep0, rep1 = rates(f_star, pop), rates(res.classifier, pop)
    return {
        "lambda_star": res.lambda_star,
        "achieved_dm": res.achieved_dm,
        "achieved_risk": res.achieved_risk,
        "ntr_before": [rep0.ntr(s, notion) for s in (0, 1)],
        "ntr_after": [rep1.ntr(s, notion) for s in (0, 1)],
        "precision_before": [g.precision for g in rep0.groups],
        "precision_after": [g.precision for g in rep1.groups],
    }


def _aware_point(pop, c, notion, delta, res, f_star, tol_boundary):
    regime = Regime.AWARE
    out = []
    w = _common(pop, c, notion, regime, res, f_star)
    adv = rates(f_star, pop).roles[notion].advantaged
    dis = 1 - adv
    w["advantaged"] = adv

    feas = abs(res.achieved_dm) <= delta + TOL_DM
    out.append(_entry("feasibility", regime, notion, delta, feas,
                      f"|DM|={fmt(abs(res.achieved_dm))} vs delta", w, pop))

    table = decision_units(pop, regime)
    nu = correction(pop, notion, regime).nu
    lam = res.lambda_star
    shift = {k: lam * nu[k] for k in table.keys}
    sign_ok = all(shift[k] >= -THRESHOLD_TOL for k in table.keys if k[1] == adv) and \
        all(shift[k] <= THRESHOLD_TOL for k in table.keys if k[1] == dis)
    all_equal = all(abs(v) <= THRESHOLD_TOL for v in shift.values())
    ok = sign_ok and (all_equal == (lam == 0.0))
    out.append(_entry("threshold-shift", regime, notion, delta, ok,
                      "threshold shift >= 0 on advantaged units, <= 0 on disadvantaged",
                      {**w, "threshold_shift": {_unit_name(k): v for k, v in shift.items()}},
                      pop))

    d = [w["ntr_after"][s] - w["ntr_before"][s] for s in (0, 1)]
    ok = d[adv] <= WEAK_SLACK and d[dis] >= -WEAK_SLACK
    out.append(_entry("aware-rates", regime, notion, delta, ok,
                      f"NTR advantaged {fmt(d[adv])}, disadvantaged {fmt(d[dis])}", w, pop))

    pb, pa = w["precision_before"], w["precision_after"]
    checks = []
    if pb[adv] is not None and pa[adv] is not None:
        checks.append(pa[adv] >= pb[adv] - WEAK_SLACK)
    if pb[dis] is not None and pa[dis] is not None:
        checks.append(pa[dis] <= pb[dis] + WEAK_SLACK)
    out.append(_entry("aware-precision", regime, notion, delta, all(checks) if checks else None,
                      "precision advantaged up, disadvantaged down" if checks
                      else "precision undefined", w, pop))

    v0, v1 = f_star.vector(table), res.classifier.vector(table)
    groups = np.array([k[1] for k in table.keys])
    ok = bool(np.all(v1[groups == adv] <= v0[groups == adv] + WEAK_SLACK)
              and np.all(v1[groups == dis] >= v0[groups == dis] - WEAK_SLACK))
    out.append(_entry("mech-aware", regime, notion, delta, ok,
                      "deletions only on advantaged units, additions only on disadvantaged",
                      w, pop))
    return out


def _blind_point(pop, c, notion, delta, res, f_star):
    regime = Regime.BLIND
    out = []
    w = _common(pop, c, notion, regime, res, f_star)
    part = partition(pop, c, notion, res)
    tied = mixed_boundary(res, pop)
    w.update(separation=part.separation, a_max=part.a_max, a_min=part.a_min,
             b_max=part.b_max, b_min=part.b_min)

    feas = abs(res.achieved_dm) <= delta + TOL_DM
    out.append(_entry("feasibility", regime, notion, delta, feas,
                      f"|DM|={fmt(abs(res.achieved_dm))} vs delta", w, pop))

    nu = correction(pop, notion, regime).nu
    lam = res.lambda_star
    shift = {x: lam * nu[x] for x in nu}
    ok = all(shift[x] > 0 for x in part.q_high) and all(shift[x] < 0 for x in part.q_low) \
        and all(shift[x] == 0 for x in part.q_neutral)
    out.append(_entry("blind-regions", regime, notion, delta, ok,
                      f"{len(part.q_high)} high, {len(part.q_low)} low, "
                      f"{len(part.q_neutral)} neutral cells",
                      {**w, "threshold_shift": shift}, pop))

    sep = part.separation
    if sep == "neither":
        ok, why = None, "no separation holds"
    elif tied:
        ok, why = None, "tied boundary"
    else:
        pv = classify_pattern(pop, c, notion, regime, delta, res)
        ok, why = pv.consistent, f"{sep}: expected {pv.expected}, observed {pv.pattern}"
    out.append(_entry("blind-rates", regime, notion, delta, ok, why, w, pop))

    verdicts = [precision_cases(pop, c, notion, delta, s, res) for s in (0, 1)]
    applicable = [v for v in verdicts if v.cases]
    ok = None if not applicable else all(v.status == "verified" for v in applicable)
    detail = "; ".join(
        f"group {v.group}: " + (",".join(f"{k.case} {k.direction}" for k in v.cases) or v.note)
        for v in verdicts)
    cases = {f"group_{v.group}": [k.case for k in v.cases] for v in verdicts}
    out.append(_entry("blind-precision", regime, notion, delta, ok, detail, {**w, "cases": cases}, pop))

    table = decision_units(pop, regime)
    v0, v1 = f_star.vector(table), res.classifier.vector(table)
    moved = [x for x, a, b in zip(table.keys, v0, v1) if abs(a - b) > WEAK_SLACK]
    if sep == "neither":
        ok, why = None, "no separation holds"
    elif tied:
        ok, why = None, "tied boundary"
    else:
        ok, why = True, []
        if part.high_separated:
            ok &= bool(np.all(v1 <= v0 + WEAK_SLACK)) and all(x in part.q_high for x in moved)
            why.append("deletions confined to the advantaged-like region")
        if part.low_separated:
            ok &= bool(np.all(v1 >= v0 - WEAK_SLACK)) and all(x in part.q_low for x in moved)
            why.append("additions confined to the disadvantaged-like region")
        why = "; ".join(why)
    out.append(_entry("mech-blind", regime, notion, delta, ok, why,
                      {**w, "flipped": sorted(moved)}, pop))
    return out


def _sweep_entry(pop, c, notion, regime, deltas, claim, tols):
    sweep = delta_sweep(pop, c, notion, regime, deltas, **tols)
    w = {"deltas": list(deltas),
         "ntr": [[ntr(r.classifier, pop, notion, s) for r in sweep] for s in (0, 1)],
         "expectation": {str(k): v for k, v in sweep.expectation.items()}}
    if len(deltas) < 2:
        ok, why = None, "fewer than two tolerances"
    elif not sweep.expectation:
        ok, why = None, "no separation holds"
    elif regime is Regime.BLIND and any(mixed_boundary(r, pop) for r in sweep):
        ok, why = None, "tied boundary"
    else:
        ok = not sweep.violations
        why = f"{len(sweep.violations)} monotonicity breaks"
        if sweep.violations:
            w["breaks"] = [[v.group, v.delta_before, v.delta_after, v.rate_before, v.rate_after]
                           for v in sweep.violations]
    return _entry(claim, regime, notion, None, ok, why, w, pop)


def audit(pop: PopulationSpec, c: float, grid: Iterable[tuple[Any, Any, float]],
          **tols) -> AuditReport:
    """Run every applicable claim at each ``(notion, regime, delta)`` grid point.

    Sweep claims (aware-sweep, blind-sweep) run once per notion and regime over the
    sorted tolerances of the grid. Entries come back sorted by claim,
    regime, notion and tolerance.
    """
    points = sorted({(Notion(n), Regime(r), float(d)) for n, r, d in grid},
                    key=lambda t: (t[0].value, t[1].value, t[2]))
    for _, _, d in points:
        if not 0.0 <= d <= 1.0:
            raise ValueError(f"grid tolerance {d!r} outside [0, 1]")
    tol_boundary = tols.get("tol_boundary", THRESHOLD_TOL)
    entries: list[AuditEntry] = []
    stars = {r: bayes_unconstrained(pop, c, r, tol_boundary) for r in Regime}
    for notion, regime, delta in points:
        res = solve(pop, c, notion, regime, delta, **tols)
        if regime is Regime.AWARE:
            entries += _aware_point(pop, c, notion, delta, res, stars[regime], tol_boundary)
        else:
            entries += _blind_point(pop, c, notion, delta, res, stars[regime])
    pairs = sorted({(n, r) for n, r, _ in points}, key=lambda t: (t[0].value, t[1].value))
    for notion, regime in pairs:
        deltas = [d for n, r, d in points if (n, r) == (notion, regime)]
        claim = "aware-sweep" if regime is Regime.AWARE else "blind-sweep"
        entries.append(_sweep_entry(pop, c, notion, regime, deltas, claim, tols))
    entries.sort(key=AuditEntry.sort_key)
    return AuditReport(pop.name, float(c), tuple(entries))


def full_grid(deltas: Iterable[float], notions: Iterable[Any] = tuple(Notion),
              regimes: Iterable[Any] = tuple(Regime)) -> list[tuple[Notion, Regime, float]]:
    notions, regimes = list(notions), list(regimes)
    return [(Notion(n), Regime(r), float(d)) for n in notions for r in regimes for d in deltas]
