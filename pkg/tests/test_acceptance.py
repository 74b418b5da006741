"""One test per acceptance criterion; each records a PASS/FAIL line for the summary."""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from fairlevel.analysis import classify_pattern, order_aligned, partition, precision_cases
from fairlevel.classifier import Notion, RandomizedClassifier, Regime, decision_units, ntr, rates
from fairlevel.fairbayes import (
    bayes_unconstrained,
    correction,
    delta_sweep,
    mixed_boundary,
    solve,
    zeta_extrema,
)
from fairlevel.oracle import certify
from fairlevel.scenarios import scenario

DELTAS = (0.0, 0.05, 0.2, 0.5)
SWEEP = [round(0.1 * i, 12) for i in range(11)]
C = 0.5
SLACK = 1e-9


def test_oracle_equivalence(corpus, record):
    start = time.perf_counter()
    worst, failures, runs = 0.0, [], 0
    for pop in corpus:
        for regime in Regime:
            assert len(decision_units(pop, regime).keys) <= 6
            for notion in Notion:
                for delta in DELTAS:
                    cert = certify(pop, C, notion, regime, delta, rtol=1e-4)
                    runs += 1
                    rel = cert.gap / max(abs(cert.oracle.best_risk), 1e-300)
                    worst = max(worst, rel if cert.oracle.best_risk else cert.gap)
                    if not cert.passed:
                        failures.append((pop.name, regime.value, notion.value, delta, cert.gap))
    elapsed = time.perf_counter() - start
    ok = len(corpus) >= 20 and not failures and elapsed < 120
    record("oracle equivalence", ok,
           f"{len(corpus)} populations, {runs} solves, worst rel gap {worst:.2e}, {elapsed:.1f}s")
    assert ok, failures[:3]


def test_threshold_shift(corpus, record):
    bad, runs = [], 0
    for pop in corpus:
        table = decision_units(pop, Regime.AWARE)
        for notion in Notion:
            nu = correction(pop, notion, Regime.AWARE).nu
            adv = rates(bayes_unconstrained(pop, C, Regime.AWARE), pop).roles[notion].advantaged
            for delta in DELTAS:
                res = solve(pop, C, notion, Regime.AWARE, delta)
                lam = res.lambda_star
                runs += 1
                thr = {k: C + lam * nu[k] for k in table.keys}
                high = [thr[k] for k in table.keys if k[1] == adv]
                low = [thr[k] for k in table.keys if k[1] != adv]
                ok = all(t >= C - 1e-12 for t in high) and all(t <= C + 1e-12 for t in low)
                equal = all(abs(t - C) <= 1e-12 for t in high + low)
                if not ok or equal != (lam == 0.0):
                    bad.append((pop.name, notion.value, delta, lam))
    record("threshold shift", not bad, f"{runs} aware solves, {len(bad)} violations")
    assert not bad, bad[:3]


def test_aware_rates_and_precision(corpus, record):
    bad, ntr_checks, prec_checks = [], 0, 0
    for pop in corpus:
        f_star = bayes_unconstrained(pop, C, Regime.AWARE)
        before = rates(f_star, pop)
        for notion in Notion:
            adv = before.roles[notion].advantaged
            dis = 1 - adv
            for delta in DELTAS:
                after = rates(solve(pop, C, notion, Regime.AWARE, delta).classifier, pop)
                ntr_checks += 1
                if after.ntr(adv, notion) > before.ntr(adv, notion) + SLACK \
                        or after.ntr(dis, notion) < before.ntr(dis, notion) - SLACK:
                    bad.append(("ntr", pop.name, notion.value, delta))
                pb = [g.precision for g in before.groups]
                pa = [g.precision for g in after.groups]
                if None not in (pb[adv], pa[adv]):
                    prec_checks += 1
                    if pa[adv] < pb[adv] - SLACK:
                        bad.append(("precision", pop.name, notion.value, delta, adv))
                if None not in (pb[dis], pa[dis]):
                    prec_checks += 1
                    if pa[dis] > pb[dis] + SLACK:
                        bad.append(("precision", pop.name, notion.value, delta, dis))
    record("aware rates and precision", not bad,
           f"{ntr_checks} rate checks, {prec_checks} precision checks, {len(bad)} violations")
    assert not bad, bad[:3]


def test_aware_sweeps(corpus, record):
    bad, sweeps = [], 0
    for pop in corpus:
        f_star = bayes_unconstrained(pop, C, Regime.AWARE)
        for notion in Notion:
            adv = rates(f_star, pop).roles[notion].advantaged
            sweep = delta_sweep(pop, C, notion, Regime.AWARE, SWEEP)
            sweeps += 1
            hi = [ntr(r.classifier, pop, notion, adv) for r in sweep]
            lo = [ntr(r.classifier, pop, notion, 1 - adv) for r in sweep]
            if any(b < a - SLACK for a, b in zip(hi, hi[1:])) \
                    or any(b > a + SLACK for a, b in zip(lo, lo[1:])):
                bad.append((pop.name, notion.value))
    record("aware sweeps", not bad, f"{sweeps} sweeps of {len(SWEEP)} points, {len(bad)} breaks")
    assert not bad, bad


def _separated(name):
    pop = scenario(name)
    out = []
    for notion in Notion:
        ext = zeta_extrema(pop, C, notion)
        holds = ext.high_separated if name.endswith("high") else ext.low_separated
        if holds:
            out.append(notion)
    return pop, out


def test_blind_same_direction(corpus, record):
    bad, checked = [], []
    for name, direction in (("blind-separated-high", -1), ("blind-separated-low", 1)):
        pop, notions = _separated(name)
        if not notions:
            bad.append((name, "separation does not hold"))
        f_star = bayes_unconstrained(pop, C, Regime.BLIND)
        for notion in notions:
            checked.append(f"{name}/{notion.value}")
            for delta in DELTAS:
                res = solve(pop, C, notion, Regime.BLIND, delta)
                part = partition(pop, C, notion, res)
                assert part.separation != "neither"
                for s in (0, 1):
                    d = ntr(res.classifier, pop, notion, s) - ntr(f_star, pop, notion, s)
                    if d * direction < -SLACK:
                        bad.append((name, notion.value, delta, s, d))
    witnesses = []
    for pop in corpus:
        for notion in Notion:
            v = classify_pattern(pop, C, notion, Regime.BLIND, 0.0)
            res = solve(pop, C, notion, Regime.BLIND, 0.0)
            if v.pattern == "both-down" and v.separation == "a_max<=b_min" and v.consistent \
                    and not mixed_boundary(res, pop) and all(d < -SLACK for d in v.deltas):
                witnesses.append(f"{pop.name}/{notion.value}")
    ok = not bad and bool(witnesses)
    record("blind same-direction rates", ok, f"checked {', '.join(checked)}; leveling-down witnesses "
                            f"{', '.join(witnesses) or 'none'}")
    assert ok, bad[:3]


def test_blind_sweeps(record):
    bad, sweeps = [], 0
    for name, expected in (("blind-separated-high", "non-decreasing"),
                           ("blind-separated-low", "non-increasing")):
        pop, notions = _separated(name)
        for notion in notions:
            sweep = delta_sweep(pop, C, notion, Regime.BLIND, SWEEP)
            sweeps += 1
            if set(sweep.expectation.values()) != {expected}:
                bad.append((name, notion.value, dict(sweep.expectation)))
            for s in (0, 1):
                series = [ntr(r.classifier, pop, notion, s) for r in sweep]
                steps = np.diff(series)
                if (expected == "non-decreasing" and np.any(steps < -SLACK)) or \
                        (expected == "non-increasing" and np.any(steps > SLACK)):
                    bad.append((name, notion.value, s))
    ok = not bad and sweeps > 0
    record("blind sweeps", ok, f"{sweeps} separated blind sweeps, {len(bad)} breaks")
    assert ok, bad


def _alignment_pairs(rng, n_pairs=1000):
    for _ in range(n_pairs):
        n = int(rng.integers(2, 9))
        keys = [f"x{i}" for i in range(n)]
        g = dict(zip(keys, np.round(rng.normal(size=n), 2)))
        h = dict(zip(keys, np.round(rng.normal(size=n), 2)))
        yield g, h, keys


def test_precision_cases(corpus, record):
    by_name = {p.name: p for p in corpus}
    targets = [
        ("precision-addition-reversed", Notion.DP, 0.0, 0, "addition-reversed"),
        ("precision-addition-aligned", Notion.DP, 0.0, 1, "addition-aligned"),
        ("precision-deletion", Notion.PE, 0.083, 0, "deletion-aligned"),
        ("precision-deletion", Notion.PE, 0.083, 1, "deletion-reversed"),
    ]
    bad, seen = [], set()
    for name, notion, delta, group, case in targets:
        v = precision_cases(by_name[name], C, notion, delta, group)
        cases = {k.case: k for k in v.cases}
        if case not in cases or not cases[case].holds:
            bad.append((name, group, case, v.note))
        else:
            seen.add(case)
    rng = np.random.default_rng(20261015)
    align_bad = 0
    for g, h, keys in _alignment_pairs(rng):
        t = {k: math.exp(v) * 3 - 1 for k, v in h.items()}
        if not order_aligned(g, g, keys) or not order_aligned(h, h, keys) \
                or order_aligned(g, h, keys, tol=0.0) != order_aligned(g, t, keys, tol=0.0):
            align_bad += 1
    ok = not bad and len(seen) == 4 and align_bad == 0
    record("precision cases", ok, f"cases verified: {', '.join(sorted(seen))}; "
                            f"alignment checker failures on 1000 pairs: {align_bad}")
    assert ok, bad


def test_trivial_limits(corpus, record):
    bad = []
    for pop in corpus:
        for regime in Regime:
            f_star = bayes_unconstrained(pop, C, regime)
            dm_star = rates(f_star, pop).disparity
            for notion in Notion:
                res = solve(pop, C, notion, regime, min(1.0, abs(dm_star[notion])))
                if res.lambda_star != 0.0 or res.classifier.accept != f_star.accept:
                    bad.append(("unconstrained", pop.name, regime.value, notion.value))
            units = decision_units(pop, regime).keys
            for c, value in ((0.0, 1.0), (1.0, 0.0)):
                for notion in Notion:
                    res = solve(pop, c, notion, regime, 0.0)
                    if any(res.classifier.accept[k] != value for k in units):
                        bad.append(("cost", pop.name, regime.value, c))
            accept_all = rates(RandomizedClassifier.constant(pop, regime, 1.0), pop)
            if any(abs(accept_all.disparity[n]) > 1e-12 for n in Notion):
                bad.append(("accept-all", pop.name, regime.value))
    null = [scenario("symmetric-null"), scenario("symmetric-null", {"prior1": 0.3})]
    null += [p for p in corpus if p.name.startswith("symmetric-null")]
    for pop in null:
        for regime in Regime:
            for notion in Notion:
                if not solve(pop, C, notion, regime, 0.0).already_fair:
                    bad.append(("null", pop.name, regime.value, notion.value))
    record("trivial limits", not bad, f"{len(corpus)} populations, "
                                      f"{len(null)} symmetric-null, {len(bad)} failures")
    assert not bad, bad[:3]


def test_determinism(tmp_path, record):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        proc = subprocess.run([sys.executable, "-m", "fairlevel", "audit", "--corpus",
                               "--out", str(out)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append({n: (out / n).read_bytes() for n in ("audit.json", "audit.csv")})
    same = outputs[0] == outputs[1]
    lines = outputs[0]["audit.csv"].count(b"\n")
    record("determinism", same, f"audit --corpus twice, JSON and CSV ({lines} lines) identical")
    assert same
