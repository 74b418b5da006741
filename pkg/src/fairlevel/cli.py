"""``fairlevel`` command-line front end.

Exit codes: 0 ok, 1 invalid input, 2 solver failure, 3 aware-regime audit
violation, 4 certification failure. Errors go to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from fairlevel.analysis import audit
from fairlevel.classifier import Notion, Regime, rates, risk_cs
from fairlevel.corpus import load_corpus
from fairlevel.fairbayes import SolverError, bayes_unconstrained, delta_sweep, solve
from fairlevel.formatting import dumps, fmt
from fairlevel.oracle import OracleError, certify
from fairlevel.population import (
    PopulationError,
    PopulationValidationError,
    derive_posteriors,
    load_population,
)
from fairlevel.scenarios import SCENARIOS, ScenarioError, scenario

log = logging.getLogger("fairlevel")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_AWARE_VIOLATION, EXIT_CERTIFY = 0, 1, 2, 3, 4
AUDIT_DELTAS = (0.0, 0.05, 0.2, 0.5)
SWEEP_GRID = "0:1:0.1"
SWEEP_COLUMNS = ("delta", "lambda_star", "risk", "dm", "gsr_0", "gsr_1", "tpr_0", "tpr_1",
                 "fpr_0", "fpr_1", "ntr_0", "ntr_1", "prec_0", "prec_1")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; 2 is reserved for solver failures here
    def error(self, message):
        raise UsageError(message)


def _params(pairs: Sequence[str]) -> dict[str, float]:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise UsageError(f"--param expects key=value, got {pair!r}")
        try:
            out[key] = float(value)
        except ValueError:
            raise UsageError(f"--param {key}: {value!r} is not a number") from None
    return out


def parse_delta_grid(text: str) -> list[float]:
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--delta-grid expects start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start or start < 0 or stop > 1:
        raise UsageError("--delta-grid needs 0 <= start <= stop <= 1 and step > 0")
    n = int(round((stop - start) / step + 1e-9)) + 1
    grid = [round(start + i * step, 12) for i in range(n)]
    return [d for d in grid if d <= stop + 1e-12]


def _unit(k) -> str:
    return f"{k[0]}|{k[1]}" if isinstance(k, tuple) else str(k)


def _populations(args):
    sources = sum(bool(v) for v in (args.pop, args.scenario, getattr(args, "corpus", False)))
    if sources != 1:
        raise UsageError("give exactly one of --pop, --scenario"
                         + (", --corpus" if hasattr(args, "corpus") else ""))
    if args.param and not args.scenario:
        raise UsageError("--param only applies with --scenario")
    if getattr(args, "corpus", False):
        return load_corpus()
    if args.scenario:
        pop = scenario(args.scenario, _params(args.param))
        return [pop]
    path = Path(args.pop)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    pop = load_population(text)
    if not pop.name:
        pop = type(pop)(pop.entries, name=path.name.removesuffix(".pop.json"),
                        description=pop.description)
    return [pop]


def _combos(args):
    notions = list(Notion) if args.notion == "all" else [Notion(args.notion)]
    regimes = list(Regime) if args.regime == "both" else [Regime(args.regime)]
    return [(n, r) for n in notions for r in regimes]


def _deltas(args, default):
    if args.delta is not None and args.delta_grid is not None:
        raise UsageError("give --delta or --delta-grid, not both")
    if args.delta_grid is not None:
        grid = parse_delta_grid(args.delta_grid)
    elif args.delta is not None:
        grid = [args.delta]
    else:
        grid = list(default)
    for d in grid:
        if not 0.0 <= d <= 1.0:
            raise UsageError(f"tolerance {d!r} outside [0, 1]")
    return grid


def _tols(args):
    tols = {}
    if args.tol_dm is not None:
        tols["tol_dm"] = args.tol_dm
    if args.tol_boundary is not None:
        tols["tol_boundary"] = args.tol_boundary
    return tols


class _Sink:
    """Collects named artifacts; writes them under ``--out`` or to stdout."""

    def __init__(self, out):
        self.out = Path(out) if out else None
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, text: str, echo: bool = False):
        if self.out:
            (self.out / name).write_text(text)
            if echo:
                sys.stdout.write(text)
        else:
            sys.stdout.write(text)


def result_dict(res, pop) -> dict:
    return {
        "population": pop.name,
        "notion": res.notion.value,
        "regime": res.regime.value,
        "c": res.c,
        "delta": res.tolerance_delta,
        "lambda_star": res.lambda_star,
        "already_fair": res.already_fair,
        "achieved_dm": res.achieved_dm,
        "achieved_risk": res.achieved_risk,
        "accept": {_unit(k): v for k, v in res.classifier.accept.items()},
        "boundary_alpha": {_unit(k): v for k, v in res.boundary_alpha.items()},
    }


def report_csv(pop, c, notion, pairs) -> str:
    lines = ["classifier,group,gsr,tpr,fpr,ntr,precision,risk,dm,advantaged"]
    for label, f in pairs:
        rep = rates(f, pop, c)
        adv = rep.roles[notion]
        for s in (0, 1):
            g = rep.groups[s]
            lines.append(",".join([label, str(s), fmt(g.gsr), fmt(g.tpr), fmt(g.fpr),
                                   fmt(g.ntr(notion)), fmt(g.precision), fmt(rep.risk),
                                   fmt(rep.disparity[notion]), str(adv.advantaged)]))
    return "\n".join(lines) + "\n"


def sweep_csv(pop, sweep) -> str:
    lines = [",".join(SWEEP_COLUMNS)]
    for res in sweep:
        rep = rates(res.classifier, pop)
        g0, g1 = rep.groups
        row = [res.tolerance_delta, res.lambda_star, res.achieved_risk, res.achieved_dm,
               g0.gsr, g1.gsr, g0.tpr, g1.tpr, g0.fpr, g1.fpr,
               g0.ntr(res.notion), g1.ntr(res.notion), g0.precision, g1.precision]
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _cmd_validate(args, sink):
    pops = _populations(args)
    docs = []
    for pop in pops:
        post = derive_posteriors(pop)
        docs.append({
            "name": pop.name,
            "valid": True,
            "cells": len(pop.cell_ids),
            "prior_s": {str(s): v for s, v in post.prior_s.items()},
            "prior_sy": {f"{s}{y}": v for (s, y), v in post.prior_sy.items()},
            "eta_blind": post.eta_blind,
            "eta_aware": {_unit(k): v for k, v in post.eta_aware.items()},
            "group_given_x": {_unit(k): v for k, v in post.group_given_x.items()},
        })
    sink.emit("validate.json", dumps(docs[0] if len(docs) == 1 else docs))
    return EXIT_OK


def _cmd_solve(args, sink):
    if args.delta_grid is not None:
        raise UsageError("solve takes a single --delta; use sweep for a grid")
    (pop,) = _populations(args)
    delta = args.delta if args.delta is not None else 0.0
    _deltas(args, [delta])
    docs = []
    for notion, regime in _combos(args):
        res = solve(pop, args.c, notion, regime, delta, **_tols(args))
        docs.append(result_dict(res, pop))
        f_star = bayes_unconstrained(pop, args.c, regime)
        if sink.out:
            sink.emit(f"report_{notion.value}_{regime.value}.csv",
                      report_csv(pop, args.c, notion, [("bayes", f_star), ("fair", res.classifier)]))
    if sink.out:
        for doc in docs:
            sink.emit(f"solve_{doc['notion']}_{doc['regime']}.json", dumps(doc))
    else:
        sink.emit("", dumps(docs[0] if len(docs) == 1 else docs))
    return EXIT_OK


def _cmd_sweep(args, sink):
    (pop,) = _populations(args)
    deltas = _deltas(args, parse_delta_grid(SWEEP_GRID))
    for notion, regime in _combos(args):
        sweep = delta_sweep(pop, args.c, notion, regime, deltas, **_tols(args))
        text = sweep_csv(pop, sweep)
        if sink.out:
            sink.emit(f"sweep_{notion.value}_{regime.value}.csv", text)
        else:
            sink.emit("", f"# {notion.value} {regime.value}\n" + text)
        for v in sweep.violations:
            log.warning("group %d rate moved against %s between delta %s and %s",
                        v.group, v.expected, fmt(v.delta_before), fmt(v.delta_after))
    return EXIT_OK


def _cmd_audit(args, sink):
    pops = _populations(args)
    deltas = _deltas(args, AUDIT_DELTAS)
    combos = _combos(args)
    grid = [(n, r, d) for n, r in combos for d in deltas]
    reports = [audit(pop, args.c, grid, **_tols(args)) for pop in pops]
    if len(reports) == 1:
        doc = reports[0].to_dict()
    else:
        counts = {k: sum(r.counts()[k] for r in reports) for k in reports[0].counts()}
        doc = {"c": args.c, "counts": counts, "reports": [r.to_dict() for r in reports]}
    csv_text = reports[0].to_csv() + "".join(r.to_csv().split("\n", 1)[1] for r in reports[1:])
    table = "".join(r.to_table() for r in reports)
    if sink.out:
        sink.emit("audit.json", dumps(doc))
        sink.emit("audit.csv", csv_text)
        sink.emit("audit.txt", table, echo=True)
    else:
        sink.emit("", table)
    bad = [r.population for r in reports if r.has_aware_violation]
    if bad:
        log.error("aware-regime claims violated on %s", ", ".join(bad))
        return EXIT_AWARE_VIOLATION
    return EXIT_OK


def _cmd_certify(args, sink):
    pops = _populations(args)
    deltas = _deltas(args, AUDIT_DELTAS)
    rows, failed = [], 0
    for pop in pops:
        for notion, regime in _combos(args):
            for d in deltas:
                cert = certify(pop, args.c, notion, regime, d, grid_resolution=args.grid,
                               **_tols(args))
                failed += not cert.passed
                rows.append({
                    "population": pop.name, "notion": notion.value, "regime": regime.value,
                    "delta": d, "solver_risk": cert.solver.achieved_risk,
                    "oracle_risk": cert.oracle.best_risk, "gap": cert.gap, "passed": cert.passed,
                })
    cols = ("population", "notion", "regime", "delta", "solver_risk", "oracle_risk", "gap", "passed")
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(
            str(r[k]).lower() if isinstance(r[k], bool) else r[k] if isinstance(r[k], str)
            else fmt(r[k]) for k in cols))
    csv_text = "\n".join(lines) + "\n"
    if sink.out:
        sink.emit("certify.json", dumps({"c": args.c, "grid_resolution": args.grid,
                                         "failed": failed, "results": rows}))
        sink.emit("certify.csv", csv_text)
    else:
        sink.emit("", csv_text)
    if failed:
        log.error("%d of %d certifications failed", failed, len(rows))
        return EXIT_CERTIFY
    return EXIT_OK


def chart_svg(title: str, ntr_before, ntr_after, dm_before, dm_after) -> str:
    """Grouped bars: per group, NTR under the unconstrained and the fair rule."""
    width, height, base, top = 420, 300, 240, 50
    scale = base - top
    colours = ("#7f7f7f", "#1f77b4")
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<text x="{width // 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="40" y1="{base}" x2="{width - 20}" y2="{base}" stroke="black"/>',
        f'<line x1="40" y1="{top}" x2="40" y2="{base}" stroke="black"/>',
    ]
    for tick in (0.0, 0.5, 1.0):
        y = base - tick * scale
        out.append(f'<text x="34" y="{y + 4:.1f}" text-anchor="end">{tick:g}</text>')
    for s in (0, 1):
        x0 = 80 + s * 160
        for j, (label, vals) in enumerate((("Bayes", ntr_before), ("fair", ntr_after))):
            h = vals[s] * scale
            x = x0 + j * 50
            out.append(f'<rect x="{x}" y="{base - h:.3f}" width="40" height="{h:.3f}" '
                       f'fill="{colours[j]}"/>')
            out.append(f'<text x="{x + 20}" y="{base - h - 4:.3f}" text-anchor="middle">'
                       f'{vals[s]:.3f}</text>')
        out.append(f'<text x="{x0 + 45}" y="{base + 18}" text-anchor="middle">group {s}</text>')
    for j, label in enumerate(("Bayes", "fair")):
        out.append(f'<rect x="{width - 150 + j * 70}" y="{height - 30}" width="10" height="10" '
                   f'fill="{colours[j]}"/>')
        out.append(f'<text x="{width - 136 + j * 70}" y="{height - 21}">{label}</text>')
    out.append(f'<text x="40" y="{height - 21}">DM {dm_before:+.3f} &#8594; {dm_after:+.3f}'
               f' (gap {abs(dm_before) - abs(dm_after):+.3f})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _cmd_chart(args, sink):
    if args.delta_grid is not None:
        raise UsageError("chart takes a single --delta")
    (pop,) = _populations(args)
    combos = _combos(args)
    if len(combos) > 1 and not sink.out:
        raise UsageError("chart with several notion/regime pairs needs --out")
    delta = args.delta if args.delta is not None else 0.0
    _deltas(args, [delta])
    for notion, regime in combos:
        res = solve(pop, args.c, notion, regime, delta, **_tols(args))
        f_star = bayes_unconstrained(pop, args.c, regime)
        before, after = rates(f_star, pop), rates(res.classifier, pop)
        nb = [before.ntr(s, notion) for s in (0, 1)]
        na = [after.ntr(s, notion) for s in (0, 1)]
        db, da = before.disparity[notion], after.disparity[notion]
        title = (f"{pop.name or 'population'}: NTR ({notion.value}, {regime.value}, "
                 f"delta={delta:g})")
        stem = f"chart_{notion.value}_{regime.value}"
        sink.emit(f"{stem}.svg", chart_svg(title, nb, na, db, da))
        if sink.out:
            rows = ["classifier,ntr_0,ntr_1,dm,risk",
                    ",".join(["bayes", fmt(nb[0]), fmt(nb[1]), fmt(db),
                              fmt(risk_cs(f_star, pop, args.c))]),
                    ",".join(["fair", fmt(na[0]), fmt(na[1]), fmt(da), fmt(res.achieved_risk)])]
            sink.emit(f"{stem}.csv", "\n".join(rows) + "\n")
    return EXIT_OK


COMMANDS = {
    "validate": _cmd_validate,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "audit": _cmd_audit,
    "certify": _cmd_certify,
    "chart": _cmd_chart,
}


def _add_common(p: argparse.ArgumentParser, notion: str = "all", regime: str = "both"):
    # added per subcommand: parents= would share Action objects, so one
    # subcommand's defaults would leak into the others
    src = p.add_argument_group("population")
    src.add_argument("--pop", metavar="FILE", help="population-spec document (.pop.json)")
    src.add_argument("--scenario", choices=SCENARIOS)
    src.add_argument("--param", action="append", default=[], metavar="K=V",
                     help="scenario parameter, repeatable")
    p.add_argument("--c", type=float, default=0.5, help="cost of a false positive")
    p.add_argument("--notion", choices=["dp", "eo", "pe", "all"], default=notion)
    p.add_argument("--regime", choices=["aware", "blind", "both"], default=regime)
    p.add_argument("--delta", type=float)
    p.add_argument("--delta-grid", metavar="START:STOP:STEP")
    p.add_argument("--out", metavar="DIR", help="write artifacts here instead of stdout")
    p.add_argument("--tol-dm", type=float)
    p.add_argument("--tol-boundary", type=float)
    p.add_argument("--seed", type=int, help="reserved; every computation is deterministic")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairlevel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "chart":
            _add_common(p, notion="dp", regime="aware")
        else:
            _add_common(p)
        if name in ("validate", "audit", "certify"):
            p.add_argument("--corpus", action="store_true", help="use every bundled population")
        if name == "certify":
            p.add_argument("--grid", type=int, default=5, help="oracle grid resolution")
    return parser


def _fail(kind: str, message: str, code: int, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("FAIRLEVEL_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        if not 0.0 <= args.c <= 1.0:
            raise UsageError(f"--c {args.c!r} outside [0, 1]")
        return COMMANDS[args.command](args, _Sink(args.out))
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_INVALID)
    except PopulationValidationError as exc:
        return _fail("validation", str(exc), EXIT_INVALID, invariant=exc.invariant)
    except (PopulationError, ScenarioError) as exc:
        return _fail("validation", str(exc), EXIT_INVALID)
    except SolverError as exc:
        return _fail("solver", str(exc), EXIT_SOLVER)
    except OracleError as exc:
        return _fail("certification", str(exc), EXIT_CERTIFY)
    except ValueError as exc:
        return _fail("validation", str(exc), EXIT_INVALID)


if __name__ == "__main__":
    sys.exit(main())
