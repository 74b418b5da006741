"""Built-in population families used by tests, demos and the CLI."""

from __future__ import annotations

from typing import Callable, Mapping

from fairlevel.population import PopulationSpec, PopulationValidationError, from_atoms


class ScenarioError(ValueError):
    """Unknown scenario name, unknown parameter, or parameter out of range."""


def from_rows(rows, name: str = "", description: str = "") -> PopulationSpec:
    """Build a spec from ``(cell, P(x), P(S=1|x), eta(x,1), eta(x,0))`` rows.

    Zero-mass atoms are dropped.
    """
    atoms = []
    for x, px, p1, eta1, eta0 in rows:
        for s, ps, eta in ((1, p1, eta1), (0, 1.0 - p1, eta0)):
            atoms.append((x, s, 1, px * ps * eta))
            atoms.append((x, s, 0, px * ps * (1.0 - eta)))
    return from_atoms([a for a in atoms if a[3] > 0], name=name, description=description)


def _prob(params, key, lo=0.0, hi=1.0, open_lo=False, open_hi=False):
    v = float(params[key])
    if v < lo or v > hi or (open_lo and v == lo) or (open_hi and v == hi):
        left, right = "(" if open_lo else "[", ")" if open_hi else "]"
        raise ScenarioError(f"parameter {key}={v!r} outside {left}{lo}, {hi}{right}")
    return v


def _two_point_aware(p):
    eta1 = _prob(p, "eta1")
    eta0 = _prob(p, "eta0")
    prior1 = _prob(p, "prior1", open_lo=True, open_hi=True)
    return [("x", 1.0, prior1, eta1, eta0)], (
        f"one shared cell; eta(x,1)={eta1:g}, eta(x,0)={eta0:g}, P(S=1)={prior1:g}"
    )


def _symmetric_null(p):
    prior1 = _prob(p, "prior1", open_lo=True, open_hi=True)
    rows = [("x0", 0.3, prior1, 0.8, 0.8),
            ("x1", 0.4, prior1, 0.45, 0.45),
            ("x2", 0.3, prior1, 0.15, 0.15)]
    return rows, "both groups share every cell-conditional distribution"


# a_max <= b_min for DP and PE; strict both-down at delta=0 without emptying the accepted set
_SEPARATED_HIGH = [("x0", 0.14, 0.2, 0.15, 0.65),
                   ("x1", 0.33, 0.8, 0.35, 0.45),
                   ("x2", 0.16, 0.3, 0.75, 0.5),
                   ("x3", 0.37, 0.7, 0.25, 0.9)]
# b_max < a_min for DP, EO and PE
_SEPARATED_LOW = [("x0", 0.5, 0.7, 0.9, 0.5),
                  ("x1", 0.2, 0.8, 0.9, 0.7),
                  ("x2", 0.3, 0.3, 0.3, 0.3)]


def _separated_high(p):
    return list(_SEPARATED_HIGH), "blind regime with a_max <= b_min under DP"


def _separated_low(p):
    return list(_SEPARATED_LOW), "blind regime with b_max < a_min under DP"


def _custom_grid(p):
    n = p["n"]
    if n != int(n) or not 2 <= n <= 6:
        raise ScenarioError(f"parameter n={n!r} must be an integer in [2, 6]")
    n = int(n)
    prior1 = _prob(p, "prior1", open_lo=True, open_hi=True)
    tilt = _prob(p, "tilt", -1.0, 1.0)
    gap = _prob(p, "gap", -1.0, 1.0)
    rows = []
    for i in range(n):
        pos = i / (n - 1) - 0.5
        p1 = prior1 + tilt * pos
        base = (i + 0.5) / n
        eta1, eta0 = base + gap / 2, base - gap / 2
        if not 0.0 < p1 < 1.0:
            raise ScenarioError(f"tilt={tilt:g} pushes P(S=1|x{i}) to {p1:g}, outside (0, 1)")
        if not (0.0 <= eta1 <= 1.0 and 0.0 <= eta0 <= 1.0):
            raise ScenarioError(f"gap={gap:g} pushes a posterior of x{i} outside [0, 1]")
        rows.append((f"x{i}", 1.0 / n, p1, eta1, eta0))
    return rows, (f"{n} equal-mass cells, posterior base (i+0.5)/n, "
                  f"group gap {gap:g}, tilt {tilt:g}, P(S=1) centre {prior1:g}")


_FAMILIES: dict[str, tuple[Callable, dict[str, float]]] = {
    "two-point-aware": (_two_point_aware, {"eta1": 0.9, "eta0": 0.3, "prior1": 0.5}),
    "symmetric-null": (_symmetric_null, {"prior1": 0.5}),
    "blind-separated-high": (_separated_high, {}),
    "blind-separated-low": (_separated_low, {}),
    "custom-grid": (_custom_grid, {"n": 4, "prior1": 0.5, "tilt": 0.4, "gap": 0.2}),
}

SCENARIOS = tuple(_FAMILIES)


def scenario_defaults(name: str) -> dict[str, float]:
    if name not in _FAMILIES:
        raise ScenarioError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return dict(_FAMILIES[name][1])


def scenario(name: str, params: Mapping[str, float] | None = None) -> PopulationSpec:
    defaults = scenario_defaults(name)
    params = dict(params or {})
    unknown = sorted(set(params) - set(defaults))
    if unknown:
        raise ScenarioError(f"scenario {name!r} has no parameter(s) {', '.join(unknown)}")
    merged = {**defaults, **{k: float(v) for k, v in params.items()}}
    build, _ = _FAMILIES[name]
    rows, description = build(merged)
    try:
        return from_rows(rows, name=name, description=description)
    except PopulationValidationError as exc:
        raise ScenarioError(f"parameters give an invalid population: {exc}") from exc
