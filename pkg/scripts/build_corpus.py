"""Regenerate the bundled corpus under src/fairlevel/corpus/.

Every population has at most six decision units in both regimes so the
oracle can certify it quickly. Output is deterministic.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from fairlevel.scenarios import from_rows, scenario

OUT = Path(__file__).resolve().parents[1] / "src" / "fairlevel" / "corpus"
SEED = 20261015

# (name, description, rows) with rows = (cell, P(x), P(S=1|x), eta(x,1), eta(x,0))
HAND_BUILT = [
    ("leveling-down", "a_max <= b_min under every notion; both groups lose at delta=0",
     [("x0", 0.3, 0.8, 0.7, 0.6), ("x1", 0.3, 0.3, 0.2, 0.1), ("x2", 0.4, 0.2, 0.8, 0.2)]),
    ("leveling-down-alt", "second a_max <= b_min population",
     [("x0", 0.2, 0.4, 0.2, 0.5), ("x1", 0.3, 0.6, 0.4, 0.7), ("x2", 0.5, 0.3, 0.6, 0.4)]),
    ("precision-addition-reversed", "DP, delta=0: additions lower group-0 precision",
     [("x0", 0.2, 0.4, 0.9, 0.6), ("x1", 0.4, 0.4, 0.3, 0.6), ("x2", 0.4, 0.7, 0.6, 0.8)]),
    ("precision-addition-aligned", "DP, delta=0: additions raise group-1 precision",
     [("x0", 0.4, 0.8, 0.5, 0.9), ("x1", 0.1, 0.2, 0.9, 0.1), ("x2", 0.5, 0.7, 0.6, 0.6)]),
    ("precision-deletion", "PE, delta=0.083: deletions raise group-0 and lower group-1 precision",
     [("x0", 0.24, 0.4, 0.15, 0.1), ("x1", 0.07, 0.5, 0.85, 0.2), ("x2", 0.69, 0.3, 0.65, 0.55)]),
    ("neutral-cell", "x1 matches the group prior, so its DP correction is zero in the blind regime",
     [("x0", 0.3, 0.7, 0.8, 0.6), ("x1", 0.4, 0.5, 0.55, 0.45), ("x2", 0.3, 0.3, 0.4, 0.2)]),
    ("boundary-tie", "two cells share the same normalised margin at the solved multiplier",
     [("x0", 0.3, 0.8, 0.5, 0.8), ("x1", 0.5, 0.7, 0.5, 0.3), ("x2", 0.2, 0.8, 0.1, 0.1)]),
    ("segregated", "every cell holds a single group, so both regimes coincide",
     [("a1", 0.2, 1.0, 0.9, 0.0), ("b1", 0.15, 1.0, 0.55, 0.0), ("c1", 0.15, 1.0, 0.2, 0.0),
      ("a0", 0.2, 0.0, 0.0, 0.7), ("b0", 0.15, 0.0, 0.0, 0.4), ("c0", 0.15, 0.0, 0.0, 0.1)]),
]

# (label, scenario, params)
SCENARIO_RUNS = [
    ("two-point-aware", "two-point-aware", {}),
    ("two-point-aware-close", "two-point-aware", {"eta1": 0.7, "eta0": 0.6, "prior1": 0.3}),
    ("symmetric-null", "symmetric-null", {}),
    ("symmetric-null-skewed", "symmetric-null", {"prior1": 0.3}),
    ("blind-separated-low", "blind-separated-low", {}),
    ("custom-grid-a", "custom-grid", {"n": 3, "tilt": 0.4, "gap": 0.2}),
    ("custom-grid-b", "custom-grid", {"n": 3, "prior1": 0.4, "tilt": -0.6, "gap": -0.3}),
    ("custom-grid-c", "custom-grid", {"n": 2, "prior1": 0.6, "tilt": 0.5, "gap": 0.4}),
]

N_RANDOM = 8


def _random_rows(rng):
    k = int(rng.integers(2, 4))
    px = rng.dirichlet(np.ones(k))
    rows = []
    for i in range(k):
        rows.append((f"x{i}", round(float(px[i]), 4), round(float(rng.uniform(0.15, 0.85)), 4),
                     round(float(rng.uniform(0.05, 0.95)), 4),
                     round(float(rng.uniform(0.05, 0.95)), 4)))
    total = sum(r[1] for r in rows)
    rows[-1] = (rows[-1][0], round(rows[-1][1] + 1.0 - total, 4), *rows[-1][2:])
    return rows


def populations():
    out = []
    for label, name, params in SCENARIO_RUNS:
        out.append((label, scenario(name, params)))
    for name, description, rows in HAND_BUILT:
        out.append((name, from_rows(rows, name=name, description=description)))
    rng = np.random.default_rng(SEED)
    for i in range(N_RANDOM):
        name = f"random-{i:02d}"
        out.append((name, from_rows(_random_rows(rng), name=name,
                                    description=f"seeded random population (seed {SEED}, draw {i})")))
    return out


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for old in OUT.glob("*.pop.json"):
        old.unlink()
    for idx, (name, pop) in enumerate(populations()):
        doc = pop.to_document()
        doc["name"] = name
        path = OUT / f"{idx:02d}-{name}.pop.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {idx + 1} populations to {OUT}")


if __name__ == "__main__":
    main()
