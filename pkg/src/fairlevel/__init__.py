"""Exact Bayes-optimal classifiers with and without group-fairness constraints.

Works on finite populations over (feature cell, group, label) and audits
whether enforcing demographic parity, equal opportunity or predictive
equality levels group outcomes up, down, or in opposite directions.
"""

from fairlevel.analysis import (
    AuditReport,
    PatternVerdict,
    RegionPartition,
    audit,
    classify_pattern,
    full_grid,
    masked_mass,
    order_aligned,
    partition,
    precision_cases,
)
from fairlevel.classifier import (
    GroupReport,
    Notion,
    RandomizedClassifier,
    Regime,
    disparity,
    group_roles,
    ntr,
    rates,
    risk_cs,
)
from fairlevel.corpus import load_corpus
from fairlevel.fairbayes import (
    FairSolveResult,
    SolverError,
    bayes_unconstrained,
    correction,
    delta_sweep,
    fair_threshold,
    solve,
    zeta_extrema,
)
from fairlevel.kernels import BACKEND
from fairlevel.oracle import brute_force, certify
from fairlevel.population import (
    PopulationSpec,
    derive_posteriors,
    from_atoms,
    load_population,
)
from fairlevel.scenarios import scenario

__version__ = "0.1.0"

__all__ = [
    "AuditReport", "BACKEND", "FairSolveResult", "GroupReport", "Notion", "PatternVerdict",
    "PopulationSpec", "RandomizedClassifier", "Regime", "RegionPartition", "SolverError",
    "audit", "bayes_unconstrained", "brute_force", "certify", "classify_pattern", "correction",
    "delta_sweep", "derive_posteriors", "disparity", "fair_threshold", "from_atoms",
    "full_grid", "group_roles", "load_corpus", "load_population", "masked_mass", "ntr",
    "order_aligned", "partition", "precision_cases", "rates", "risk_cs", "scenario", "solve",
    "zeta_extrema",
]
