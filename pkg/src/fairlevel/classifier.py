"""Randomized classifiers over decision units and the group statistics they induce."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Mapping, NamedTuple

import numpy as np

from fairlevel.population import PopulationSpec

log = logging.getLogger(__name__)

TIE_TOL = 1e-12


class Regime(str, enum.Enum):
    AWARE = "aware"
    BLIND = "blind"


class Notion(str, enum.Enum):
    DP = "dp"
    EO = "eo"
    PE = "pe"

    @property
    def labels(self) -> tuple[int, ...]:
        """Label-conditioning set of the notion's target rate."""
        return {Notion.DP: (0, 1), Notion.EO: (1,), Notion.PE: (0,)}[self]


class CoverageError(ValueError):
    """A classifier is missing a positive-mass decision unit."""


@dataclass(frozen=True, eq=False)
class UnitTable:
    """Positive-mass decision units of a population under one regime.

    ``mass[u, s, y]`` is the probability of unit ``u`` jointly with group
    ``s`` and label ``y``. In the aware regime unit ``(x, s)`` only carries
    group ``s`` mass.
    """

    regime: Regime
    keys: tuple
    mass: np.ndarray
    undefined: tuple

    @property
    def weight(self) -> np.ndarray:
        return self.mass.sum(axis=(1, 2))

    @property
    def eta(self) -> np.ndarray:
        return self.mass[:, :, 1].sum(axis=1) / self.weight

    def index(self) -> dict:
        return {k: i for i, k in enumerate(self.keys)}


@lru_cache(maxsize=256)
def decision_units(pop: PopulationSpec, regime: Regime) -> UnitTable:
    regime = Regime(regime)
    m = pop.masses
    if regime is Regime.BLIND:
        keep = [i for i in range(len(pop.cell_ids)) if m[i].sum() > 0]
        keys = tuple(pop.cell_ids[i] for i in keep)
        undefined = tuple(pop.cell_ids[i] for i in range(len(pop.cell_ids)) if i not in keep)
        mass = m[keep].copy() if keep else np.zeros((0, 2, 2))
    else:
        keys, rows, undefined = [], [], []
        for i, x in enumerate(pop.cell_ids):
            for s in (0, 1):
                if m[i, s].sum() > 0:
                    row = np.zeros((2, 2))
                    row[s] = m[i, s]
                    keys.append((x, s))
                    rows.append(row)
                else:
                    undefined.append((x, s))
        keys = tuple(keys)
        undefined = tuple(undefined)
        mass = np.array(rows)
    if undefined:
        log.debug("%s regime: %d zero-mass units excluded", regime.value, len(undefined))
    mass.setflags(write=False)
    return UnitTable(regime, keys, mass, undefined)


@dataclass(frozen=True)
class RandomizedClassifier:
    """Acceptance probability per decision unit.

    Units are cell ids in the blind regime and ``(cell, group)`` pairs in the
    aware regime.
    """

    regime: Regime
    accept: Mapping[Hashable, float]

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        for unit, p in self.accept.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"acceptance probability {p!r} for {unit!r} outside [0, 1]")

    def vector(self, table: UnitTable) -> np.ndarray:
        if table.regime is not self.regime:
            raise CoverageError(
                f"classifier is {self.regime.value} but units are {table.regime.value}"
            )
        missing = [k for k in table.keys if k not in self.accept]
        if missing:
            raise CoverageError(f"classifier does not cover units {missing[:5]}")
        return np.array([self.accept[k] for k in table.keys], dtype=np.float64)

    @classmethod
    def constant(cls, pop: PopulationSpec, regime: Regime, p: float) -> "RandomizedClassifier":
        table = decision_units(pop, regime)
        return cls(Regime(regime), {k: float(p) for k in table.keys})

    @classmethod
    def from_vector(cls, table: UnitTable, values) -> "RandomizedClassifier":
        return cls(table.regime, {k: float(v) for k, v in zip(table.keys, values)})


class Roles(NamedTuple):
    advantaged: int
    disadvantaged: int
    tie: bool


@dataclass(frozen=True)
class GroupStats:
    gsr: float
    tpr: float
    fpr: float
    precision: float | None

    def ntr(self, notion: Notion) -> float:
        return {Notion.DP: self.gsr, Notion.EO: self.tpr, Notion.PE: self.fpr}[Notion(notion)]


@dataclass(frozen=True)
class GroupReport:
    groups: tuple[GroupStats, GroupStats]
    disparity: Mapping[Notion, float]
    roles: Mapping[Notion, Roles]
    risk: float | None = None

    def ntr(self, s: int, notion: Notion) -> float:
        return self.groups[s].ntr(notion)


def _roles_from_dm(dm: float) -> Roles:
    if abs(dm) < TIE_TOL:
        return Roles(1, 0, True)
    return Roles(1, 0, False) if dm > 0 else Roles(0, 1, False)


def risk_cs(f: RandomizedClassifier, pop: PopulationSpec, c: float) -> float:
    """Cost-sensitive risk ``(1-c) P(Yhat=0, Y=1) + c P(Yhat=1, Y=0)``."""
    table = decision_units(pop, f.regime)
    v = f.vector(table)
    pos = table.mass[:, :, 1].sum(axis=1)
    neg = table.mass[:, :, 0].sum(axis=1)
    return float((1.0 - c) * np.dot(1.0 - v, pos) + c * np.dot(v, neg))


def _selected(f: RandomizedClassifier, pop: PopulationSpec) -> np.ndarray:
    """``sel[s, y] = P(Yhat = 1, S = s, Y = y)``."""
    table = decision_units(pop, f.regime)
    v = f.vector(table)
    return np.einsum("u,usy->sy", v, table.mass)


def ntr(f: RandomizedClassifier, pop: PopulationSpec, notion: Notion, s: int) -> float:
    labels = Notion(notion).labels
    sel = _selected(f, pop)
    return float(sum(sel[s, y] for y in labels) / sum(pop.joint(s, y) for y in labels))


def disparity(f: RandomizedClassifier, pop: PopulationSpec, notion: Notion) -> float:
    return ntr(f, pop, notion, 1) - ntr(f, pop, notion, 0)


def rates(f: RandomizedClassifier, pop: PopulationSpec, c: float | None = None) -> GroupReport:
    sel = _selected(f, pop)
    groups = []
    for s in (0, 1):
        accepted = sel[s, 0] + sel[s, 1]
        groups.append(
            GroupStats(
                gsr=float(accepted / pop.prior(s)),
                tpr=float(sel[s, 1] / pop.joint(s, 1)),
                fpr=float(sel[s, 0] / pop.joint(s, 0)),
                precision=float(sel[s, 1] / accepted) if accepted > 0 else None,
            )
        )
    dms = {n: groups[1].ntr(n) - groups[0].ntr(n) for n in Notion}
    return GroupReport(
        groups=(groups[0], groups[1]),
        disparity=dms,
        roles={n: _roles_from_dm(dm) for n, dm in dms.items()},
        risk=None if c is None else risk_cs(f, pop, c),
    )


def group_roles(f: RandomizedClassifier, pop: PopulationSpec, notion: Notion) -> Roles:
    """Advantaged group is the one with the higher target rate; ties default to (1, 0)."""
    return _roles_from_dm(disparity(f, pop, notion))
