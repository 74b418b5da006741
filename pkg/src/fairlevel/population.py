"""Finite joint distributions over (feature cell, group, label).

A population is a list of atoms ``(x, s, y, p)``. Everything downstream is an
exact ratio of summed atom masses; nothing here samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

MASS_TOL = 1e-9


class PopulationError(ValueError):
    """Base class for population problems."""


class PopulationParseError(PopulationError):
    """The document is not a well-formed population-spec document."""


class PopulationValidationError(PopulationError):
    """A population invariant is violated; ``invariant`` names which one."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


@dataclass(frozen=True)
class Entry:
    x: str
    s: int
    y: int
    p: float


@dataclass(frozen=True)
class PopulationSpec:
    """A validated, normalised joint distribution over (X, S, Y).

    Masses are rescaled to sum to exactly one once they pass the 1e-9
    tolerance check. Cells keep their document order.
    """

    entries: tuple[Entry, ...]
    name: str = ""
    description: str = ""

    def __post_init__(self):
        entries = tuple(self.entries)
        seen = set()
        for e in entries:
            if not isinstance(e.x, str) or not e.x:
                raise PopulationValidationError("cell id", f"invalid cell id {e.x!r}")
            if e.s not in (0, 1) or e.y not in (0, 1):
                raise PopulationValidationError(
                    "binary group/label", f"cell {e.x!r} has s={e.s!r}, y={e.y!r}"
                )
            if not math.isfinite(e.p) or e.p < 0:
                raise PopulationValidationError(
                    "negative mass", f"cell {e.x!r} (s={e.s}, y={e.y}) has mass {e.p!r}"
                )
            key = (e.x, e.s, e.y)
            if key in seen:
                raise PopulationValidationError(
                    "duplicate triple", f"more than one entry for (x={e.x!r}, s={e.s}, y={e.y})"
                )
            seen.add(key)
        total = math.fsum(e.p for e in entries)
        if abs(total - 1.0) > MASS_TOL:
            raise PopulationValidationError("mass sum", f"masses sum to {total!r}, expected 1")
        entries = tuple(Entry(e.x, int(e.s), int(e.y), float(e.p) / total) for e in entries)
        for s in (0, 1):
            for y in (0, 1):
                if math.fsum(e.p for e in entries if e.s == s and e.y == y) <= 0:
                    raise PopulationValidationError(
                        "degenerate group-label pair", f"P(S={s}, Y={y}) = 0"
                    )
        object.__setattr__(self, "entries", entries)

    @cached_property
    def cell_ids(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(e.x for e in self.entries))

    @cached_property
    def masses(self) -> np.ndarray:
        """Read-only array ``m[i, s, y] = P(X = cell_ids[i], S = s, Y = y)``."""
        index = {x: i for i, x in enumerate(self.cell_ids)}
        m = np.zeros((len(index), 2, 2))
        for e in self.entries:
            m[index[e.x], e.s, e.y] = e.p
        m.setflags(write=False)
        return m

    def prior(self, s: int) -> float:
        return float(self.masses[:, s, :].sum())

    def joint(self, s: int, y: int) -> float:
        return float(self.masses[:, s, y].sum())

    def swap_groups(self) -> "PopulationSpec":
        """The same population with group labels 0 and 1 exchanged."""
        return PopulationSpec(
            tuple(Entry(e.x, 1 - e.s, e.y, e.p) for e in self.entries),
            name=self.name,
            description=self.description,
        )

    def to_document(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "cells": [{"x": e.x, "s": e.s, "y": e.y, "p": e.p} for e in self.entries],
        }


@dataclass(frozen=True)
class PosteriorTables:
    """Posterior and marginal lookups; ``None`` marks an undefined conditional."""

    eta_blind: Mapping[str, float]
    eta_aware: Mapping[tuple[str, int], float | None]
    group_given_x: Mapping[tuple[str, int], float]
    joint_given_x: Mapping[tuple[str, int, int], float]
    prior_s: Mapping[int, float]
    prior_sy: Mapping[tuple[int, int], float]


def from_atoms(atoms: Iterable[tuple[str, int, int, float]], name: str = "",
               description: str = "") -> PopulationSpec:
    return PopulationSpec(
        tuple(Entry(str(x), int(s), int(y), float(p)) for x, s, y, p in atoms),
        name=name,
        description=description,
    )


def parse_document(doc: Any) -> PopulationSpec:
    """Build a spec from an already-decoded population-spec document."""
    if not isinstance(doc, dict):
        raise PopulationParseError("population document must be a JSON object")
    cells = doc.get("cells")
    if not isinstance(cells, list):
        raise PopulationParseError("field 'cells' must be an array")
    atoms = []
    for i, cell in enumerate(cells):
        if not isinstance(cell, dict) or not {"x", "s", "y", "p"} <= cell.keys():
            raise PopulationParseError(f"cells[{i}] must be an object with x, s, y, p")
        x, s, y, p = cell["x"], cell["s"], cell["y"], cell["p"]
        if not isinstance(x, str):
            raise PopulationParseError(f"cells[{i}].x must be a string")
        if s not in (0, 1) or y not in (0, 1) or isinstance(s, bool) or isinstance(y, bool):
            raise PopulationParseError(f"cells[{i}]: s and y must be 0 or 1")
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            raise PopulationParseError(f"cells[{i}].p must be a number")
        atoms.append((x, s, y, float(p)))
    name = doc.get("name", "")
    description = doc.get("description", "")
    if not isinstance(name, str) or not isinstance(description, str):
        raise PopulationParseError("'name' and 'description' must be strings")
    return from_atoms(atoms, name=name, description=description)


def load_population(document: str | bytes | Path) -> PopulationSpec:
    """Parse and validate a population-spec document.

    ``document`` is either the JSON text itself or a path to a ``.pop.json``
    file.
    """
    if isinstance(document, Path):
        document = document.read_text()
    try:
        doc = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise PopulationParseError(f"malformed JSON: {exc}") from exc
    return parse_document(doc)


def derive_posteriors(spec: PopulationSpec) -> PosteriorTables:
    m = spec.masses
    eta_blind, eta_aware, group_given_x, joint_given_x = {}, {}, {}, {}
    for i, x in enumerate(spec.cell_ids):
        px = m[i].sum()
        for s in (0, 1):
            pxs = m[i, s].sum()
            eta_aware[(x, s)] = float(m[i, s, 1] / pxs) if pxs > 0 else None
            if px > 0:
                group_given_x[(x, s)] = float(pxs / px)
                for y in (0, 1):
                    joint_given_x[(x, s, y)] = float(m[i, s, y] / px)
        if px > 0:
            eta_blind[x] = float(m[i, :, 1].sum() / px)
    return PosteriorTables(
        eta_blind=eta_blind,
        eta_aware=eta_aware,
        group_given_x=group_given_x,
        joint_given_x=joint_given_x,
        prior_s={s: spec.prior(s) for s in (0, 1)},
        prior_sy={(s, y): spec.joint(s, y) for s in (0, 1) for y in (0, 1)},
    )
