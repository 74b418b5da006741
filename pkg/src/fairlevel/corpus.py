"""The bundled population corpus (small, oracle-certifiable populations)."""

from __future__ import annotations

from importlib import resources

from fairlevel.population import PopulationSpec, load_population


def corpus_names() -> list[str]:
    root = resources.files("fairlevel") / "corpus"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".pop.json"))


def load_corpus() -> list[PopulationSpec]:
    root = resources.files("fairlevel") / "corpus"
    return [load_population((root / name).read_text()) for name in corpus_names()]
