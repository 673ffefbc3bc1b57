"""Locations of the bundled case-study tables and synthetic demo corpus."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def data_path(*parts: str) -> Path:
    """Filesystem path of a bundled data file, e.g. ``data_path("demo", "runs.jsonl")``."""
    return Path(str(resources.files("migration_gate").joinpath("data", *parts)))


def case_study(name: str) -> Path:
    return data_path("case_study", name)


def demo(name: str) -> Path:
    return data_path("demo", name)
