"""Published JSON schemas for every machine-readable output."""

import json
from importlib import resources

NAMES = (
    "representation",
    "partition_report",
    "equivalence_report",
    "isometry",
    "rate_field_report",
    "ensemble_comparison",
    "trajectory_record",
    "ensemble_manifest",
)


def load(name: str) -> dict:
    """Load a schema by short name, e.g. ``load("representation")``."""
    if name not in NAMES:
        raise KeyError(f"unknown schema {name!r}; available: {NAMES}")
    text = resources.files(__package__).joinpath(f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)
