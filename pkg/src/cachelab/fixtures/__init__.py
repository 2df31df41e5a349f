"""Small checked-in instances used by the tests and the CLI."""

from __future__ import annotations

import json
from importlib import resources

from ..workload import Catalog, Trace, load_trace, loop_trace


def _path(name):
    return resources.files(__name__).joinpath(name)


def figure11_instance() -> dict:
    """Three objects with sizes 1, 2, 3 in a cache of 4 bytes."""
    return json.loads(_path("figure11.json").read_text())


def figure11_catalog() -> Catalog:
    inst = figure11_instance()
    return Catalog.from_arrays(inst["pmf"], inst["sizes"], inst.get("values"), inst.get("ids"))


def figure5_trace() -> Trace:
    """Request sequence over objects 2..5 (size = id) for a cache of 7 bytes."""
    with _path("figure5.csv").open("rb") as f:
        return load_trace(f)


def loop_fixture(n_objects: int = 4) -> Trace:
    """Checked-in loop trace over ``n_objects`` unit-size objects."""
    name = f"loop{n_objects}.csv"
    if not _path(name).is_file():
        return loop_trace(n_objects, 10 * n_objects)
    with _path(name).open("rb") as f:
        return load_trace(f)


FIXTURES = ("figure11", "figure5", "loop3", "loop4")
