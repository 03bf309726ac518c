"""Frozen region fixtures for the reference parameters.

The fixture file records, for every labelled region of the two tables,
a probe route (waypoint chain from the base point) together with the
expected transported values: the six independent Stokes constants for
the S-table labels and the four sigma linear forms for the sigma-table
labels.  The label map was generated once from the traced arrangement;
probe routes are pinned because outer-face values depend on the path
homotopy class around turning points.
"""

from importlib import resources
import json

__all__ = ["load_regions", "s_probes", "sigma_probes", "FIXTURE_VERSION"]

FIXTURE_VERSION = 1


def load_regions():
    """Parsed fixture document for the reference parameters."""
    src = resources.files("swallowtail.data").joinpath("regions_31.json")
    doc = json.loads(src.read_text())
    if doc["format_version"] != FIXTURE_VERSION:
        raise ValueError(
            f"fixture format {doc['format_version']} != {FIXTURE_VERSION}"
        )
    return doc


def _routes(section):
    doc = load_regions()
    probes = {}
    expect = {}
    for label, rec in doc[section].items():
        probes[label] = [complex(re, im) for re, im in rec["route"]]
        expect[label] = rec["expect"]
    return probes, expect


def s_probes():
    """(probe routes, expected independent S entries) for the S-table."""
    probes, expect = _routes("s_probes")
    return probes, {lab: tuple(v) for lab, v in expect.items()}


def sigma_probes():
    """(probe routes, expected sigma coefficient rows) for the sigma-table."""
    probes, expect = _routes("sigma_probes")
    return probes, {
        lab: [tuple(row) for row in v] for lab, v in expect.items()
    }
