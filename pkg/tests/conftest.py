import pytest

from swallowtail import singulants as sg
from swallowtail import tracing as tr


@pytest.fixture(scope="session")
def graph31():
    """Full Stokes graph at the reference parameters (built once)."""
    return tr.build_graph(sg.REFERENCE_PARAMS)
