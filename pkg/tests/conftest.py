import pathlib

import pytest

from domcalc import compiler, dsl

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "src" / "domcalc" / "corpus"
GOLDEN = pathlib.Path(__file__).resolve().parent / "golden"


@pytest.fixture(scope="session")
def aircraft_path() -> pathlib.Path:
    return CORPUS / "aircraft.dom"


@pytest.fixture(scope="session")
def aircraft_script_path() -> pathlib.Path:
    return CORPUS / "aircraft_script.json"


@pytest.fixture(scope="session")
def aircraft_model(aircraft_path):
    model, diagnostics = dsl.parse_file(str(aircraft_path))
    assert not diagnostics
    return model


@pytest.fixture(scope="session")
def aircraft_graph(aircraft_model):
    return compiler.compile_model(aircraft_model)
