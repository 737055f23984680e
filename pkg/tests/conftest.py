import json
from importlib import resources
from pathlib import Path

import pytest

from ugrestore.feeder import load_case, load_case_dict


def case_path(name: str) -> Path:
    return Path(str(resources.files("ugrestore.cases").joinpath(f"{name}.json")))


def shipped_case(name: str):
    return load_case(case_path(name))


def shipped_doc(name: str) -> dict:
    with open(case_path(name)) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def toy_pair():
    return shipped_case("toy_pair")


@pytest.fixture(scope="session")
def toy_fork():
    return shipped_case("toy_fork")


@pytest.fixture(scope="session")
def toy_pv():
    return shipped_case("toy_pv")


@pytest.fixture(scope="session")
def toy_gear3():
    return shipped_case("toy_gear3")


@pytest.fixture(scope="session")
def reduced13():
    return shipped_case("reduced13")


def minimal_doc(**overrides) -> dict:
    """Smallest schema-valid case: two nodes, one line, one storage unit."""
    doc = {
        "name": "mini",
        "horizon": 1,
        "period_hours": 1.0,
        "config": {"v_min_sq": 0.81, "v_max_sq": 1.21, "inrush_rise_time_s": 1e-4},
        "nodes": [
            {"id": "s", "phases": "abc"},
            {"id": "n1", "phases": "abc", "load_kw": {"a": [10.0]}},
        ],
        "lines": [
            {
                "from": "s",
                "to": "n1",
                "length_miles": 0.1,
                "impedance_pu": {"aa": [0.01, 0.02], "bb": [0.01, 0.02], "cc": [0.01, 0.02]},
                "ampacity_pu": 2.0,
            }
        ],
        "switchgears": [],
        "ders": [
            {
                "node": "s",
                "kind": "ESS",
                "energy_max_kwh": 100.0,
                "charge_max_kw": 20.0,
                "discharge_max_kw": 20.0,
            }
        ],
    }
    doc.update(overrides)
    return doc


def load_minimal(**overrides):
    return load_case_dict(minimal_doc(**overrides))
