import json
import sys
from fractions import Fraction
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from specbridge import frontend, typecheck  # noqa: E402
from specbridge.network import network_from_dict  # noqa: E402
from specbridge.resources import ResourceEnv  # noqa: E402

FIXTURES = REPO / "fixtures"


@pytest.fixture(scope="session")
def controller_source() -> str:
    return (FIXTURES / "controller.vcl").read_text()


@pytest.fixture(scope="session")
def controller_path() -> Path:
    return FIXTURES / "controller.vcl"


@pytest.fixture(scope="session")
def program(controller_source):
    return frontend.load(controller_source)


@pytest.fixture(scope="session")
def tp(program):
    return typecheck.check_program(program)


@pytest.fixture(scope="session")
def good_network():
    return network_from_dict(
        {"layers": [{"W": [["-16", "8"]], "b": ["4"], "act": "id"}]})


@pytest.fixture(scope="session")
def zero_network():
    return network_from_dict(
        {"layers": [{"W": [["0", "0"]], "b": ["0"], "act": "id"}]})


@pytest.fixture()
def good_resources(good_network):
    return ResourceEnv(networks={"controller": good_network})


@pytest.fixture()
def zero_resources(zero_network):
    return ResourceEnv(networks={"controller": zero_network})


@pytest.fixture()
def good_network_file(tmp_path, good_network):
    # indented so integrity fuzzing has >= 100 byte positions to flip
    path = tmp_path / "good.json"
    path.write_text(json.dumps(
        {"layers": [{"W": [["-16", "8"]], "b": ["4"], "act": "id"}]},
        indent=2))
    return path


@pytest.fixture()
def zero_network_file(tmp_path):
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(
        {"layers": [{"W": [["0", "0"]], "b": ["0"], "act": "id"}]},
        indent=2))
    return path


def random_relu_network(rng, dims, scale=1.0):
    """Random dense ReLU network with exact decimal weights."""
    layers = []
    for i, (a, b) in enumerate(zip(dims, dims[1:])):
        act = "id" if i == len(dims) - 2 else "relu"
        w = [[f"{rng.gauss(0, scale):.4f}" for _ in range(a)]
             for _ in range(b)]
        bias = [f"{rng.gauss(0, 0.3):.4f}" for _ in range(b)]
        layers.append({"W": w, "b": bias, "act": act})
    return network_from_dict({"layers": layers})


def random_fraction(rng, lo=-4, hi=4, den=1000) -> Fraction:
    return Fraction(rng.randint(lo * den, hi * den), den)
