import pytest

from heapmeasure.clique_chain import build_chain
from heapmeasure.mobius_measure import uniform_spec, validate
from heapmeasure.protocol_example import ProtocolParams, protocol_spec
from heapmeasure.trace_core import IndependencePair


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


T_MODEL = """\
# a and b commute, c commutes with nothing
pieces a b c
independent a b
uniform
"""

T_PROTOCOL_MODEL = """\
pieces a b c
independent a b
weight a 0.5
weight b 0.5
weight c 0.25
"""


@pytest.fixture(scope="session")
def T():
    """<a, b, c | ab = ba>"""
    return IndependencePair.from_pairs(["a", "b", "c"], [("a", "b")])


@pytest.fixture(scope="session")
def free2():
    """Two pieces, nothing commutes."""
    return IndependencePair.from_pairs(["a", "b"])


@pytest.fixture(scope="session")
def path4():
    """Independence along the path a-b-c-d; the dependence graph is the path b-d-a-c."""
    return IndependencePair.from_pairs("abcd", [("a", "b"), ("b", "c"), ("c", "d")])


@pytest.fixture(scope="session")
def path3():
    """Independence ab, bc: b commutes with everything, so the dependence graph is disconnected."""
    return IndependencePair.from_pairs("abc", [("a", "b"), ("b", "c")], require_connected=False)


@pytest.fixture(scope="session")
def uniform_T(T):
    return uniform_spec(T)


@pytest.fixture(scope="session")
def uniform_T_chain(uniform_T):
    return build_chain(uniform_T)


@pytest.fixture(scope="session")
def half_params():
    return ProtocolParams(0.5, 0.5)


@pytest.fixture(scope="session")
def protocol_T(T, half_params):
    return protocol_spec(half_params, T)


@pytest.fixture(scope="session")
def protocol_T_chain(protocol_T):
    return build_chain(protocol_T)


@pytest.fixture(scope="session")
def free2_chain(free2):
    return build_chain(validate(free2, {"a": 0.3, "b": 0.7}))


@pytest.fixture
def t_model(tmp_path):
    path = tmp_path / "t.model"
    path.write_text(T_MODEL, encoding="utf-8")
    return path


@pytest.fixture
def t_protocol_model(tmp_path):
    path = tmp_path / "t_protocol.model"
    path.write_text(T_PROTOCOL_MODEL, encoding="utf-8")
    return path
