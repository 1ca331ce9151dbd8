import random
from decimal import Decimal

import pytest

from eipflow import body as bt
from eipflow.channels import Broker
from eipflow.message import IdGenerator, Message

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, text = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _CRITERIA[n] = ("PASS" if rep.outcome == "passed" else "FAIL", text)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, text = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {text}")


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def ids():
    return IdGenerator(0, prefix="t")


@pytest.fixture
def broker(ids):
    return Broker(ids=ids)


@pytest.fixture
def order(ids):
    """A small order message with three items."""
    body = bt.from_plain("order", {
        "id": 7, "customer": "acme", "total": Decimal("150.00"),
        "item": [{"sku": "A1", "qty": 1}, {"sku": "B2", "qty": 2}, {"sku": "C3", "qty": 3}],
    })
    return Message(ids(), body, "Order", (("type", "Order"),))
