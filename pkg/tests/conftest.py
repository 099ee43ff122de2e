import pytest

from pwcard.net import AuthService
from pwcard.store import PROTOCOL_NAMES, ServerStore, save_card

PASSWORD = "marigold-42"


@pytest.fixture
def enrolled(tmp_path):
    """A server store with one card per protocol, all saved under tmp_path."""
    store = ServerStore(b"loopback-server")
    cards = {}
    for name in PROTOCOL_NAMES:
        cred = store.personalize(name, f"user-{name}".encode(), PASSWORD, counter_limit=3)
        cards[name] = tmp_path / f"{name}.img"
        save_card(cards[name], cred)
    store.save(tmp_path / "server.db")
    return store, cards


@pytest.fixture
def service(enrolled):
    with AuthService(ServerStore.load(enrolled[1]["ssca"].parent / "server.db")) as svc:
        yield svc


_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by this test")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when not in ("setup", "call"):
        return
    number, title = mark.args
    failed = call.excinfo is not None
    if failed or call.when == "call":
        previous = _criteria.get(number, (None, "PASS"))[1]
        _criteria[number] = (title, "FAIL" if failed or previous == "FAIL" else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, verdict = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {title}")
