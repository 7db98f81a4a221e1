import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "opseq",
    deadline=None,
    max_examples=40,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("opseq")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid, text): acceptance criterion id and summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None and rep.when == "call":
        rep.user_properties.append(("criterion", mark.args))


def pytest_terminal_summary(terminalreporter):
    rows = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            for name, val in getattr(rep, "user_properties", []):
                if name == "criterion":
                    rows.append((val[0], "PASS" if key == "passed" else "FAIL", val[1]))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for cid, status, text in sorted(rows, key=lambda r: (int("".join(c for c in r[0] if c.isdigit())), r[0])):
        terminalreporter.write_line(f"[{status}] {cid:>4}  {text}")


@pytest.fixture
def rng():
    return np.random.default_rng(0x5EED)
