import pytest

from dppdesign import bench

# lines printed at the end of the run, one per acceptance criterion
ACCEPTANCE_LINES: dict[str, str] = {}
_property_outcomes: list[tuple[str, str]] = []
# stated invariants that are known not to hold (strict xfail outside the acceptance module)
_broken_invariants: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "property: randomized invariant check counted toward criterion 9")


def pytest_collection_modifyitems(items):
    for item in items:
        fn = getattr(item, "function", None)
        if fn is not None and hasattr(fn, "hypothesis"):
            item.add_marker(pytest.mark.property)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "property" in report.keywords:
        _property_outcomes.append((report.nodeid, report.outcome))
    if report.when == "call" and hasattr(report, "wasxfail") and "test_acceptance" not in report.nodeid:
        _broken_invariants.append(report.nodeid.split("::")[-1])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES and not _property_outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.split(".")[0]), k)):
        tr.write_line(ACCEPTANCE_LINES[key])
    if _property_outcomes:
        failed = [n for n, o in _property_outcomes if o == "failed"]
        mark = "PASS" if not failed and not _broken_invariants else "FAIL"
        line = (f"[{mark}] 9. property suites: {len(_property_outcomes) - len(failed)}/{len(_property_outcomes)} "
                "randomized property tests green")
        if _broken_invariants:
            line += f"; {len(_broken_invariants)} invariant tests xfail: {', '.join(sorted(_broken_invariants))}"
        tr.write_line(line)


@pytest.fixture(scope="session")
def record_acceptance():
    def record(key: str, line: str) -> None:
        ACCEPTANCE_LINES[key] = line
        print(line)

    return record


@pytest.fixture(scope="session")
def table_cs5():
    return bench.max_d_table(1000, 5, 0.5)


@pytest.fixture(scope="session")
def table_cs30():
    return bench.max_d_table(1000, 30, 0.5)


@pytest.fixture(scope="session")
def benchmark_result():
    return bench.run_benchmark()
