import re

# test_acceptance.py names its tests test_criterion_<k>_<name>; collect one
# outcome per criterion and print it at the end of the run
CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")

_results = {}


def pytest_runtest_logreport(report):
    m = CRITERION.search(report.nodeid)
    if not m:
        return
    key = int(m.group(1))
    outcome, name, props = _results.get(key, ("passed", m.group(2), {}))
    if report.failed:
        outcome = "failed"
    elif report.skipped and outcome == "passed":
        outcome = "skipped"
    props = {**props, **dict(report.user_properties)}
    _results[key] = (outcome, name, props)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_results):
        outcome, name, props = _results[key]
        word = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        extra = ", ".join(f"{k}={_fmt(v)}" for k, v in props.items())
        terminalreporter.write_line(f"criterion {key} [{name}]: {word}"
                                    + (f" ({extra})" if extra else ""))


def _fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)
