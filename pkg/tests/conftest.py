import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=int(os.environ.get("HYPOTHESIS_MAX_EXAMPLES", "40")),
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

CRITERIA: dict[int, str] = {}


def record(number: int, passed: bool, detail: str = "") -> None:
    """Store a one-line verdict for the acceptance summary."""
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}"
    CRITERIA[number] = f"{line}  {detail}" if detail else line
    print(CRITERIA[number])


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[n])
