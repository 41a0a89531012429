from pathlib import Path

_OWN_ACCEPTANCE = Path(__file__).parent / "test_acceptance.py"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for outcome, marker in (("passed", "PASS"), ("failed", "FAIL")):
        for rep in terminalreporter.stats.get(outcome, ()):
            if getattr(rep, "when", "call") != "call":
                continue
            rel = rep.nodeid.split("::")[0]
            if (config.rootpath / rel).resolve() == _OWN_ACCEPTANCE.resolve():
                lines.append((rep.nodeid.split("::")[-1], marker))
    if lines:
        terminalreporter.section("worker acceptance criteria")
        for name, marker in sorted(lines):
            terminalreporter.write_line(f"{marker} {name}")
