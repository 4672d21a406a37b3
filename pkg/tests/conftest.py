"""Shared pytest plumbing: verdict lines for the acceptance criteria.

test_acceptance.py records one [PASS]/[FAIL] line per criterion; they are
echoed in the terminal summary so they stay visible without -s.
"""

CRITERION_LINES = []


def record_criterion(name, ok, detail=""):
    verdict = "PASS" if ok else "FAIL"
    line = f"[{verdict}] {name}" + (f": {detail}" if detail else "")
    CRITERION_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
