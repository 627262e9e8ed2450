from tests.util import ACCEPTANCE

CRITERIA = 14


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in range(1, CRITERIA + 1):
        if n in ACCEPTANCE:
            title, ok, detail = ACCEPTANCE[n]
            tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")
        else:
            tr.write_line(f"[----] {n:2d}. not run")
