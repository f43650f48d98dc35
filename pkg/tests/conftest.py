import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> verdict line, filled in by test_acceptance.py
VERDICTS = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[k])
