from pathlib import Path

import pytest

CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[CRITERIA] = []


@pytest.fixture
def criteria(request):
    return request.config.stash[CRITERIA]


def pytest_terminal_summary(terminalreporter, config):
    lines = sorted(config.stash[CRITERIA], key=lambda line: int(line.split()[1].rstrip("]")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
    out = Path(config.rootpath) / ".acceptance_cache"
    out.mkdir(exist_ok=True)
    (out / "criteria.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
