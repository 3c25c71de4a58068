import json
import time

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def record():
    def _record(criterion: int, ok: bool, detail: str):
        line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _record


@pytest.fixture(scope="session")
def preset_run(tmp_path_factory):
    """Run a shipped preset once per session; returns (summary, out_dir, seconds)."""
    from nds_lab.cli import preset_dir, run

    cache = {}

    def _run(name):
        if name not in cache:
            path = preset_dir() / f"{name}.json"
            command = json.loads(path.read_text())["command"]
            out = tmp_path_factory.mktemp(name)
            t0 = time.perf_counter()
            code = run(command, str(path), str(out))
            elapsed = time.perf_counter() - t0
            assert code == 0, f"{name} exited with {code}"
            cache[name] = (json.loads((out / "summary.json").read_text()), out, elapsed)
        return cache[name]
    return _run


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
