import pytest

from abmlab.rng import RngStream, stream_id_for

SEED = 0x5EED


@pytest.fixture
def make_stream():
    """Factory for reproducible streams keyed by a test-local label."""

    def _make(label: str, replica: int = 0) -> RngStream:
        return RngStream(SEED, stream_id_for(label, replica))

    return _make


# acceptance outcomes: criterion number -> list of (part, passed, detail)
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def criterion():
    """Recorder for acceptance parts; one PASS/FAIL line per criterion is printed at the end."""

    def _record(number: int, part: str, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE.setdefault(number, []).append((part, bool(passed), detail))
        return bool(passed)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{name}{'' if p else ' [FAIL]'}: {d}" for name, p, d in parts)
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {detail}")
