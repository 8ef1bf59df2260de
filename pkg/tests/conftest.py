import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    from pdtw.synth import SynthSpec, generate, write_corpus

    spec = SynthSpec(n_words=4, instances=4, background_seconds=40, n_files=4, seed=5)
    return write_corpus(generate(spec), tmp_path_factory.mktemp("small_synth"))
