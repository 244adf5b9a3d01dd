import os
import sys

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from fraisse_forge.structures import BINARY, RelStructure  # noqa: E402

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=60,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


@st.composite
def binary_structures(draw, max_size=4, min_size=0, loops=True):
    n = draw(st.integers(min_size, max_size))
    pairs = [(x, y) for x in range(n) for y in range(n) if loops or x != y]
    chosen = draw(st.sets(st.sampled_from(pairs))) if pairs else set()
    return RelStructure.build(BINARY, n, {"E": chosen})


@st.composite
def simple_graphs(draw, max_size=4, min_size=0):
    n = draw(st.integers(min_size, max_size))
    pairs = [(x, y) for x in range(n) for y in range(x + 1, n)]
    chosen = draw(st.sets(st.sampled_from(pairs))) if pairs else set()
    return RelStructure.build(BINARY, n, {"E": [e for x, y in chosen for e in ((x, y), (y, x))]})


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
