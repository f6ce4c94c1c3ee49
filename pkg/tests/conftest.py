import hypothesis
import numpy as np
import pytest

from mottlab import LatticeSpec, ModelParams

np.seterr(all="warn", under="ignore")

hypothesis.settings.register_profile("ci", max_examples=40, deadline=None)
hypothesis.settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def chain(L, boundary="periodic", **kw):
    defaults = dict(t=0.1, U=1.0, mu=0.2, beta=5.0, n_max=2)
    defaults.update(kw)
    return ModelParams(LatticeSpec(1, L, boundary), **defaults)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
