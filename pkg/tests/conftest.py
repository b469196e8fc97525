import os
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from srchvac.dataset import HAR_CLASS_NAMES, Dataset, write_uci_har

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=2000, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))



def pytest_collection_modifyitems(items):
    # every property-based test checks an invariant
    for item in items:
        if getattr(getattr(item, "obj", None), "is_hypothesis_test", False):
            item.add_marker(pytest.mark.invariant)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(mod.LINES):
            terminalreporter.write_line(mod.LINES[n])


ORACLES = Path(__file__).parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def frozen():
    return json.loads(ORACLES.read_text())


def subspace_dataset(n, per_class, classes=3, rank=3, noise=0.02, seed=0):
    """Each class spans its own random ``rank``-dimensional subspace."""
    rng = np.random.default_rng(seed)
    bases = [rng.standard_normal((n, rank)) for _ in range(classes)]
    X, y = [], []
    for c, B in enumerate(bases):
        X.append(rng.standard_normal((per_class, rank)) @ B.T
                 + noise * rng.standard_normal((per_class, n)))
        y += [c] * per_class
    return np.vstack(X), np.array(y)


@pytest.fixture(scope="session")
def har_dir(tmp_path_factory):
    """A small dataset in the UCI HAR directory layout (all four variants)."""
    root = tmp_path_factory.mktemp("har")
    for i, (variant, n) in enumerate((("engineered561", 561), ("raw_x", 128),
                                      ("raw_y", 128), ("raw_z", 128))):
        X, y = subspace_dataset(n, 30, classes=6, rank=4, noise=0.05, seed=i)
        Xt, yt = subspace_dataset(n, 10, classes=6, rank=4, noise=0.05, seed=i)
        # same subspaces (seed) but fresh draws for the test split
        Xt = Xt + 0.0
        rng = np.random.default_rng(100 + i)
        Xt = Xt + 0.01 * rng.standard_normal(Xt.shape)
        subj = np.arange(y.size) % 5 + 1
        write_uci_har(root, Dataset(X, y, HAR_CLASS_NAMES, subj),
                      Dataset(Xt, yt, HAR_CLASS_NAMES, np.arange(yt.size) % 3 + 1), variant)
    return root
