import numpy as np
import pytest

# conservative significance level for every goodness-of-fit test in the suite
P_FLOOR = 1e-3


@pytest.fixture
def rng(request):
    """Per-test generator seeded from the test's node id, so reruns are reproducible."""
    seed = abs(hash(request.node.nodeid)) % (2**32)
    return np.random.default_rng(np.random.SeedSequence([20240611, seed]))
