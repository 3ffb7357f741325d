import numpy as np
import pytest

from osclab.lattice import LatticeParams, random_rogue_set
from osclab.stopping import StoppingParams


@pytest.fixture
def lat64():
    return LatticeParams.from_scale(2, 64)


def budget_instance(N, seed, d=2, family="uniform", **kw):
    lat = LatticeParams.from_scale(d, N)
    p = StoppingParams(**kw)
    return lat, p, random_rogue_set(lat, p.budget(lat), seed, family)


def brute_count(mask, lo, hi):
    """Members of a boolean cube mask (index = corner + N/2) inside [lo, hi)."""
    half = mask.shape[0] // 2
    idx = np.argwhere(mask) - half
    if not len(idx):
        return 0
    return int(np.all((idx >= np.asarray(lo)) & (idx < np.asarray(hi)), axis=1).sum())
