import pytest

from osclab.lattice import LatticeParams, RogueSet, random_rogue_set
from osclab.reference import compare_with_pipeline
from osclab.stopping import StoppingParams


def _clean(diff):
    return {k: v for k, v in diff.items() if k != "max_length" and v}


@pytest.mark.parametrize("seed,count,r0", [(0, 0, 1.5), (1, 12, 1.5), (2, 40, 2.5), (3, 120, 1.5)])
def test_oracle_long_sequences(seed, count, r0):
    # margin 20 on N = 40 leaves room for sequences of length >= 2
    lat = LatticeParams(2, 40, 20)
    p = StoppingParams(r0=r0, alpha=3e-3)
    diff = compare_with_pipeline(random_rogue_set(lat, count, seed), p)
    assert not _clean(diff)
    if count <= 12:
        assert diff["max_length"] >= 2


def test_oracle_blob_rogue_set():
    lat = LatticeParams(2, 24, 11)
    p = StoppingParams(r0=1.5, eps=0.2)
    diff = compare_with_pipeline(random_rogue_set(lat, 60, 5, "blob"), p)
    assert not _clean(diff)


def test_oracle_detects_a_planted_difference():
    from osclab import reference

    lat = LatticeParams(2, 24, 11)
    p = StoppingParams(r0=1.5)
    E = random_rogue_set(lat, 30, 1)
    orig = reference.naive_rho
    try:
        reference.naive_rho = lambda E, p: orig(E, p) + 1
        diff = compare_with_pipeline(E, p)
    finally:
        reference.naive_rho = orig
    assert diff["rho"] > 0
