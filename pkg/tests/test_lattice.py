import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osclab.lattice import (Annulus, BasicCube, CenteredCube, DyadicCube, LatticeParams, LatticeRangeError,
                            RogueFileError, RogueSet, boundary_cubes, count_in_box, dyadic_hull,
                            random_rogue_set, read_rogue_file, write_rogue_file)

from conftest import brute_count


def test_params_validation():
    with pytest.raises(ValueError):
        LatticeParams(2, 15, 1)
    with pytest.raises(ValueError):
        LatticeParams(2, 16, 9)
    with pytest.raises(ValueError):
        LatticeParams(2, 16, 0)
    lat = LatticeParams.from_scale(2, 128)
    assert lat.margin == 16
    assert LatticeParams.from_scale(2, 400, scale=100).margin == 2
    with pytest.raises(ValueError, match="too small"):
        LatticeParams.from_scale(2, 128, scale=100)


def test_count_trivial():
    lat = LatticeParams(2, 16, 2)
    h = lat.half
    assert count_in_box(RogueSet.empty(lat), ((-h, -h), (h, h))) == 0
    full = RogueSet.from_mask(lat, np.ones(lat.shape, bool))
    assert count_in_box(full, ((-h, -h), (h, h))) == 256


def test_count_listed_cubes():
    lat = LatticeParams(2, 16, 2)
    cubes = [(0, 0), (1, -2), (-3, 3), (3, 3), (5, -7)]
    E = RogueSet.from_cubes(lat, cubes)
    lo, hi = CenteredCube(BasicCube((0, 0)), 3).box()
    expect = sum(all(l <= c < u for c, l, u in zip(x, lo, hi)) for x in cubes)
    assert E.count(lo, hi) == expect == 4


def test_count_out_of_range():
    lat = LatticeParams(2, 16, 2)
    with pytest.raises(LatticeRangeError):
        count_in_box(RogueSet.empty(lat), ((-9, 0), (0, 1)))


@settings(max_examples=20, deadline=None)
@given(d=st.sampled_from([2, 3]), half=st.integers(1, 32), seed=st.integers(0, 2 ** 32 - 1),
       density=st.floats(0.0, 1.0))
def test_prefix_counts_match_naive(d, half, seed, density):
    N = 2 * half
    if d == 3:
        N = min(N, 24)
    lat = LatticeParams(d, N, 1)
    rng = np.random.default_rng(seed)
    E = RogueSet.from_mask(lat, rng.random(lat.shape) < density)
    h = lat.half
    # 50 boxes per example, 20 examples: 1000 random boxes per dimension draw
    for _ in range(50):
        a = rng.integers(-h, h + 1, size=d)
        b = rng.integers(-h, h + 1, size=d)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        assert E.count(tuple(lo), tuple(hi)) == brute_count(E.mask, lo, hi)


def test_centered_cube_geometry():
    I = BasicCube((2, -1))
    for j in range(5):
        Q = CenteredCube(I, j)
        assert Q.volume == (2 * j + 1) ** 2
        assert CenteredCube(I, j + 1).contains(Q)
    assert CenteredCube(I, 0).box() == ((2, -1), (3, 0))


def test_annulus_partition():
    lat = LatticeParams(2, 32, 4)
    I = BasicCube((1, 2))
    k = 5
    seen = {I.corner}
    for j in range(1, k + 1):
        layer = {c.corner for c in Annulus(I, j).cubes(lat)}
        assert len(layer) == Annulus(I, j).full_size == (2 * j + 1) ** 2 - (2 * j - 1) ** 2
        assert not (layer & seen)
        seen |= layer
    lo, hi = CenteredCube(I, k).box()
    assert seen == set(itertools.product(*[range(a, b) for a, b in zip(lo, hi)]))


def test_dyadic_hull_examples():
    assert dyadic_hull(BasicCube((0, 0)), 0).box() == ((0, 0), (1, 1))
    assert dyadic_hull(BasicCube((3, 5)), 2).box() == ((0, 4), (4, 8))
    assert dyadic_hull(BasicCube((-1, -5)), 2).box() == ((-4, -8), (0, -4))


@given(st.tuples(st.integers(-64, 63), st.integers(-64, 63)), st.integers(0, 7))
def test_dyadic_hull_contains_and_monotone(corner, order):
    I = BasicCube(corner)
    J = dyadic_hull(I, order)
    lo, hi = J.box()
    assert all(l <= c and c + 1 <= h for c, l, h in zip(corner, lo, hi))
    assert dyadic_hull(I, order + 1).contains(J)


def test_dyadic_children_partition():
    J = DyadicCube(3, (1, -2))
    kids = J.children()
    assert len(kids) == 4
    vol = sum(k.side ** 2 for k in kids)
    assert vol == J.side ** 2
    for a, b in itertools.combinations(kids, 2):
        assert not a.contains(b) and a != b


def test_boundary_cubes_interior_counts():
    assert len(boundary_cubes(BasicCube((0, 0)), 1, LatticeParams(2, 16, 2))) == 8
    assert len(boundary_cubes(BasicCube((0, 0, 0)), 2, LatticeParams(3, 16, 2))) == 98


def test_boundary_cubes_clipped_match_scan():
    lat = LatticeParams(2, 16, 2)
    I = BasicCube((-8, 6))
    for k in (1, 2, 5):
        got = {c.corner for c in boundary_cubes(I, k, lat)}
        scan = {tuple(c) for c in lat.corners() if max(abs(c[0] + 8), abs(c[1] - 6)) == k}
        assert got == scan


def test_rogue_file_roundtrip(tmp_path):
    lat = LatticeParams.from_scale(2, 64)
    E = random_rogue_set(lat, 40, 7)
    path = tmp_path / "e.txt"
    write_rogue_file(path, E)
    F = read_rogue_file(path)
    assert np.array_equal(E.mask, F.mask)


@pytest.mark.parametrize("text", ["", "2\n", "2 16\n0\n", "2 16\n0 0\n0 0\n", "2 16\n8 0\n", "2 16\na b\n"])
def test_rogue_file_strict(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises((RogueFileError, LatticeRangeError, ValueError)):
        read_rogue_file(path)


def test_random_rogue_set_deterministic():
    lat = LatticeParams.from_scale(2, 64)
    for fam in ("uniform", "blob"):
        a = random_rogue_set(lat, 100, 3, fam)
        b = random_rogue_set(lat, 100, 3, fam)
        assert len(a) == 100 and np.array_equal(a.mask, b.mask)
