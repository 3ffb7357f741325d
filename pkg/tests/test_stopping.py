import math

import numpy as np
import pytest

from osclab.lattice import BasicCube, CenteredCube, LatticeParams, RogueSet, random_rogue_set
from osclab.stopping import (BudgetError, RhoField, StepFunction, StoppingParams, build_cover, build_kappa,
                             build_step_function, compute_KI, compute_rho, construct, first_m0)
from osclab.verify import verify_property_Q

from conftest import brute_count, budget_instance


def test_params_validation():
    for bad in ({"eps": 0}, {"eps": 1}, {"r0": 1.0}, {"c0": 1.5}, {"alpha": -1}, {"C1": 0}):
        with pytest.raises(ValueError):
            StoppingParams(**bad)


def test_m0_is_first_power_above_8r0():
    assert first_m0(4.0) == 6
    assert first_m0(1.5) == 4
    assert first_m0(2.0) == 5  # 2^4 = 16 is not > 16


def test_alpha_sources():
    lat = LatticeParams.from_scale(2, 128)
    assert StoppingParams(alpha=0.01).alpha_for(lat) == (0.01, "override")
    a, src = StoppingParams().alpha_for(lat)
    assert src == "c0-free fallback" and a == pytest.approx((1 / 12 - 1 / 50) / 144)
    a, src = StoppingParams(c0=1e-9).alpha_for(lat)
    assert src == "formula" and 0 < a < (1 / 12 - 1 / 50) / 144


def test_budget():
    lat = LatticeParams.from_scale(2, 128)
    p = StoppingParams()
    assert p.budget(lat) == math.floor(0.1 * 33 ** 2 / 2)  # (2L+1)^2 / 2 with L = 16
    E = random_rogue_set(lat, p.budget(lat) + 1, 0)
    with pytest.raises(BudgetError, match="budget gate"):
        construct(E, p)


def test_rho_empty_is_ceil_r0():
    lat = LatticeParams(2, 32, 4)
    rho = compute_rho(RogueSet.empty(lat), StoppingParams(r0=3.2))
    assert np.all(rho.values == 4)


def test_rho_block_matches_double_loop():
    lat = LatticeParams(2, 32, 4)
    p = StoppingParams(eps=0.1, r0=4)
    E = RogueSet.from_cubes(lat, [(x, y) for x in (-1, 0, 1) for y in (-1, 0, 1)])
    rho = compute_rho(E, p)
    rng = np.random.default_rng(0)
    for c in lat.corners()[rng.choice(lat.ncubes, 20, replace=False)]:
        want = math.inf
        for j in range(4, lat.N + 1):
            lo, hi = np.maximum(c - j, -16), np.minimum(c + j + 1, 16)
            if brute_count(E.mask, lo, hi) <= 0.05 * (2 * j + 1) ** 2:
                want = j
                break
        assert rho[BasicCube(tuple(c))] == want


def test_rho_finite_on_inner_cube_at_budget():
    lat, p, E = budget_instance(128, 0)
    rho = compute_rho(E, p).values
    inner = lat.inner_mask().ravel()
    assert np.all(rho >= 4)
    assert np.all(rho[inner] <= lat.margin)


def test_cover_constant_rho():
    lat = LatticeParams(2, 32, 4)
    cover = build_cover(compute_rho(RogueSet.empty(lat), StoppingParams(r0=4)))
    assert set(cover.n) == {3}
    assert cover.n[3] == (32 // 8) ** 2


def test_cover_single_finite_cube():
    lat = LatticeParams(2, 16, 2)
    vals = np.full(lat.ncubes, np.inf)
    vals[lat.flat_index((3, -2))] = 5
    cover = build_cover(RhoField(lat, vals))
    assert len(cover) == 1
    J = cover.elements[0]
    assert J.contains_cube(BasicCube((3, -2))) and J.order == 4


def test_cover_nonnested_and_covering():
    lat = LatticeParams(2, 32, 4)
    E = RogueSet.from_cubes(lat, [(x + 5, y + 5) for x in range(4) for y in range(4)] + [(-10, -12), (-11, -12)])
    rho = compute_rho(E, StoppingParams(eps=0.1, r0=2.5))
    cover = build_cover(rho)
    els = cover.elements
    assert len({J.order for J in els}) > 1
    for a in els:
        for b in els:
            if a is not b:
                assert not a.contains(b)
    for c in lat.corners():
        I = BasicCube(tuple(c))
        r = rho[I]
        if math.isfinite(r):
            assert any(J.contains_cube(I) for J in els)
    corners = lat.corners()
    for J in els:
        # the cube that produced J is the first in processing order inside it
        inside = [i for i, c in enumerate(corners) if J.contains_cube(BasicCube(tuple(c))) and math.isfinite(rho.values[i])]
        r = max(rho.values[i] for i in inside)
        assert 2 * r <= 2 ** J.order < 4 * r


def test_step_function_empty_histogram():
    lat = LatticeParams.from_scale(2, 128)
    p = StoppingParams()
    M = build_step_function({}, p, lat)
    assert M.degenerate
    assert np.all(M.table(lat.margin) == 2 ** p.m0)


def test_step_function_monotone_and_Q():
    # cap L must exceed 2^{m0+2} = 64 for M to take more than one value
    lat = LatticeParams(2, 256, 128)
    p = StoppingParams(r0=1.5, alpha=2e-4)
    E = random_rogue_set(lat, 500, 4, "blob")
    M = build_step_function(build_cover(compute_rho(E, p)).n, p, lat)
    assert len(M.s) > 1
    assert all(b >= a for a, b in zip(M.s, M.s[1:]))
    tab = M.table(lat.margin)
    assert np.all(np.diff(tab) >= 0)
    passes, checked, worst = verify_property_Q(M, lat.margin)
    assert passes == checked and worst <= 4


def test_KI_empty_is_full_range():
    lat = LatticeParams(2, 64, 8)
    p = StoppingParams(r0=1.5)
    E = RogueSet.empty(lat)
    rho = compute_rho(E, p)
    M = build_step_function({}, p, lat)
    assert compute_KI(BasicCube((0, 0)), rho, M) == set(range(1, 9))


def test_KI_empty_when_every_annulus_has_infinite_rho():
    lat = LatticeParams(2, 16, 4)
    vals = np.full(lat.ncubes, 4.0)
    for c in lat.corners():
        if c[1] == 7 or c[0] == -8:
            vals[lat.flat_index(c)] = np.inf
    rho = RhoField(lat, vals)
    M = StepFunction(6, (4.0,), 4.0)
    assert compute_KI(BasicCube((-8, 7)), rho, M) == set()


def test_KI_matches_bulk_mask():
    lat = LatticeParams(2, 64, 32)
    p = StoppingParams(r0=1.5, alpha=2e-4)
    E = random_rogue_set(lat, 300, 2)
    C = construct(E, p, enforce_budget=False)
    rng = np.random.default_rng(1)
    corners = lat.corners()
    for _ in range(50):
        i = int(rng.integers(lat.ncubes))
        k = int(rng.integers(1, lat.margin + 1))
        ring = np.abs(corners - corners[i]).max(axis=1) == k
        want = bool(np.all(C.rho.values[ring] <= C.M(k)))
        assert bool(C.kmask[k - 1, i]) == want


def test_kappa_constant_M():
    M = StepFunction(3, (40.0,), 40.0)
    seq = build_kappa(BasicCube((0, 0)), set(range(1, 41)), M)
    assert seq.kappas == (4, 13, 22, 31, 40)
    assert build_kappa(BasicCube((0, 0)), {7}, M).kappas == (7,)
    assert build_kappa(BasicCube((0, 0)), set(), M).kappas == ()


def test_kappa_spacing_on_instances():
    lat = LatticeParams(2, 64, 32)
    p = StoppingParams(r0=1.5, alpha=2e-4)
    for seed in range(3):
        C = construct(random_rogue_set(lat, 150, seed), p, enforce_budget=False)
        for i in np.flatnonzero(C.lengths >= 2):
            ks = C.seqs[i, :C.lengths[i]]
            K = set(np.flatnonzero(C.kmask[:, i]) + 1)
            assert ks[-1] == max(K) and set(ks) <= K
            for a, b in zip(ks, ks[1:]):
                assert b - a > C.M(int(b))


def test_per_cube_kappa_matches_bulk():
    lat = LatticeParams(2, 64, 32)
    p = StoppingParams(r0=1.5, alpha=2e-4)
    C = construct(random_rogue_set(lat, 150, 9), p, enforce_budget=False)
    for c in lat.corners()[::97]:
        I = BasicCube(tuple(c))
        K = compute_KI(I, C.rho, C.M)
        assert K == C.K(I)
        assert build_kappa(I, K, C.M) == C.kappa(I)


def test_digest_deterministic():
    lat, p, E = budget_instance(64, 3)
    assert construct(E, p).digest() == construct(E, p).digest()
