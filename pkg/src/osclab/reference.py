"""Slow, literal re-implementation of the construction for small grids.

No prefix sums, no order-level batching, no annulus maxima: every count is
a scan over the member list and every cover test walks the retained hulls.
Meant for d=2, N <= 32.
"""

import math

import numpy as np

from .lattice import LatticeParams, RogueSet
from .stopping import StoppingParams


def _members(E: RogueSet) -> np.ndarray:
    return np.argwhere(E.mask) - E.params.half


def naive_rho(E: RogueSet, p: StoppingParams) -> np.ndarray:
    lat = E.params
    mem = _members(E)
    out = np.full(lat.ncubes, np.inf)
    for flat, c in enumerate(lat.corners()):
        for j in range(math.ceil(p.r0), lat.N + 1):
            inside = int(np.all(np.abs(mem - c) <= j, axis=1).sum())
            if inside <= p.eps / 2 * (2 * j + 1) ** lat.d:
                out[flat] = j
                break
    return out


def naive_cover(rho: np.ndarray, lat: LatticeParams) -> list:
    corners = [tuple(int(x) for x in c) for c in lat.corners()]
    cubes = [(-rho[i], corners[i], i) for i in range(lat.ncubes) if math.isfinite(rho[i])]
    cubes.sort()
    kept = []
    for _, c, i in cubes:
        if any(all((c[a] >> m) == q[a] for a in range(lat.d)) for m, q in kept):
            continue
        m = 0
        while 2 ** m < 2 * rho[i]:
            m += 1
        kept.append((m, tuple(x >> m for x in c)))
    return kept


def naive_step(kept: list, p: StoppingParams, lat: LatticeParams, alpha: float) -> list:
    hist = {}
    for m, _ in kept:
        hist[m] = hist.get(m, 0) + 1
    cap = float(lat.margin)
    s = []
    m = p.m0
    while True:
        T = sum(2 ** l * c for l, c in hist.items() if l >= m)
        v = cap if T == 0 else min((alpha * lat.N ** lat.d / T) ** (1 / (lat.d - 1)) + 2 ** (m + 2), cap)
        s.append(v)
        if v >= cap:
            return s
        m += 1


def naive_M(s: list, m0: int, k: int) -> int:
    for i, v in enumerate(s):
        if k <= v:
            return 2 ** (m0 + i)
    return 2 ** (m0 + len(s) - 1)


def naive_K(rho: np.ndarray, lat: LatticeParams, s: list, m0: int) -> list:
    corners = lat.corners()
    out = []
    for c in corners:
        K = set()
        for k in range(1, lat.margin + 1):
            Mk = naive_M(s, m0, k)
            ring = np.abs(corners - c).max(axis=1) == k
            if np.all(rho[ring] <= Mk):
                K.add(k)
        out.append(K)
    return out


def naive_kappa(K: set, s: list, m0: int) -> tuple:
    if not K:
        return ()
    seq = [max(K)]
    while True:
        c = [k for k in K if k < seq[-1] - naive_M(s, m0, seq[-1])]
        if not c:
            break
        seq.append(max(c))
    return tuple(sorted(seq))


def naive_pipeline(E: RogueSet, p: StoppingParams) -> dict:
    lat = E.params
    alpha, _ = p.alpha_for(lat)
    rho = naive_rho(E, p)
    kept = naive_cover(rho, lat)
    s = naive_step(kept, p, lat, alpha)
    K = naive_K(rho, lat, s, p.m0)
    kap = [naive_kappa(k, s, p.m0) for k in K]
    return {"rho": rho, "cover": sorted(kept), "s": s, "K": K, "kappa": kap}


def naive_verdicts(E: RogueSet, p: StoppingParams, out: dict) -> tuple:
    """Per-cube ``(ok_separation, ok_density)`` by literal box tests."""
    lat = E.params
    corners = lat.corners()
    rho = out["rho"]
    mem = _members(E)
    ok_a, ok_b = [], []
    for c, seq in zip(corners, out["kappa"]):
        a = b = bool(seq)
        for j, k in enumerate(seq):
            for flat in np.flatnonzero(np.abs(corners - c).max(axis=1) == k):
                x = corners[flat]
                r = rho[flat]
                if not math.isfinite(r):
                    a = b = False
                    continue
                r = int(r)
                if j + 1 < len(seq):
                    big = seq[j + 1]
                    if any(x[t] - r < c[t] - big or x[t] + r > c[t] + big for t in range(lat.d)):
                        a = False
                if j > 0:
                    small = seq[j - 1]
                    if all(x[t] + r >= c[t] - small and x[t] - r <= c[t] + small for t in range(lat.d)):
                        a = False
                cnt = int(np.all(np.abs(mem - x) <= r, axis=1).sum())
                if cnt > p.eps * (2 * r + 1) ** lat.d:
                    b = False
        ok_a.append(a)
        ok_b.append(b)
    return np.array(ok_a), np.array(ok_b)


def compare_with_pipeline(E: RogueSet, p: StoppingParams) -> dict:
    """Mismatch counts between :func:`naive_pipeline` and the optimized construction."""
    from .stopping import construct
    from .verify import bulk_properties

    lat = E.params
    C = construct(E, p, enforce_budget=False)
    ref = naive_pipeline(E, p)
    cover = sorted((J.order, J.index) for J in C.cover.elements)
    K = [set((np.flatnonzero(C.kmask[:, i]) + 1).tolist()) for i in range(lat.ncubes)]
    kap = [tuple(int(x) for x in C.seqs[i, :C.lengths[i]]) for i in range(lat.ncubes)]
    ok_a, ok_b = bulk_properties(C)
    ref_a, ref_b = naive_verdicts(E, p, ref)
    return {
        "rho": int((C.rho.values != ref["rho"]).sum()),
        "cover": 0 if cover == ref["cover"] else 1,
        "steps": 0 if list(C.M.s) == ref["s"] else 1,
        "K": sum(a != b for a, b in zip(K, ref["K"])),
        "kappa": sum(a != b for a, b in zip(kap, ref["kappa"])),
        "verdict_separation": int((ok_a != ref_a).sum()),
        "verdict_density": int((ok_b != ref_b).sum()),
        "max_length": max(len(k) for k in kap),
    }
