"""Checks of the sequence guarantees on a finished :class:`Construction`.

Per-cube checkers (``verify_containment``, ``verify_density``) enumerate
annulus cubes one by one. The bulk path in :func:`verify_seq_length`
reduces the same conditions to annulus maxima so that every cube of a
128x128 grid is covered in well under a second.

Containment is checked in unclipped geometry: ``Q_rho(x)`` must sit inside
``Q_{kappa_{j+1}}(I)`` as an integer box even where that box leaves Q.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .lattice import BasicCube, CenteredCube, RogueSet, box_sums, boundary_cubes, prefix_table
from .stopping import Construction, KappaSequence, RhoField, StoppingParams, StepFunction, compute_rho


@dataclass
class SequenceReport:
    fraction_with_sequence: float
    fraction_nonempty: float
    pass_M: int
    checked_M: int
    pass_Q: int
    checked_Q: int
    pass_sigma: int
    pass_separation: int
    pass_density: int
    with_sequence: int
    ncubes: int
    long_seq_fraction_inner: float
    long_seq_fraction_all: float
    long_seq_threshold: float
    cover_mass_ratio: float
    cover_mass_sum: int
    min_seq_length_observed: int
    max_seq_length_observed: int
    length_histogram: dict
    bound_value: float
    bound_value_eps: float
    fitted_c: float | None
    fitted_c_eps: float | None
    half_pass: bool
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def headline_pass(self) -> bool:
        return self.fraction_with_sequence >= 0.5


def bound_shape(N: float, x: float, d: int) -> float:
    """``N / (1 + x^{1/(d-1)}) * log^{d/(d-1)}(2 + x)``."""
    return N / (1.0 + x ** (1.0 / (d - 1))) * math.log(2.0 + x) ** (d / (d - 1))


def _q_pair(M: StepFunction, k):
    k = np.asarray(k)
    mk = M(k)
    return mk, M(k - mk)


def verify_property_Q(M: StepFunction, L: int) -> tuple:
    """``(passes, checked, worst ratio)`` of ``M(k)/M(k - M(k)) <= 4`` for k = 1..L."""
    ks = np.arange(1, L + 1)
    mk, mprev = _q_pair(M, ks)
    ratio = mk / mprev
    return int((ratio <= 4).sum()), len(ks), float(ratio.max()) if len(ks) else 1.0


def verify_property_M(C: Construction, k: int) -> tuple:
    """``(#{I : k in K_I}, count >= 11/12 N^d)``."""
    if not 1 <= k <= C.L:
        raise ValueError(f"k must lie in [1, {C.L}]")
    count = int(C.kmask[k - 1].sum())
    return count, 12 * count >= 11 * C.params.ncubes


def _box_inside(inner: CenteredCube, outer: CenteredCube) -> bool:
    return outer.contains(inner)


def _box_disjoint(a: CenteredCube, b: CenteredCube) -> bool:
    (alo, ahi), (blo, bhi) = a.box(), b.box()
    return any(h <= l for l, h in zip(blo, ahi)) or any(h <= l for l, h in zip(alo, bhi))


def verify_containment(I: BasicCube, seq: KappaSequence, rho: RhoField) -> bool:
    """Every boundary cube x of each ``Q_{kappa_j}(I)`` has ``Q_rho(x)`` in the gap."""
    ks = seq.kappas
    lat = rho.params
    for j, k in enumerate(ks):
        for x in boundary_cubes(I, k, lat):
            r = rho[x]
            if not math.isfinite(r):
                return False
            own = CenteredCube(x, int(r))
            if j + 1 < len(ks) and not _box_inside(own, CenteredCube(I, ks[j + 1])):
                return False
            if j > 0 and not _box_disjoint(own, CenteredCube(I, ks[j - 1])):
                return False
    return True


def verify_density(I: BasicCube, seq: KappaSequence, E: RogueSet, p: StoppingParams,
                   rho: RhoField | None = None) -> bool:
    """``#E in Q_rho(x)(x) <= eps (2 rho + 1)^d`` along every boundary used."""
    if rho is None:
        rho = compute_rho(E, p)
    d = E.params.d
    for k in seq.kappas:
        for x in boundary_cubes(I, k, E.params):
            r = rho[x]
            if not math.isfinite(r):
                return False
            lo, hi = CenteredCube(x, int(r)).box()
            if E.count_clipped(lo, hi) > p.eps * (2 * r + 1) ** d:
                return False
    return True


def density_violations(E: RogueSet, rho: RhoField, eps: float) -> np.ndarray:
    """1.0 where the density bound fails at the cube's own rho (0 elsewhere)."""
    lat = E.params
    c = np.stack(np.unravel_index(np.arange(lat.ncubes), lat.shape), axis=1).astype(np.int64)
    r = rho.values
    fin = np.isfinite(r)
    rr = np.where(fin, r, 0).astype(np.int64)[:, None]
    cnt = box_sums(E.index, np.maximum(c - rr, 0), np.minimum(c + rr + 1, lat.N))
    bad = fin & (cnt > eps * (2 * rr[:, 0] + 1.0) ** lat.d)
    return bad.astype(np.float64)


def bulk_properties(C: Construction) -> tuple:
    """Per-cube ``(ok_separation, ok_density)`` over all N^d cubes; empty sequences count as failures."""
    lens = np.asarray(C.lengths)
    seqs = np.asarray(C.seqs)
    n, width = seqs.shape
    ann = np.asarray(C.rho_annulus)
    bad = density_violations(C.E, C.rho, C.p.eps)
    bad_ann = kernels.annulus_max(bad, C.params.N, C.params.d, C.L)
    cols = np.arange(n)
    ok_a = lens > 0
    ok_b = lens > 0
    for j in range(width):
        live = j < lens
        if not live.any():
            break
        kj = seqs[:, j]
        rows = np.clip(kj - 1, 0, C.L - 1)
        R = np.where(live, ann[rows, cols], -np.inf)
        if j + 1 < width:
            nxt = seqs[:, j + 1]
            has_next = live & (j + 1 < lens)
            ok_a &= ~has_next | (kj + R <= nxt)
        if j > 0:
            ok_a &= ~live | (kj - R > seqs[:, j - 1])
        # +/-inf rho on a used annulus means rho was undefined there
        ok_a &= ~live | np.isfinite(R)
        ok_b &= ~live | (bad_ann[rows, cols] <= 0)
    return ok_a, ok_b


def verify_seq_length(C: Construction) -> SequenceReport:
    """Full report for one construction, including the sequence-length bounds."""
    lat, p = C.params, C.p
    nd = lat.ncubes
    L = C.L
    lens = np.asarray(C.lengths)
    notes = []

    Mk = C.M.table(L)[1:]
    threshold = float((1.0 / Mk).sum() / 60.0)
    meets = lens >= threshold
    inner = lat.inner_mask().ravel()
    long_inner = float(meets[inner].mean()) if inner.any() else float("nan")
    long_all = float(meets.mean())

    ok_a, ok_b = bulk_properties(C)
    good = ok_a & ok_b & (lens > 0)
    nonempty = lens > 0

    pass_M = sum(verify_property_M(C, k)[1] for k in range(1, L + 1))
    pass_Q, checked_Q, _ = verify_property_Q(C.M, L)

    cover_sum = sum((2 ** (m * lat.d)) * c for m, c in C.cover.n.items() if m >= p.m0)
    nE = len(C.E)
    cover_ratio = cover_sum * p.eps / nE if nE else 0.0

    x = nE / (p.eps * lat.N)
    bound = bound_shape(lat.N, x, lat.d)
    bound_eps = bound_shape(lat.N, nE / lat.N, lat.d)
    pos = lens[nonempty]
    fitted = float(np.median(pos / bound)) if pos.size else None
    fitted_eps = float(np.median(pos / bound_eps)) if pos.size else None

    if C.M.degenerate:
        notes.append(f"M constant at 2^m0 = {2 ** p.m0}: no cover element of order >= m0")
    if Mk.min() > L:
        notes.append(f"M(k) >= {Mk.min()} exceeds the range L = {L}: sequences have length <= 1")
    if C.alpha_source != "formula":
        notes.append(f"alpha from {C.alpha_source}")

    hist = {int(k): int(v) for k, v in zip(*np.unique(lens, return_counts=True))}
    return SequenceReport(
        fraction_with_sequence=float(good.mean()),
        fraction_nonempty=float(nonempty.mean()),
        pass_M=int(pass_M), checked_M=L,
        pass_Q=pass_Q, checked_Q=checked_Q,
        pass_sigma=int(meets.sum()),
        pass_separation=int((ok_a & nonempty).sum()),
        pass_density=int((ok_b & nonempty).sum()),
        with_sequence=int(good.sum()),
        ncubes=nd,
        long_seq_fraction_inner=long_inner,
        long_seq_fraction_all=long_all,
        long_seq_threshold=threshold,
        cover_mass_ratio=float(cover_ratio),
        cover_mass_sum=int(cover_sum),
        min_seq_length_observed=int(pos.min()) if pos.size else 0,
        max_seq_length_observed=int(lens.max()),
        length_histogram=hist,
        bound_value=bound,
        bound_value_eps=bound_eps,
        fitted_c=fitted,
        fitted_c_eps=fitted_eps,
        half_pass=bool(2 * int((nonempty & meets).sum()) >= nd),
        notes=notes,
    )


def maximal_function_grid(mask: np.ndarray, jmax: int | None = None) -> np.ndarray:
    """Centered-box maximal function ``max_j #(set in Q_j(I)) / (2j+1)^d``.

    Only centered boxes are scanned; the sup over all boxes containing I is
    within a factor 2^d of this value.
    """
    mask = np.asarray(mask, dtype=bool)
    N, d = mask.shape[0], mask.ndim
    if jmax is None:
        jmax = N
    pre = prefix_table(mask)
    return kernels.maximal_scan(pre.ravel(), N, d, int(jmax)).reshape(mask.shape)


def weak_type_check(mask: np.ndarray, level: float, W: float | None = None) -> tuple:
    """``(#{Mf >= level}, W #set / level, holds)`` for the weak-(1,1) bound."""
    d = np.asarray(mask).ndim
    if W is None:
        W = 2.0 ** d * 3.0 ** d
    Mf = maximal_function_grid(mask)
    big = int((Mf >= level).sum())
    rhs = W * int(np.sum(mask)) / level
    return big, rhs, big <= rhs


def mutate_decrement(seq: KappaSequence, j: int) -> KappaSequence:
    """Negative control: move ``kappa_j`` next to ``kappa_{j-1}`` (or to 1)."""
    ks = list(seq.kappas)
    if not 0 <= j < len(ks):
        raise IndexError(j)
    ks[j] = ks[j - 1] + 1 if j > 0 else 1
    return KappaSequence(seq.center, tuple(ks))
