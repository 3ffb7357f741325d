"""The stopping-time construction on lattice cubes.

Pipeline: rho field -> maximal dyadic cover -> histogram n_l -> breakpoints
s_m -> step function M(k) -> index sets K_I -> kappa sequences. The bulk
functions work on whole grids through :mod:`osclab.kernels`; the per-cube
functions (:func:`compute_KI`, :func:`build_kappa`) are direct transcriptions
used for spot checks.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .lattice import BasicCube, DyadicCube, LatticeParams, RogueSet, boundary_cubes

log = logging.getLogger(__name__)


class BudgetError(ValueError):
    """#E exceeds eps * c0 * N^d."""


def default_C1(d: int) -> float:
    # 30^d from the covering step times a 6^d weak-(1,1) constant for cubes
    return 30.0 ** d * (2.0 ** d * 3.0 ** d)


def default_C2(d: int) -> float:
    return 2.0 ** d * 6.0 * d * 3.0 ** (d - 1)


def first_m0(r0: float) -> int:
    """First integer m with 2^m > 8 r0."""
    m = 0
    while 2 ** m <= 8 * r0:
        m += 1
    return m


@dataclass(frozen=True)
class StoppingParams:
    """Construction constants.

    ``c0=None`` picks the largest budget fraction for which every
    inner-cube rho is guaranteed finite: ``(2L+1)^d / (2 N^d)``.
    ``alpha=None`` uses ``(1/12 - 1/50)/C2 - c0 C1``; when that is not
    positive the c0-free value ``(1/12 - 1/50)/C2`` is used and
    :meth:`alpha_for` reports the fallback.
    """

    eps: float = 0.1
    r0: float = 4.0
    c0: float | None = None
    alpha: float | None = None
    C1: float | None = None
    C2: float | None = None

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if not self.r0 > 1:
            raise ValueError(f"r0 must exceed 1, got {self.r0}")
        if self.c0 is not None and not 0 < self.c0 < 1:
            raise ValueError(f"c0 must lie in (0, 1), got {self.c0}")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        for name in ("C1", "C2"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")

    @property
    def m0(self) -> int:
        return first_m0(self.r0)

    @property
    def j0(self) -> int:
        return math.ceil(self.r0)

    def c0_for(self, lat: LatticeParams) -> float:
        if self.c0 is not None:
            return self.c0
        return (2 * lat.margin + 1) ** lat.d / (2.0 * lat.N ** lat.d)

    def C1_for(self, d: int) -> float:
        return self.C1 if self.C1 is not None else default_C1(d)

    def C2_for(self, d: int) -> float:
        return self.C2 if self.C2 is not None else default_C2(d)

    def alpha_for(self, lat: LatticeParams) -> tuple:
        """``(alpha, source)`` with source one of override/formula/c0-free fallback."""
        if self.alpha is not None:
            return self.alpha, "override"
        base = (1 / 12 - 1 / 50) / self.C2_for(lat.d)
        a = base - self.c0_for(lat) * self.C1_for(lat.d)
        if a > 0:
            return a, "formula"
        return base, "c0-free fallback"

    def budget(self, lat: LatticeParams) -> int:
        return int(math.floor(self.eps * self.c0_for(lat) * lat.N ** lat.d + 1e-9))

    def as_dict(self, lat: LatticeParams | None = None) -> dict:
        out = {"eps": self.eps, "r0": self.r0, "m0": self.m0}
        if lat is not None:
            a, src = self.alpha_for(lat)
            out.update(c0=self.c0_for(lat), alpha=a, alpha_source=src,
                       C1=self.C1_for(lat.d), C2=self.C2_for(lat.d), budget=self.budget(lat))
        return out


@dataclass(frozen=True, eq=False)
class RhoField:
    """rho per basic cube, flattened C-order; ``inf`` where the scan found none."""

    params: LatticeParams
    values: np.ndarray

    def __getitem__(self, cube: BasicCube) -> float:
        return float(self.values[self.params.flat_index(cube.corner)])

    def grid(self) -> np.ndarray:
        return self.values.reshape(self.params.shape)


@dataclass(frozen=True, eq=False)
class DyadicCover:
    elements: tuple
    n: dict

    def __len__(self):
        return len(self.elements)

    def containing(self, cube: BasicCube):
        for J in self.elements:
            if J.contains_cube(cube):
                return J
        return None


@dataclass(frozen=True, eq=False)
class StepFunction:
    """``M(k) = 2^m`` on ``(s_{m-1}, s_m]``, ``2^{m0}`` for ``k <= s_{m0}``."""

    m0: int
    s: tuple
    cap: float
    degenerate: bool = False

    @property
    def mbar(self) -> int:
        return self.m0 + len(self.s) - 2

    def __call__(self, k):
        k = np.asarray(k)
        pos = np.searchsorted(np.asarray(self.s), k, side="left")
        pos = np.minimum(pos, len(self.s) - 1)
        out = np.left_shift(1, self.m0 + pos).astype(np.int64)
        return int(out) if out.ndim == 0 else out

    def table(self, L: int) -> np.ndarray:
        """``M(k)`` for ``k = 0..L`` (index 0 holds ``M(0)``)."""
        return self(np.arange(L + 1))


@dataclass(frozen=True)
class KappaSequence:
    center: BasicCube
    kappas: tuple

    def __len__(self):
        return len(self.kappas)


def compute_rho(E: RogueSet, p: StoppingParams) -> RhoField:
    lat = E.params
    vals = kernels.rho_scan(E.index.ravel(), lat.N, lat.d, float(p.eps), p.j0, lat.N)
    vals.setflags(write=False)
    return RhoField(lat, vals)


def build_cover(rho: RhoField, p: StoppingParams | None = None) -> DyadicCover:
    lat = rho.params
    morder = kernels.hull_order(rho.values)
    order = kernels.cover_order(rho.values, lat.N, lat.d)
    ms, idx = kernels.cover_scan(order, rho.values, morder, lat.N, lat.d)
    els = sorted((DyadicCube(int(m), tuple(int(x) for x in row)) for m, row in zip(ms, idx)),
                 key=lambda J: (-J.order, J.index))
    hist = {}
    for J in els:
        hist[J.order] = hist.get(J.order, 0) + 1
    return DyadicCover(tuple(els), dict(sorted(hist.items())))


def build_step_function(n: dict, p: StoppingParams, lat: LatticeParams,
                        alpha: float | None = None) -> StepFunction:
    d, N = lat.d, lat.N
    if alpha is None:
        alpha, _ = p.alpha_for(lat)
    cap = float(lat.margin)
    m = p.m0
    s = []
    while True:
        tail = sum((2 ** l) * c for l, c in n.items() if l >= m)
        if tail == 0:
            v = cap
        else:
            v = min((alpha * N ** d / tail) ** (1.0 / (d - 1)) + 2.0 ** (m + 2), cap)
        s.append(v)
        if v >= cap:
            break
        m += 1
    degenerate = not any(c for l, c in n.items() if l >= p.m0)
    return StepFunction(p.m0, tuple(s), cap, degenerate)


def compute_KI(I: BasicCube, rho: RhoField, M: StepFunction) -> set:
    lat = rho.params
    out = set()
    for k in range(1, lat.margin + 1):
        mk = M(k)
        if all(rho[x] <= mk for x in boundary_cubes(I, k, lat)):
            out.add(k)
    return out


def build_kappa(I: BasicCube, K_I, M: StepFunction) -> KappaSequence:
    ks = sorted(K_I)
    if not ks:
        return KappaSequence(I, ())
    rev = [ks[-1]]
    while True:
        lim = rev[-1] - M(rev[-1])
        cand = [k for k in ks if k < lim]
        if not cand:
            break
        rev.append(cand[-1])
    return KappaSequence(I, tuple(reversed(rev)))


@dataclass(eq=False)
class Construction:
    """Frozen outputs of the whole pipeline for one rogue set."""

    E: RogueSet
    p: StoppingParams
    rho: RhoField
    cover: DyadicCover
    M: StepFunction
    alpha: float
    alpha_source: str
    rho_annulus: np.ndarray = field(repr=False)   # (L, N^d) max rho over A(I,k)
    kmask: np.ndarray = field(repr=False)         # (L, N^d) k in K_I
    lengths: np.ndarray = field(repr=False)
    seqs: np.ndarray = field(repr=False)

    @property
    def params(self) -> LatticeParams:
        return self.E.params

    @property
    def L(self) -> int:
        return self.params.margin

    def K(self, I: BasicCube) -> set:
        idx = self.params.flat_index(I.corner)
        return {k + 1 for k in np.flatnonzero(self.kmask[:, idx])}

    def kappa(self, I: BasicCube) -> KappaSequence:
        idx = self.params.flat_index(I.corner)
        n = int(self.lengths[idx])
        return KappaSequence(I, tuple(int(x) for x in self.seqs[idx, :n]))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(np.where(np.isfinite(self.rho.values), self.rho.values, -1.0)).tobytes())
        for J in self.cover.elements:
            h.update(repr((J.order, J.index)).encode())
        h.update(repr(self.M.s).encode())
        h.update(np.ascontiguousarray(self.kmask).tobytes())
        h.update(np.ascontiguousarray(self.seqs).tobytes())
        return h.hexdigest()


def kappa_maxlen(L: int, m0: int) -> int:
    return L // (2 ** m0 + 1) + 1


def construct(E: RogueSet, p: StoppingParams, enforce_budget: bool = True) -> Construction:
    """Run the full construction; raises :class:`BudgetError` past the budget gate."""
    lat = E.params
    if enforce_budget and len(E) > p.budget(lat):
        raise BudgetError(
            f"budget gate: #E = {len(E)} > eps*c0*N^d = {p.eps * p.c0_for(lat) * lat.N ** lat.d:.4g}")
    rho = compute_rho(E, p)
    cover = build_cover(rho, p)
    alpha, src = p.alpha_for(lat)
    M = build_step_function(cover.n, p, lat, alpha)
    if M.degenerate and len(E):
        log.info("no cover element of order >= m0=%d: M is constant 2^m0", p.m0)
    L = lat.margin
    ann = kernels.annulus_max(rho.values, lat.N, lat.d, L)
    Mk = M.table(L)
    kmask = ann <= Mk[1:, None]
    lengths, seqs = kernels.kappa_all(kmask, Mk.astype(np.int64), kappa_maxlen(L, p.m0))
    for a in (ann, kmask, lengths, seqs):
        a.setflags(write=False)
    return Construction(E, p, rho, cover, M, alpha, src, ann, kmask, lengths, seqs)
