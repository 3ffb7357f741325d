"""Densities, the psi-controlled measure condition and the A_p estimator."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .quadrature import Ball, Box, CubeSet, RegionError, SampledGrid, unit_ball_volume

CHUNK = 256


class DensityGrid(SampledGrid):
    """Samples of a density omega >= 0."""

    kind = "density"

    def __init__(self, d, N, s, values):
        super().__init__(d, N, s, values)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("density samples must be finite")
        if np.any(self.values < 0):
            raise ValueError("density samples must be >= 0")

    @property
    def sup(self) -> float:
        return float(self.values.max())

    def tolerance(self, region=None) -> float:
        """Quadrature allowance ``10 s^-2 sup(omega) * m(region)``."""
        vol = 1.0 if region is None else region.volume()
        return 10.0 * self.s ** -2 * self.sup * vol


def mu_of_region(omega: DensityGrid, region) -> float:
    """``mu(region)`` for a :class:`Box`, :class:`Ball` or :class:`CubeSet`."""
    return float(region.integrate(omega))


# -- psi -----------------------------------------------------------------------

@dataclass(frozen=True)
class PsiFunction:
    family: str
    params: tuple

    def __post_init__(self):
        if self.family == "linear":
            (slope,) = self.params
            if not slope > 0:
                raise ValueError("linear psi needs a positive slope")
        elif self.family == "power":
            c, q = self.params
            if not (c > 0 and q > 0):
                raise ValueError("power psi needs c > 0 and q > 0")
        elif self.family == "tabulated":
            ts, vs = (np.asarray(x, dtype=float) for x in self.params)
            if ts.ndim != 1 or ts.shape != vs.shape or len(ts) < 2:
                raise ValueError("tabulated psi needs matching 1-d tables")
            if ts[0] != 0 or vs[0] != 0:
                raise ValueError("tabulated psi must start at (0, 0)")
            if np.any(np.diff(ts) <= 0) or np.any(np.diff(vs) < 0):
                raise ValueError("tabulated psi must be monotone increasing")
            if ts[-1] < 1:
                raise ValueError("tabulated psi must cover [0, 1]")
        else:
            raise ValueError(f"unknown psi family {self.family!r}")

    @classmethod
    def linear(cls, slope: float) -> "PsiFunction":
        return cls("linear", (float(slope),))

    @classmethod
    def power(cls, c: float, q: float) -> "PsiFunction":
        return cls("power", (float(c), float(q)))

    @classmethod
    def tabulated(cls, ts, values) -> "PsiFunction":
        return cls("tabulated", (tuple(map(float, ts)), tuple(map(float, values))))

    @classmethod
    def parse(cls, text: str) -> "PsiFunction":
        """``linear:slope`` or ``power:c,q``."""
        fam, _, rest = text.partition(":")
        try:
            vals = [float(x) for x in rest.split(",")]
        except ValueError:
            raise ValueError(f"bad psi string {text!r}") from None
        if fam == "linear" and len(vals) == 1:
            return cls.linear(vals[0])
        if fam == "power" and len(vals) == 2:
            return cls.power(*vals)
        raise ValueError(f"bad psi string {text!r}; use linear:slope or power:c,q")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "linear":
            return self.params[0] * t
        if self.family == "power":
            c, q = self.params
            return c * np.power(t, q)
        ts, vs = self.params
        return np.interp(t, ts, vs)

    def describe(self) -> str:
        return f"{self.family}:{','.join(f'{x:g}' for x in np.ravel(self.params))}" \
            if self.family != "tabulated" else "tabulated"


@dataclass
class MembershipVerdict:
    passed: bool
    trials: int
    worst_pair: dict | None
    failures: int = 0
    tested_domain: str = ""
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "trials": self.trials, "failures": self.failures,
                "worst_pair": self.worst_pair, "tested_domain": self.tested_domain,
                "notes": list(self.notes)}


# -- trial generation ------------------------------------------------------------

SET_KINDS = ("subball", "box", "cells", "topcells", "sliver")


@dataclass
class Trial:
    ball: Ball
    set_kind: str
    set_desc: dict
    mu_E: float
    mu_B: float
    m_E: float
    m_B: float
    sup_B: float

    @property
    def lhs(self) -> float:
        return self.mu_E / self.mu_B

    @property
    def t(self) -> float:
        return min(self.m_E / self.m_B, 1.0)


def _mass_cdf(omega: SampledGrid) -> np.ndarray:
    cdf = getattr(omega, "_cdf", None)
    if cdf is None:
        cdf = np.cumsum(omega.values.ravel())
        omega._cdf = cdf
    return cdf


def _random_ball(rng, omega: SampledGrid, rmin: float, rmax: float, weighted: bool) -> Ball:
    r = math.exp(rng.uniform(math.log(rmin), math.log(rmax)))
    half = omega.N / 2
    if weighted:
        cdf = _mass_cdf(omega)
        if cdf[-1] > 0:
            i = min(int(np.searchsorted(cdf, rng.uniform(0, cdf[-1]), side="right")), cdf.size - 1)
            c = omega.sample_point(np.unravel_index(i, omega.values.shape))
            return Ball(np.clip(c, -half + r, half - r), r)
    return Ball(rng.uniform(-half + r, half - r, omega.d), r)


def _random_set(rng, omega: DensityGrid, B: Ball, kind: str):
    """``(kind, descriptor, mu(E), m(E))`` for a random E inside B."""
    d, c, r = omega.d, B.center, B.radius
    vd = unit_ball_volume(d)
    if kind == "subball":
        rr = r * rng.uniform(0.02, 1.0)
        if rng.random() < 0.5:
            center = c
        else:
            v = rng.normal(size=d)
            v *= rng.uniform(0, r - rr) / max(np.linalg.norm(v), 1e-300)
            center = c + v
        E = Ball(center, rr)
        return kind, E.describe(), omega.ball_integral(E.center, rr), vd * rr ** d
    if kind == "box":
        v = rng.normal(size=d)
        v *= rng.uniform(0, 0.9 * r) / max(np.linalg.norm(v), 1e-300)
        p = c + v
        room = (r - np.linalg.norm(v)) / math.sqrt(d)
        hw = room * rng.uniform(0.05, 1.0, d)
        E = Box(p - hw, p + hw)
        return kind, E.describe(), omega.box_integral(E.lo, E.hi), E.volume()
    if kind in ("cells", "topcells"):
        idx, vals = omega.cells_in_ball(c, r)
        if len(vals) == 0:
            return None
        k = int(rng.integers(1, len(vals) + 1))
        if kind == "cells":
            pick = rng.choice(len(vals), size=k, replace=False)
            mass = vals[pick].sum()
        else:
            mass = np.sort(vals)[::-1][:k].sum()
        cell = omega.h ** d
        return kind, {"cells": k, "of": int(len(vals))}, float(mass * cell), k * cell
    if kind == "sliver":
        outer = r * rng.uniform(0.3, 1.0)
        inner = outer * (1 - rng.uniform(0.01, 0.3))
        mu = omega.ball_integral(c, outer) - omega.ball_integral(c, inner)
        return kind, {"annulus": [float(x) for x in c], "r_in": inner, "r_out": outer}, \
            max(mu, 0.0), vd * (outer ** d - inner ** d)
    raise ValueError(kind)


def _trial_chunk(omega, n, seed_seq, rmin, rmax, kinds):
    rng = np.random.default_rng(seed_seq)
    out = []
    while len(out) < n:
        B = _random_ball(rng, omega, rmin, rmax, weighted=rng.random() < 0.5)
        muB = omega.ball_integral(B.center, B.radius)
        if muB <= 0:
            continue
        res = _random_set(rng, omega, B, kinds[int(rng.integers(len(kinds)))])
        if res is None:
            continue
        kind, desc, muE, mE = res
        out.append(Trial(B, kind, desc, muE, muB, mE, B.volume(), omega.sup_in_ball(B.center, B.radius)))
    return out


def run_chunks(fn, trials: int, seed, workers: int | None = None):
    """Split ``trials`` into fixed chunks with spawned seeds; results are worker-independent."""
    if workers is None:
        workers = _accel.WORKERS
    nchunks = max(1, math.ceil(trials / CHUNK))
    seeds = np.random.SeedSequence(seed).spawn(nchunks)
    sizes = [min(CHUNK, trials - i * CHUNK) for i in range(nchunks)]
    jobs = list(zip(sizes, seeds))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda a: fn(*a), jobs))
    else:
        parts = [fn(*a) for a in jobs]
    return [t for part in parts for t in part]


def sample_trials(omega: DensityGrid, trials: int, seed, rmin=None, rmax=None,
                  kinds=SET_KINDS, workers: int = 1) -> list:
    rmin = 4.0 / omega.s if rmin is None else rmin
    rmax = omega.N / 4 if rmax is None else rmax
    return run_chunks(lambda n, ss: _trial_chunk(omega, n, ss, rmin, rmax, kinds), trials, seed, workers)


def explicit_trial(omega: DensityGrid, B: Ball, E) -> Trial:
    """A hand-picked (E, B) candidate, E a :class:`Ball` or :class:`Box` inside B."""
    kind = "subball" if isinstance(E, Ball) else "box"
    return Trial(B, kind, E.describe(), mu_of_region(omega, E), mu_of_region(omega, B),
                 E.volume(), B.volume(), omega.sup_in_ball(B.center, B.radius))


def _tolerance(omega: DensityGrid, tr: Trial) -> float:
    tau = 10.0 * omega.s ** -2 * tr.sup_B
    return tau * tr.m_B / tr.mu_B


def _evaluate(omega, psi, trs):
    lhs = np.array([t.lhs for t in trs])
    ts = np.array([t.t for t in trs])
    tol = np.array([_tolerance(omega, t) for t in trs])
    return lhs, ts, tol


def _worst(trs, lhs, rhs, tol, derived: bool):
    excess = lhs - (rhs + tol)
    i = int(np.argmax(excess))
    tr = trs[i]
    return {
        "set": {"kind": tr.set_kind, **tr.set_desc},
        "ball": tr.ball.describe(),
        "lhs": float(lhs[i]),
        "rhs": float(rhs[i]),
        "tolerance": float(tol[i]),
        "t": float(tr.t),
        "tag": "DERIVED: quadrature" if derived else "quadrature",
    }


def check_psi_condition(omega: DensityGrid, psi: PsiFunction, trials: int, seed,
                        extra=(), workers: int = 1, **kw) -> MembershipVerdict:
    """Randomized search for ``(E, B)`` with ``mu(E)/mu(B) > psi(m(E)/m(B)) + tol``.

    ``extra`` holds explicit :func:`explicit_trial` candidates evaluated on top
    of the random ones.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    trs = sample_trials(omega, trials, seed, workers=workers, **kw) + list(extra)
    lhs, ts, tol = _evaluate(omega, psi, trs)
    rhs = psi(ts)
    bad = lhs > rhs + tol
    return MembershipVerdict(
        passed=not bad.any(), trials=len(trs), failures=int(bad.sum()),
        worst_pair=_worst(trs, lhs, rhs, tol, derived=bool(extra)),
        tested_domain=f"balls inside Q=[-{omega.N / 2:g}, {omega.N / 2:g}]^{omega.d}",
    )


def fit_power_psi(omega: DensityGrid, trials: int, seed, cs=None, qs=None, extra=(),
                  workers: int = 1) -> tuple:
    """Smallest ``(c, q)`` (c ascending, then q descending) with ``c t^q`` passing.

    Returns ``(c, q, verdict)``; ``(None, None, verdict)`` if nothing passes.
    """
    cs = [1, 1.5, 2, 3, 4, 6, 8, 12, 16, 24, 32, 64, 128, 256] if cs is None else cs
    qs = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1] if qs is None else qs
    trs = sample_trials(omega, trials, seed, workers=workers) + list(extra)
    lhs, ts, tol = _evaluate(omega, None, trs)
    domain = f"balls inside Q=[-{omega.N / 2:g}, {omega.N / 2:g}]^{omega.d}"
    for c in sorted(cs):
        for q in sorted(qs, reverse=True):
            rhs = c * ts ** q
            if np.all(lhs <= rhs + tol):
                v = MembershipVerdict(True, len(trs), _worst(trs, lhs, rhs, tol, bool(extra)),
                                      0, domain, [f"accepted psi(t) = {c:g} t^{q:g}"])
                return c, q, v
    rhs = max(cs) * ts ** min(qs)
    bad = lhs > rhs + tol
    v = MembershipVerdict(False, len(trs), _worst(trs, lhs, rhs, tol, bool(extra)), int(bad.sum()),
                          domain, ["no (c, q) candidate passed"])
    return None, None, v


# -- A_p -----------------------------------------------------------------------

def _ap_on_ball(omega: DensityGrid, dual: SampledGrid | None, B: Ball, p: float) -> float:
    vol = B.volume()
    a = omega.ball_integral(B.center, B.radius) / vol
    if dual is None:
        return math.inf
    b = dual.ball_integral(B.center, B.radius) / vol
    return a * b ** (p - 1)


def _dual(omega: DensityGrid, p: float):
    if np.any(omega.values <= 0):
        return None
    return SampledGrid(omega.d, omega.N, omega.s, omega.values ** (1.0 / (1.0 - p)))


def ap_constant(omega: DensityGrid, p: float, trials: int, seed, rmin=None, rmax=None,
                workers: int = 1) -> float:
    """Lower estimate of the A_p constant; ``inf`` when omega has zero samples."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    dual = _dual(omega, p)
    if dual is None:
        return math.inf
    rmin = 4.0 / omega.s if rmin is None else rmin
    rmax = omega.N / 4 if rmax is None else rmax

    def chunk(n, ss):
        rng = np.random.default_rng(ss)
        return [_ap_on_ball(omega, dual, _random_ball(rng, omega, rmin, rmax, rng.random() < 0.5), p)
                for _ in range(n)]

    return float(max(run_chunks(chunk, trials, seed, workers)))


def ap_on_balls(omega: DensityGrid, p: float, balls) -> list:
    dual = _dual(omega, p)
    return [_ap_on_ball(omega, dual, B, p) for B in balls]


# -- densities -----------------------------------------------------------------

def constant_density(d: int, N: int, s: int, value: float = 1.0) -> DensityGrid:
    return DensityGrid.from_function(lambda *X: value + 0 * X[0], d, N, s)


def power_density(d: int, N: int, s: int, alpha: float = 1.0) -> DensityGrid:
    """``|x|^alpha``."""
    return DensityGrid.from_function(lambda *X: np.sqrt(sum(x * x for x in X)) ** alpha, d, N, s)


def cos_bump(x, y, kmax: int = 8):
    """Bumps ``cos(k |z - 2 pi k|)`` on ``B(2 pi k, pi/(2k))`` over ``exp(-|z|)``."""
    out = np.exp(-np.hypot(x, y))
    for k in range(1, kmax + 1):
        rr = np.hypot(x - 2 * math.pi * k, y)
        out = out + np.where(rr < math.pi / (2 * k), np.cos(k * rr), 0.0)
    return out


def cos_bump_density(N: int, s: int, kmax: int = 8) -> DensityGrid:
    """Cos-bump density in d=2, clipped to Q (bumps outside Q are dropped by sampling)."""
    return DensityGrid.from_function(lambda x, y: cos_bump(x, y, kmax), 2, N, s)


def cos_bump_witness(k: int) -> tuple:
    """``(E, B) = (B(2 pi k, pi/(2k)), B(2 pi k, 1))``."""
    c = (2 * math.pi * k, 0.0)
    return Ball(c, math.pi / (2 * k)), Ball(c, 1.0)


def cos_bump_bump_mass(k: int) -> float:
    """Closed form of the bump's integral over its support: ``2 pi (pi/2 - 1) / k^2``."""
    return 2 * math.pi * (math.pi / 2 - 1) / k ** 2


def lebesgue_ratio(k: int) -> float:
    """``m(B(., pi/(2k))) / m(B(., 1)) = pi^2 / (4 k^2)``."""
    return math.pi ** 2 / (4 * k ** 2)


def refuted_slope(omega: DensityGrid, k: int) -> dict:
    """The witness pair at bump k and the largest linear slope it refutes."""
    E, B = cos_bump_witness(k)
    tr = explicit_trial(omega, B, E)
    tol = _tolerance(omega, tr)
    return {"k": k, "mu_ratio": tr.lhs, "lebesgue_ratio": tr.t, "tolerance": tol,
            "max_refuted_slope": (tr.lhs - tol) / tr.t}


__all__ = [
    "DensityGrid", "PsiFunction", "MembershipVerdict", "Ball", "Box", "CubeSet", "RegionError",
    "mu_of_region", "check_psi_condition", "fit_power_psi", "ap_constant", "ap_on_balls",
    "constant_density", "power_density", "cos_bump_density", "cos_bump_witness",
    "cos_bump_bump_mass", "lebesgue_ratio", "refuted_slope", "explicit_trial",
]
