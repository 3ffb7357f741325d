"""Growth harness: the multiplicative chain along kappa sequences and growth curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter

from .fclass import ClassParams, GridFunction, _match
from .lattice import RogueSet
from .measure import DensityGrid, PsiFunction
from .oscillation import BudgetFunction, _per_cube
from .quadrature import unit_ball_volume
from .stopping import Construction
from .verify import bound_shape


def positive_mass_ratio(u: GridFunction, omega: DensityGrid, center, r: float) -> float:
    """``mu(B & {u > 0}) / mu(B)`` by counting sample cells whose midpoint lies in B."""
    _match(u, omega)
    u.check_ball(center, r)
    idx, w = omega.cells_in_ball(center, r, fully=False)
    tot = float(w.sum())
    if tot <= 0:
        raise ValueError("mu(B) = 0: positive mass ratio undefined")
    return float(w[u.values[idx] > 0].sum()) / tot


def covering_constant(d: int, r0: float) -> float:
    """``sup_{r >= r0/2} (2r+1)^d / (v_d r^d)``; the map is decreasing in r."""
    r = r0 / 2
    return (2 * r + 1) ** d / (unit_ball_volume(d) * r ** d)


def closure_lhs(params: ClassParams, psi: PsiFunction, eps: float, r0: float, d: int) -> float:
    cd = covering_constant(d, r0)
    grid_term = d ** (d / 2) * 2 ** d / r0
    return params.A * params.B * (float(psi(cd * eps)) + float(psi(grid_term)) + params.Delta)


def search_delta(lhs: float, tol: float = 1e-12) -> float | None:
    """Largest delta in (0, 1) with ``lhs < 1 - delta``, by bisection."""
    if not lhs < 1:
        return None
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if lhs < 1 - mid:
            lo = mid
        else:
            hi = mid
    return lo if lo > 0 else None


@dataclass
class ChainReport:
    delta: float | None
    closure: bool
    lhs: float
    c_d: float
    ratios: np.ndarray = field(repr=False)
    steps: int = 0
    skipped_nonpositive: int = 0
    monotone: bool = True
    min_ratio: float | None = None
    tolerance: float = 1e-3
    mass_ratios: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    cubes_walked: int = 0
    clipped: int = 0
    notes: list = field(default_factory=list)

    @property
    def ratio_check(self) -> bool:
        """Closure implies every step ratio >= e^delta - 10 tol; vacuous otherwise."""
        if not self.closure or not self.ratios.size:
            return True
        return bool(self.ratios.min() >= math.exp(self.delta) - 10 * self.tolerance)

    @property
    def failing_steps(self) -> int:
        if not self.closure:
            return 0
        return int((self.ratios < math.exp(self.delta) - 10 * self.tolerance).sum())

    def as_dict(self) -> dict:
        return {"delta": self.delta, "closure": self.closure, "lhs": self.lhs, "c_d": self.c_d,
                "steps": self.steps, "skipped_nonpositive": self.skipped_nonpositive,
                "monotone": self.monotone, "min_ratio": self.min_ratio,
                "tolerance": self.tolerance, "ratio_check": self.ratio_check,
                "failing_steps": self.failing_steps, "cubes_walked": self.cubes_walked, "clipped": self.clipped,
                "min_mass_ratio": float(self.mass_ratios.min()) if self.mass_ratios.size else None,
                "notes": list(self.notes)}


def _box_max(cube_max: np.ndarray, k: int) -> np.ndarray:
    return maximum_filter(cube_max, size=2 * k + 1, mode="constant", cval=-np.inf)


def run_chain(u: GridFunction, omega: DensityGrid, params: ClassParams, C: Construction,
              psi: PsiFunction | None = None, tolerance: float = 1e-3,
              max_cubes: int | None = None, mass_probes: int = 256) -> ChainReport:
    """Walk every kappa sequence, comparing M_u over consecutive cubes Q_kappa(I).

    For up to ``mass_probes`` steps the witness x_j is the largest sample on
    the outer layer A(I, kappa_j), and the positive-mass ratio is taken on
    B(x_j, rho(J)) with J the basic cube holding x_j, when that ball fits in Q.
    """
    _match(u, omega)
    lat = C.params
    if u.d != lat.d or u.N != lat.N:
        raise ValueError("function grid and construction lattice differ")
    psi = psi or PsiFunction.linear(1.0)
    d, s, N = lat.d, u.s, lat.N
    lhs = closure_lhs(params, psi, C.p.eps, C.p.r0, d)
    delta = search_delta(lhs)
    cd = covering_constant(d, C.p.r0)
    rep = ChainReport(delta, delta is not None, lhs, cd, np.zeros(0), tolerance=tolerance)

    if not np.any(C.lengths >= 1):
        rep.notes.append("no cube has a kappa sequence: nothing to walk")
        return rep
    # M_u is only known on Q, so walk cubes whose outermost Q_kappa(I) stays inside it
    corners = lat.corners()
    last = C.seqs[np.arange(lat.ncubes), np.maximum(C.lengths - 1, 0)]
    inside = np.all((corners - last[:, None] >= -lat.half) & (corners + last[:, None] + 1 <= lat.half), axis=1)
    walk = np.flatnonzero((C.lengths >= 2) & inside)
    rep.clipped = int(((C.lengths >= 2) & ~inside).sum())
    if max_cubes is not None:
        walk = walk[:max_cubes]
    if not len(walk):
        rep.notes.append("no kappa sequence of length >= 2 fits inside Q: no chain steps")
        return rep

    cube_max = _per_cube(u.values, s, np.max)
    ks = np.unique(C.seqs[walk][C.seqs[walk] > 0])
    boxmax = {int(k): _box_max(cube_max, int(k)).ravel() for k in ks}
    arg = _per_cube_argmax(u.values, s, d)
    grid_c = np.stack(np.unravel_index(walk, lat.shape), axis=1)

    ratios, probes = [], []
    lens = C.lengths[walk]
    for j in range(int(lens.max()) - 1):
        sel = lens >= j + 2
        cubes, kj, kn = walk[sel], C.seqs[walk[sel], j], C.seqs[walk[sel], j + 1]
        a = np.array([boxmax[int(k)][f] for k, f in zip(kj, cubes)])
        b = np.array([boxmax[int(k)][f] for k, f in zip(kn, cubes)])
        rep.steps += len(cubes)
        rep.monotone &= bool(np.all(b >= a))
        pos = a > 0
        rep.skipped_nonpositive += int((~pos).sum())
        ratios.append(b[pos] / a[pos])
        probes += [(ci, int(k)) for ci, k, ok in zip(grid_c[sel], kj, pos) if ok]
    rep.cubes_walked = len(walk)
    rep.ratios = np.concatenate(ratios)
    rep.min_ratio = float(rep.ratios.min()) if rep.ratios.size else None

    masses = []
    stride = max(1, len(probes) // mass_probes)
    rho = C.rho.values
    for ci, k in probes[::stride]:
        x, J = _shell_witness(cube_max, arg, ci, k, s, N)
        r = rho[J]
        if np.isfinite(r) and np.all(np.abs(x) + r <= N / 2):
            masses.append(positive_mass_ratio(u, omega, x, float(r)))
    rep.mass_ratios = np.asarray(masses)
    if rep.clipped:
        rep.notes.append(f"{rep.clipped} cubes skipped: Q_kappa(I) leaves Q")
    if rep.skipped_nonpositive:
        rep.notes.append(f"{rep.skipped_nonpositive} steps with M_u <= 0 on the inner cube: ratio undefined")
    if not rep.closure:
        rep.notes.append(f"closure fails: lhs = {lhs:.4g} >= 1; ratio check is vacuous")
    return rep


def _per_cube_argmax(values: np.ndarray, s: int, d: int) -> np.ndarray:
    N = values.shape[0] // s
    shp = []
    for _ in range(d):
        shp += [N, s]
    v = values.reshape(shp)
    perm = list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2))
    v = v.transpose(perm).reshape((N,) * d + (s ** d,))
    return np.argmax(v, axis=-1)


def _shell_witness(cube_max, arg, ci, k, s, N):
    d = len(ci)
    lo = np.maximum(ci - k, 0)
    hi = np.minimum(ci + k + 1, N)
    sub = cube_max[tuple(slice(a, b) for a, b in zip(lo, hi))]
    rel = np.indices(sub.shape).reshape(d, -1).T + lo
    on_shell = np.abs(rel - ci).max(axis=1) == k
    if not on_shell.any():  # layer fully clipped: fall back to the whole cube
        on_shell[:] = True
    cand = rel[on_shell]
    best = cand[np.argmax(sub.reshape(-1)[on_shell])]
    off = np.unravel_index(arg[tuple(best)], (s,) * d)
    x = -N / 2 + best + (np.asarray(off) + 0.5) / s
    return x, int(np.ravel_multi_index(tuple(best), (N,) * d))


def rogue_indicator_function(E: RogueSet, s: int, low: float = -1.0) -> GridFunction:
    """Equal to 1 on rogue cubes and ``low`` elsewhere: M_u never grows along a chain."""
    lat = E.params
    vals = np.where(E.mask, 1.0, low)
    for ax in range(lat.d):
        vals = np.repeat(vals, s, axis=ax)
    return GridFunction(lat.d, lat.N, s, vals)


@dataclass
class GrowthCurve:
    radii: list
    maxvals: list
    bound: list
    bound_eps: list
    fitted_c: float | None
    fitted_c_eps: float | None
    f_tag: str
    eps: float

    @property
    def monotone(self) -> bool:
        return all(b >= a for a, b in zip(self.maxvals, self.maxvals[1:]))

    def rows(self):
        for R, m, b in zip(self.radii, self.maxvals, self.bound):
            q = math.log(m) / b if m > 0 else float("nan")
            yield R, m, b, q

    def as_dict(self) -> dict:
        return {"radii": list(self.radii), "maxvals": list(self.maxvals), "bound": list(self.bound),
                "bound_eps": list(self.bound_eps), "fitted_c": self.fitted_c,
                "fitted_c_eps": self.fitted_c_eps, "f": self.f_tag, "eps": self.eps,
                "monotone": self.monotone}


def growth_curve(u: GridFunction, f: BudgetFunction, radii, eps: float = 0.1) -> GrowthCurve:
    """Sampled ``M_u(R)`` on balls about 0 against the bound shape for ``f(R)/R`` and ``f(R)/(eps R)``."""
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    if radii[0] <= 0 or radii[-1] > u.N / 2:
        raise ValueError(f"radii must lie in (0, {u.N / 2}]")
    d = u.d
    if d < 2:
        raise ValueError("growth bound needs d >= 2")
    origin = np.zeros(d)
    maxvals, bound, bound_eps = [], [], []
    for R in radii:
        _, v = u.cells_in_ball(origin, R, fully=False)
        maxvals.append(float(v.max()))
        x = float(f(R, d)) / R
        bound.append(bound_shape(R, x, d))
        bound_eps.append(bound_shape(R, x / eps, d))

    def fit(shape):
        if not all(m > 1 for m in maxvals):
            return None
        return min(math.log(m) / b for m, b in zip(maxvals, shape))

    return GrowthCurve(radii, maxvals, bound, bound_eps, fit(bound), fit(bound_eps), f.describe(), eps)
