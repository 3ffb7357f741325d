"""Membership tests for the class of functions with a weak maximum principle
and a weighted mean-value inequality, plus the generated test families."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .measure import DensityGrid, _random_ball, constant_density, run_chunks
from .quadrature import SampledGrid


class GridFunction(SampledGrid):
    """Samples of u; ``-inf`` marks a singular sample (e.g. a zero of log|f|)."""

    kind = "function"

    def __init__(self, d, N, s, values):
        super().__init__(d, N, s, values)
        if np.any(np.isnan(self.values)) or np.any(self.values == np.inf):
            raise ValueError("function samples must be finite or -inf")
        if np.all(self.values == -np.inf):
            raise ValueError("function is identically -inf")

    def map(self, fn) -> "GridFunction":
        with np.errstate(invalid="ignore"):
            return GridFunction(self.d, self.N, self.s, fn(self.values))

    def affine(self, lam: float, tau: float) -> "GridFunction":
        return self.map(lambda v: lam * v + tau)

    def maximum(self, other: "GridFunction") -> "GridFunction":
        _match(self, other)
        return GridFunction(self.d, self.N, self.s, np.maximum(self.values, other.values))

    def negate(self) -> "GridFunction":
        if np.any(self.values == -np.inf):
            raise ValueError("cannot negate a function with -inf samples")
        return self.map(lambda v: -v)

    def finite_part(self) -> tuple:
        """``(u with -inf cells set to 0, finite mask)`` for quadrature."""
        fin = np.isfinite(self.values)
        return np.where(fin, self.values, 0.0), fin


def _match(a: SampledGrid, b: SampledGrid):
    if (a.d, a.N, a.s) != (b.d, b.N, b.s):
        raise ValueError(f"sampling mismatch: (d,N,s)={a.d, a.N, a.s} vs {b.d, b.N, b.s}")


@dataclass(frozen=True)
class ClassParams:
    A: float = 1.0
    B: float = 1.0
    r0_mv: float = 1.0
    Delta: float = 0.05

    def __post_init__(self):
        if self.A < 1 or self.B < 1:
            raise ValueError("A and B must be >= 1")
        if not self.r0_mv > 0:
            raise ValueError("r0_mv must be positive")
        if not 0 < self.Delta < 1:
            raise ValueError("Delta must lie in (0, 1)")


@dataclass
class ClassVerdict:
    passed: bool
    trials: int
    failures: int = 0
    skipped: int = 0
    worst: dict | None = None
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "trials": self.trials, "failures": self.failures,
                "skipped": self.skipped, "worst": self.worst, "notes": list(self.notes)}


# -- weak maximum principle ------------------------------------------------------

BODIES = ("box", "ball", "polytope")


def _random_body(rng, u: SampledGrid, kind: str):
    """``(descriptor, slices, membership mask on the slice grid)``."""
    d, half = u.d, u.N / 2
    r = math.exp(rng.uniform(math.log(3.0 / u.s), math.log(half / 2)))
    c = rng.uniform(-half + r, half - r, d)
    if kind == "box":
        hw = r * rng.uniform(0.2, 1.0, d)
        lo, hi = c - hw, c + hw
        desc = {"box": [lo.tolist(), hi.tolist()]}
        test = None
    elif kind == "ball":
        lo, hi = c - r, c + r
        desc = {"ball": c.tolist(), "r": r}
        test = lambda X: sum((x - ci) ** 2 for x, ci in zip(X, c)) <= r * r
    else:
        k = 2 * d + 2
        nrm = rng.normal(size=(k, d))
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        off = r * rng.uniform(0.3, 1.0, k)
        lo, hi = c - r, c + r
        desc = {"polytope": c.tolist(), "r": r, "normals": nrm.tolist(), "offsets": off.tolist()}
        test = lambda X: np.all([sum(n[a] * (X[a] - c[a]) for a in range(d)) <= o
                                 for n, o in zip(nrm, off)], axis=0)
    ilo = np.clip(np.ceil((lo + half) * u.s - 0.5).astype(int), 0, u.n - 1)
    ihi = np.clip(np.floor((hi + half) * u.s - 0.5).astype(int) + 1, 0, u.n)
    sl = tuple(slice(a, b) for a, b in zip(ilo, ihi))
    shape = tuple(max(b - a, 0) for a, b in zip(ilo, ihi))
    if test is None:
        mask = np.ones(shape, dtype=bool)
    else:
        X = np.meshgrid(*[u.points[s_] for s_ in sl], indexing="ij", sparse=True)
        mask = np.broadcast_to(test(X), shape).copy()
    return desc, sl, mask


def boundary_band(mask: np.ndarray) -> np.ndarray:
    """In-body samples with at least one axis neighbour outside the body."""
    interior = mask.copy()
    for ax in range(mask.ndim):
        fwd = np.zeros_like(mask)
        bwd = np.zeros_like(mask)
        idx_a = [slice(None)] * mask.ndim
        idx_b = [slice(None)] * mask.ndim
        idx_a[ax], idx_b[ax] = slice(1, None), slice(None, -1)
        fwd[tuple(idx_b)] = mask[tuple(idx_a)]
        bwd[tuple(idx_a)] = mask[tuple(idx_b)]
        interior &= fwd & bwd
    return mask & ~interior


def _weak_max_chunk(u, A, tol, bodies, n, ss):
    rng = np.random.default_rng(ss)
    out = []
    for _ in range(n):
        kind = bodies[int(rng.integers(len(bodies)))]
        desc, sl, mask = _random_body(rng, u, kind)
        if not mask.any():
            out.append(None)
            continue
        band = boundary_band(mask)
        vals = u.values[sl]
        bvals = vals[band]
        bvals = bvals[np.isfinite(bvals)]
        if bvals.size == 0:
            out.append(None)
            continue
        sup_k = float(vals[mask].max())
        sup_b = float(bvals.max())
        out.append(({"kind": kind, **desc}, sup_k, sup_b, sup_k - (A * sup_b + tol)))
    return out


def check_weak_max(u: GridFunction, A: float, trials: int, seed, tol: float = 1e-3,
                   bodies=BODIES, workers: int = 1) -> ClassVerdict:
    """``sup_K u <= A sup_{dK} u + tol`` over random convex bodies K in Q."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    res = run_chunks(lambda n, ss: _weak_max_chunk(u, A, tol, bodies, n, ss), trials, seed, workers)
    done = [r for r in res if r is not None]
    skipped = len(res) - len(done)
    notes = [f"{skipped} bodies skipped (empty discretized boundary)"] if skipped else []
    if not done:
        return ClassVerdict(False, 0, 0, skipped, None, notes + ["no valid bodies"])
    ex = np.array([r[3] for r in done])
    i = int(np.argmax(ex))
    body, sk, sb, _ = done[i]
    worst = {"body": body, "sup_K": sk, "sup_boundary": sb, "A": A, "tolerance": tol}
    return ClassVerdict(bool(np.all(ex <= 0)), len(done), int((ex > 0).sum()), skipped, worst, notes)


# -- mean value ----------------------------------------------------------------

def _mean_chunk(u, omega, r0, n, ss, op):
    rng = np.random.default_rng(ss)
    num_vals, fin = u.finite_part()
    num = SampledGrid(u.d, u.N, u.s, num_vals * omega.values)
    den = SampledGrid(u.d, u.N, u.s, np.where(fin, omega.values, 0.0))
    out = []
    half = u.N / 2
    rmax = u.N / 4
    for _ in range(n):
        r = rng.uniform(r0, rmax)
        # keep a cell of slack so the snapped centre is a sample point with B inside Q
        c = rng.uniform(-half + r + 1 / u.s, half - r - 1 / u.s, u.d)
        idx = u.sample_index(c)
        x = u.sample_point(idx)
        ux = float(u.values[idx])
        mu = den.ball_integral(x, r)
        if not mu > 0:
            out.append(None)
            continue
        mean = num.ball_integral(x, r) / mu
        out.append(({"center": x.tolist(), "r": r}, ux, mean, op(ux, mean)))
    return out


def check_mean_value(u: GridFunction, omega: DensityGrid, B: float, r0_mv: float, trials: int,
                     seed, tol: float = 1e-3, workers: int = 1) -> ClassVerdict:
    """``u(x) <= B mu(B(x,r))^-1 int_{B(x,r)} u dmu + tol`` for r in (r0_mv, N/4)."""
    _match(u, omega)
    if not r0_mv < u.N / 4:
        raise ValueError("r0_mv must be below N/4")
    op = lambda ux, mean: ux - (B * mean + tol)
    res = run_chunks(lambda n, ss: _mean_chunk(u, omega, r0_mv, n, ss, op), trials, seed, workers)
    return _summarize(res, {"B": B, "tolerance": tol})


def check_weighted_average(u: GridFunction, omega: DensityGrid, trials: int, seed,
                           tol: float = 1e-3, r0_mv: float = 0.25, workers: int = 1) -> ClassVerdict:
    """Equality form: ``|u(x) - (omega-weighted mean over B(x, r))| <= tol``."""
    _match(u, omega)
    op = lambda ux, mean: abs(ux - mean) - tol
    res = run_chunks(lambda n, ss: _mean_chunk(u, omega, r0_mv, n, ss, op), trials, seed, workers)
    return _summarize(res, {"tolerance": tol})


def _summarize(res, extra) -> ClassVerdict:
    done = [r for r in res if r is not None]
    skipped = len(res) - len(done)
    notes = [f"{skipped} balls skipped (zero measure)"] if skipped else []
    if not done:
        return ClassVerdict(False, 0, 0, skipped, None, notes + ["no valid balls"])
    ex = np.array([r[3] for r in done])
    i = int(np.argmax(ex))
    ball, ux, mean, _ = done[i]
    worst = {"ball": ball, "u_center": ux, "mean": mean, **extra}
    return ClassVerdict(bool(np.all(ex <= 0)), len(done), int((ex > 0).sum()), skipped, worst, notes)


# -- Harnack -------------------------------------------------------------------

@dataclass
class HarnackVerdict:
    applicable: bool
    c_hat: float
    weak_max: ClassVerdict | None
    mean_value: ClassVerdict | None
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.applicable and self.weak_max.passed and self.mean_value.passed

    def as_dict(self) -> dict:
        return {"applicable": self.applicable, "c_hat": self.c_hat, "passed": self.passed,
                "weak_max": self.weak_max.as_dict() if self.weak_max else None,
                "mean_value": self.mean_value.as_dict() if self.mean_value else None,
                "notes": list(self.notes)}


def harnack_constant(u: GridFunction, trials: int, seed, rmin: float = 0.5) -> float:
    """Empirical sup over random balls of ``sup_B u / inf_B u``; inf if some inf is <= 0."""
    def chunk(n, ss):
        rng = np.random.default_rng(ss)
        out = []
        for _ in range(n):
            B = _random_ball(rng, u, rmin, u.N / 4, False)
            _, vals = u.cells_in_ball(B.center, B.radius, fully=False)
            lo = vals.min()
            out.append(math.inf if lo <= 0 else float(vals.max() / lo))
        return out

    return float(max(run_chunks(chunk, trials, seed)))


def check_harnack_implies_membership(u: GridFunction, c: float | None = None, trials: int = 200,
                                     seed=0, r0_mv: float = 0.5, tol: float = 1e-3) -> HarnackVerdict:
    """Estimate the Harnack constant, then test weak max at A=c and mean value at B=c."""
    if np.any(u.values <= 0):
        return HarnackVerdict(False, math.inf, None, None, ["u has non-positive samples"])
    c_hat = harnack_constant(u, trials, seed)
    if not math.isfinite(c_hat):
        return HarnackVerdict(False, c_hat, None, None, ["Harnack estimate unbounded"])
    c_use = max(c_hat if c is None else c, 1.0)
    wm = check_weak_max(u, c_use, trials, seed, tol=tol)
    mv = check_mean_value(u, constant_density(u.d, u.N, u.s), c_use, r0_mv, trials, seed, tol=tol)
    return HarnackVerdict(True, c_hat, wm, mv, [f"checks run with constant {c_use:g}"])


# -- families ------------------------------------------------------------------

FAMILIES = ("log-sin", "log-poly-zeros", "quadratic", "discrete-harmonic-extension",
            "constant", "bounded-oscillation")


def log_abs_sin(x, y):
    """``log|sin(pi (x + i y))|`` without overflow for large |y|."""
    ay = np.abs(y)
    e = np.exp(-2 * np.pi * ay)
    with np.errstate(divide="ignore"):
        return np.pi * ay - math.log(2) + 0.5 * np.log(4 * np.sin(np.pi * x) ** 2 * e + (1 - e) ** 2)


def lattice_zeros(lo: int, hi: int, spacing: int = 1) -> np.ndarray:
    """Integer points of ``[lo, hi]^2`` on a sub-lattice of the given spacing."""
    a = np.arange(lo, hi + 1, spacing)
    X, Y = np.meshgrid(a, a, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def zeros_normalization(zeros: np.ndarray) -> float:
    return float(np.log(np.maximum(np.hypot(zeros[:, 0], zeros[:, 1]), 1.0)).sum())


def log_poly_direct(x, y, zeros: np.ndarray, norm: float | None = None):
    """Direct evaluation of ``sum log|z - lambda| - norm`` (the oracle)."""
    if norm is None:
        norm = zeros_normalization(zeros)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    with np.errstate(divide="ignore"):
        for zx, zy in zeros:
            out += np.log(np.hypot(x - zx, y - zy))
    return out - norm


def _log_poly_fft(N: int, s: int, zeros: np.ndarray, norm: float) -> np.ndarray:
    # zeros are integer points, i.e. on sample-cell corners: x_i - lambda = (i - J + 1/2) h
    n, h = N * s, 1.0 / s
    Z = np.zeros((n + 1, n + 1))
    J = ((zeros + N // 2) * s).astype(int)
    ok = np.all((J >= 0) & (J <= n), axis=1)
    np.add.at(Z, (J[ok, 0], J[ok, 1]), 1.0)
    m = (np.arange(-n, n) + 0.5) * h
    K = 0.5 * np.log(m[:, None] ** 2 + m[None, :] ** 2)
    full = fftconvolve(Z, K, mode="full")
    return full[n:2 * n, n:2 * n] - norm


def discrete_harmonic(n: int, d: int, boundary: np.ndarray, tol: float = 1e-8, max_iter: int = 200000):
    """Red-black SOR for the (2d+1)-point Laplacian with Dirichlet data on the outer layer.

    ``boundary`` gives the full initial grid; only its outer layer is used.
    Returns ``(grid, residual, iterations)``.
    """
    g = np.array(boundary, dtype=float)
    inner = tuple(slice(1, -1) for _ in range(d))
    g[inner] = g[tuple(slice(0, 1) for _ in range(d))].mean() if g.size else 0.0
    idx = np.indices(g.shape).sum(axis=0)
    colors = [(idx % 2 == c)[inner] for c in (0, 1)]
    omega = 2.0 / (1.0 + math.sin(math.pi / (n - 1)))

    def nbr_mean(a):
        acc = np.zeros(tuple(x - 2 for x in a.shape))
        for ax in range(d):
            lo = [slice(1, -1)] * d
            hi = [slice(1, -1)] * d
            lo[ax], hi[ax] = slice(0, -2), slice(2, None)
            acc += a[tuple(lo)] + a[tuple(hi)]
        return acc / (2 * d)

    res = math.inf
    for it in range(1, max_iter + 1):
        for col in colors:
            view = g[inner]
            upd = nbr_mean(g) - view
            view[col] += omega * upd[col]
        if it % 10 == 0:
            res = float(np.abs(nbr_mean(g) - g[inner]).max())
            if res < tol:
                return g, res, it
    return g, res, max_iter


def generate_test_function(family: str, d: int, N: int, s: int, seed=0, **params) -> GridFunction:
    """Deterministic sample of one of :data:`FAMILIES` on ``(N s)^d`` midpoints."""
    rng = np.random.default_rng(seed)
    if family == "constant":
        v = float(params.get("value", 1.0))
        return GridFunction.from_function(lambda *X: v + 0 * X[0], d, N, s)
    if family == "quadratic":
        a = float(params.get("a", 1.0))
        b = float(params.get("b", 0.0))
        return GridFunction.from_function(lambda *X: a * sum(x * x for x in X) + b, d, N, s)
    if family == "bounded-oscillation":
        base = float(params.get("base", 2.0))
        amp = float(params.get("amp", 0.1))
        return GridFunction.from_function(lambda *X: base + amp * np.sin(X[0]), d, N, s)
    if family == "log-sin":
        if d != 2:
            raise ValueError("log-sin is defined for d = 2")
        return GridFunction.from_function(log_abs_sin, 2, N, s)
    if family == "log-poly-zeros":
        if d != 2:
            raise ValueError("log-poly-zeros is defined for d = 2")
        zeros = params.get("zeros")
        if zeros is None:
            R = int(params.get("extent", N // 2 - 1))
            zeros = lattice_zeros(-R, R, int(params.get("spacing", 1)))
        zeros = np.asarray(zeros)
        norm = params.get("norm")
        norm = zeros_normalization(zeros) if norm is None else float(norm)
        vals = _log_poly_fft(N, s, zeros, norm)
        return GridFunction(2, N, s, vals)
    if family == "discrete-harmonic-extension":
        n = N * s
        bnd = rng.normal(size=(n,) * d) * float(params.get("scale", 1.0))
        grid, res, _ = discrete_harmonic(n, d, bnd, tol=float(params.get("tol", 1e-8)))
        if res >= float(params.get("tol", 1e-8)):
            raise RuntimeError(f"relaxation did not converge (residual {res:.3g})")
        return GridFunction(d, N, s, grid)
    raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")


def zero_neighbourhood_radius(zeros: np.ndarray, k: int, norm: float | None = None,
                              rmax: float = 0.5, steps: int = 400, rays: int = 64) -> float:
    """Largest scanned r with ``u <= 0`` on every circle of radius <= r around zero k.

    Near the zero ``u ~ log r + C_k``; the scan runs log-spaced from far below
    ``exp(-C_k)`` up to ``rmax``.
    """
    if norm is None:
        norm = zeros_normalization(zeros)
    z = zeros[k]
    others = np.delete(zeros, k, axis=0)
    C = float(np.log(np.hypot(*(others - z).T)).sum()) - norm
    r_lo = min(math.exp(-C) * 1e-3, rmax / steps) if C < 600 else 1e-300
    th = np.linspace(0, 2 * np.pi, rays, endpoint=False)
    best = 0.0
    for r in np.geomspace(r_lo, rmax, steps):
        x = z[0] + r * np.cos(th)
        y = z[1] + r * np.sin(th)
        if np.any(log_poly_direct(x, y, zeros, norm) > 0):
            break
        best = float(r)
    return best
