"""Per-cube oscillation classification and the rogue-cube count."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fclass import GridFunction, _match
from .lattice import LatticeParams, RogueSet, write_rogue_file
from .measure import DensityGrid


@dataclass(frozen=True)
class BudgetFunction:
    """``power``: beta t^p (p <= d); ``linear``: beta t; ``capped``: min(beta t^p, t^d)."""

    family: str
    beta: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        if self.family not in ("power", "linear", "capped"):
            raise ValueError(f"unknown budget family {self.family!r}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.family == "linear" and self.p != 1.0:
            raise ValueError("linear budget has p = 1")
        if not self.p >= 0:
            raise ValueError("exponent must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "BudgetFunction":
        """``power:beta,p``, ``linear:beta`` or ``capped:beta,p``."""
        fam, _, rest = text.partition(":")
        try:
            vals = [float(x) for x in rest.split(",")] if rest else []
        except ValueError:
            raise ValueError(f"bad budget string {text!r}") from None
        if fam == "linear" and len(vals) <= 1:
            return cls("linear", vals[0] if vals else 1.0, 1.0)
        if fam in ("power", "capped") and len(vals) == 2:
            return cls(fam, vals[0], vals[1])
        raise ValueError(f"bad budget string {text!r}; use power:beta,p | linear:beta | capped:beta,p")

    def __call__(self, t, d: int | None = None):
        t = np.asarray(t, dtype=float)
        v = self.beta * t ** self.p
        if self.family == "capped":
            if d is None:
                raise ValueError("capped budget needs d")
            v = np.minimum(v, t ** d)
        return v

    def validate(self, d: int, ts) -> None:
        """Monotone and below ``t^d`` on the evaluated range."""
        ts = np.sort(np.asarray(ts, dtype=float))
        v = self(ts, d)
        if self.family == "power" and self.p > d:
            raise ValueError(f"budget exponent {self.p} exceeds d = {d}")
        if np.any(np.diff(v) < 0):
            raise ValueError("budget function must be non-decreasing")
        if np.any(v > ts ** d * (1 + 1e-12)):
            raise ValueError("budget function exceeds t^d on the evaluated range")

    def describe(self) -> str:
        return f"{self.family}:{self.beta:g},{self.p:g}"


@dataclass(eq=False)
class OscillationReport:
    p1: np.ndarray
    p2: np.ndarray
    rogue: np.ndarray
    invalid: np.ndarray
    gamma: float
    f_tag: str
    N: int
    Delta: float

    @property
    def rogue_count(self) -> int:
        return int(self.rogue.sum())

    def rogue_set(self, margin: int | None = None, scale: float = 4.0) -> RogueSet:
        d = self.rogue.ndim
        lat = LatticeParams(d, self.N, margin) if margin is not None else LatticeParams.from_scale(d, self.N, scale)
        return RogueSet.from_mask(lat, self.rogue)

    def export_rogue(self, path, **kw) -> None:
        write_rogue_file(path, self.rogue_set(**kw))

    def summary(self) -> dict:
        return {"N": self.N, "Delta": self.Delta, "f": self.f_tag, "gamma": self.gamma,
                "rogue": self.rogue_count, "p1": int(self.p1.sum()), "p2": int(self.p2.sum()),
                "oscillating": int((self.p1 & self.p2).sum()), "invalid": int(self.invalid.sum()),
                "cubes": int(self.rogue.size)}


def _per_cube(arr: np.ndarray, s: int, reduce) -> np.ndarray:
    d = arr.ndim
    N = arr.shape[0] // s
    shp = []
    for _ in range(d):
        shp += [N, s]
    view = arr.reshape(shp)
    return reduce(view, axis=tuple(range(1, 2 * d, 2)))


def classify(u: GridFunction, omega: DensityGrid, Delta: float, f: BudgetFunction) -> OscillationReport:
    """P1 by sample max per basic cube, P2 by omega-weighted counting of samples with u <= 0."""
    _match(u, omega)
    if not 0 < Delta < 1:
        raise ValueError("Delta must lie in (0, 1)")
    s = u.s
    p1 = _per_cube(u.values, s, np.max) >= 1
    w = omega.values
    mu_I = _per_cube(w, s, np.sum)
    mu_Z = _per_cube(np.where(u.values <= 0, w, 0.0), s, np.sum)
    invalid = mu_I <= 0
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(invalid, 0.0, mu_Z / np.where(invalid, 1.0, mu_I))
    p2 = (frac >= 1 - Delta) & ~invalid
    rogue = ~(p1 & p2)
    fN = float(f(u.N, u.d))
    gamma = float(rogue.sum()) / fN
    return OscillationReport(p1, p2, rogue, invalid, gamma, f.describe(), u.N, Delta)


@dataclass
class OscillationVerdict:
    oscillating: bool
    gammas: list
    Ns: list
    label: str = "finite-sample surrogate: max over the tested N of gamma < 1"


def is_f_oscillating(reports) -> OscillationVerdict:
    reports = list(reports)
    if len(reports) < 3:
        raise ValueError("need reports for at least 3 values of N")
    reports.sort(key=lambda r: r.N)
    gammas = [r.gamma for r in reports]
    return OscillationVerdict(max(gammas) < 1, gammas, [r.N for r in reports])


def is_f_oscillating_gammas(gammas) -> bool:
    gammas = list(gammas)
    if len(gammas) < 3:
        raise ValueError("need at least 3 values of gamma")
    return max(gammas) < 1
