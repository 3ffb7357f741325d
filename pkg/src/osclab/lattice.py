"""Integer lattice geometry on Q = [-N/2, N/2]^d.

Basic cubes are addressed by their integer corner ``c`` (the cube is
``prod [c_a, c_a + 1)``); array layouts use index ``i = c + N/2``.
Everything here is exact integer arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class LatticeRangeError(ValueError):
    """A box or cube falls outside the lattice cube Q."""


class RogueFileError(ValueError):
    """Malformed rogue-set file."""


@dataclass(frozen=True)
class LatticeParams:
    """Dimension ``d``, side ``N`` in basic cubes and the inner-cube margin."""

    d: int
    N: int
    margin: int

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"dimension must be >= 2, got {self.d}")
        if self.N < 2 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 2, got {self.N}")
        if not 1 <= self.margin <= self.N // 2:
            raise ValueError(
                f"margin must lie in [1, N/2] = [1, {self.N // 2}], got {self.margin}; "
                "N is too small for the requested scale"
            )

    @classmethod
    def from_scale(cls, d: int, N: int, scale: float = 4.0) -> "LatticeParams":
        """Margin ``floor(N / (scale * d))``; ``scale=100`` is the asymptotic choice."""
        return cls(d, N, int(N // (scale * d)))

    @property
    def half(self) -> int:
        return self.N // 2

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def ncubes(self) -> int:
        return self.N ** self.d

    def corners(self) -> np.ndarray:
        """All basic-cube corners, shape ``(N**d, d)``, in C (row-major) order."""
        axes = [np.arange(-self.half, self.half)] * self.d
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def inner_mask(self, layers: int = 1) -> np.ndarray:
        """Cubes of Q shrunk by ``layers * margin`` basic cubes per side."""
        w = layers * self.margin
        m = np.zeros(self.shape, dtype=bool)
        if 2 * w < self.N:
            m[(slice(w, self.N - w),) * self.d] = True
        return m

    def check_corner(self, corner) -> tuple:
        c = tuple(int(x) for x in corner)
        if len(c) != self.d:
            raise LatticeRangeError(f"corner {c} has wrong dimension (d={self.d})")
        if any(x < -self.half or x >= self.half for x in c):
            raise LatticeRangeError(f"corner {c} outside [-{self.half}, {self.half - 1}]^{self.d}")
        return c

    def flat_index(self, corner) -> int:
        c = self.check_corner(corner)
        return int(np.ravel_multi_index(tuple(x + self.half for x in c), self.shape))


@dataclass(frozen=True, order=True)
class BasicCube:
    corner: tuple

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(int(x) for x in self.corner))

    @property
    def d(self) -> int:
        return len(self.corner)


@dataclass(frozen=True)
class CenteredCube:
    """``Q_j(I)``: the cube of edge ``2j+1`` made of ``j`` layers around ``I``."""

    center: BasicCube
    radius: int

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be >= 0")

    @property
    def volume(self) -> int:
        return (2 * self.radius + 1) ** self.center.d

    def box(self) -> tuple:
        c = np.asarray(self.center.corner)
        return tuple(c - self.radius), tuple(c + self.radius + 1)

    def clipped_box(self, params: LatticeParams) -> tuple:
        return clip_box(self.box(), params)

    def contains(self, other: "CenteredCube") -> bool:
        (alo, ahi), (blo, bhi) = self.box(), other.box()
        return all(a <= b for a, b in zip(alo, blo)) and all(b <= a for a, b in zip(ahi, bhi))


@dataclass(frozen=True)
class Annulus:
    """``A(I, k) = Q_k(I) \\ Q_{k-1}(I)``."""

    center: BasicCube
    layer: int

    def __post_init__(self):
        if self.layer < 1:
            raise ValueError("annulus layer must be >= 1")

    @property
    def full_size(self) -> int:
        d = self.center.d
        return (2 * self.layer + 1) ** d - (2 * self.layer - 1) ** d

    def cubes(self, params: LatticeParams) -> list:
        return boundary_cubes(self.center, self.layer, params)


@dataclass(frozen=True, order=True)
class DyadicCube:
    """``prod [i_a 2^order, (i_a + 1) 2^order)`` in corner coordinates."""

    order: int
    index: tuple

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("dyadic order must be >= 0")
        object.__setattr__(self, "index", tuple(int(x) for x in self.index))

    @property
    def side(self) -> int:
        return 1 << self.order

    def box(self) -> tuple:
        s = self.side
        return tuple(i * s for i in self.index), tuple((i + 1) * s for i in self.index)

    def contains_cube(self, cube: BasicCube) -> bool:
        return all((c >> self.order) == i for c, i in zip(cube.corner, self.index))

    def contains(self, other: "DyadicCube") -> bool:
        if other.order > self.order:
            return False
        shift = self.order - other.order
        return all((i >> shift) == j for i, j in zip(other.index, self.index))

    def children(self) -> list:
        if self.order == 0:
            return []
        return [
            DyadicCube(self.order - 1, tuple(2 * i + b for i, b in zip(self.index, bits)))
            for bits in itertools.product((0, 1), repeat=len(self.index))
        ]


def dyadic_hull(cube: BasicCube, order: int) -> DyadicCube:
    """The unique dyadic cube of the given order containing ``cube``."""
    if order < 0:
        raise ValueError("order must be >= 0")
    return DyadicCube(order, tuple(c >> order for c in cube.corner))


def clip_box(box, params: LatticeParams) -> tuple:
    lo, hi = box
    h = params.half
    return tuple(max(a, -h) for a in lo), tuple(min(b, h) for b in hi)


def boundary_cubes(center: BasicCube, k: int, params: LatticeParams) -> list:
    """Basic cubes of the outermost layer of ``Q_k(center)``, clipped to Q."""
    c = np.asarray(center.corner)
    lo, hi = clip_box((tuple(c - k), tuple(c + k + 1)), params)
    if any(a >= b for a, b in zip(lo, hi)):
        return []
    axes = [np.arange(a, b) for a, b in zip(lo, hi)]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    ring = np.abs(pts - c).max(axis=1) == k
    return [BasicCube(tuple(p)) for p in pts[ring]]


def prefix_table(mask: np.ndarray) -> np.ndarray:
    """d-dimensional summed-area table with a leading zero row on every axis."""
    p = np.zeros(tuple(n + 1 for n in mask.shape), dtype=np.int64)
    acc = mask.astype(np.int64)
    for ax in range(mask.ndim):
        acc = np.cumsum(acc, axis=ax)
    p[(slice(1, None),) * mask.ndim] = acc
    return p


def box_sums(prefix: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Sums over half-open index boxes ``[lo, hi)``; ``lo``/``hi`` shape ``(n, d)``.

    Boxes must already be clipped to the table; empty boxes give 0.
    """
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    d = lo.shape[1]
    hi = np.maximum(hi, lo)
    out = np.zeros(lo.shape[0], dtype=np.int64)
    for bits in itertools.product((0, 1), repeat=d):
        idx = tuple(np.where(b, hi[:, a], lo[:, a]) for a, b in enumerate(bits))
        sign = -1 if (d - sum(bits)) % 2 else 1
        out += sign * prefix[idx]
    return out


@dataclass(frozen=True, eq=False)
class RogueSet:
    """The collection E of rogue basic cubes with an O(2^d) box-count index."""

    params: LatticeParams
    mask: np.ndarray
    index: np.ndarray = field(repr=False)

    @classmethod
    def from_mask(cls, params: LatticeParams, mask) -> "RogueSet":
        mask = np.ascontiguousarray(mask, dtype=bool)
        if mask.shape != params.shape:
            raise ValueError(f"mask shape {mask.shape} != {params.shape}")
        mask.setflags(write=False)
        idx = prefix_table(mask)
        idx.setflags(write=False)
        return cls(params, mask, idx)

    @classmethod
    def from_cubes(cls, params: LatticeParams, corners) -> "RogueSet":
        mask = np.zeros(params.shape, dtype=bool)
        for c in corners:
            c = params.check_corner(c.corner if isinstance(c, BasicCube) else c)
            pos = tuple(x + params.half for x in c)
            if mask[pos]:
                raise ValueError(f"duplicate cube {c}")
            mask[pos] = True
        return cls.from_mask(params, mask)

    @classmethod
    def empty(cls, params: LatticeParams) -> "RogueSet":
        return cls.from_mask(params, np.zeros(params.shape, dtype=bool))

    def __len__(self) -> int:
        return int(self.index[(-1,) * self.params.d])

    @property
    def members(self) -> list:
        idx = np.argwhere(self.mask) - self.params.half
        return [BasicCube(tuple(r)) for r in idx]

    def count(self, lo, hi) -> int:
        """``#{I in E : I subset [lo, hi)}`` for an in-range corner-coordinate box."""
        return count_in_box(self, (lo, hi))

    def count_clipped(self, lo, hi) -> int:
        lo, hi = clip_box((lo, hi), self.params)
        return count_in_box(self, (lo, hi))


def count_in_box(E: RogueSet, box) -> int:
    """Number of rogue cubes inside an axis-aligned integer box within Q."""
    lo, hi = box
    p = E.params
    if len(lo) != p.d or len(hi) != p.d:
        raise LatticeRangeError("box dimension mismatch")
    for a, b in zip(lo, hi):
        if not (-p.half <= a <= p.half and -p.half <= b <= p.half):
            raise LatticeRangeError(f"box {box} not inside [-{p.half}, {p.half}]^{p.d}")
    ilo = np.asarray(lo, dtype=np.int64)[None] + p.half
    ihi = np.asarray(hi, dtype=np.int64)[None] + p.half
    return int(box_sums(E.index, ilo, ihi)[0])


def write_rogue_file(path, E: RogueSet) -> None:
    p = E.params
    lines = [f"{p.d} {p.N}"]
    lines += [" ".join(str(x) for x in c.corner) for c in E.members]
    Path(path).write_text("\n".join(lines) + "\n")


def read_rogue_file(path, margin: int | None = None, scale: float = 4.0) -> RogueSet:
    """Strict parse of the ``d N`` + one-corner-per-line format."""
    text = Path(path).read_text()
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise RogueFileError(f"{path}: empty file")
    try:
        if len(rows[0]) != 2:
            raise ValueError
        d, N = int(rows[0][0]), int(rows[0][1])
    except ValueError:
        raise RogueFileError(f"{path}: header must be 'd N'") from None
    if margin is None:
        params = LatticeParams.from_scale(d, N, scale)
    else:
        params = LatticeParams(d, N, margin)
    corners = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != d:
            raise RogueFileError(f"{path}:{lineno}: expected {d} integers, got {len(r)}")
        try:
            corners.append(tuple(int(x) for x in r))
        except ValueError:
            raise RogueFileError(f"{path}:{lineno}: non-integer entry") from None
    try:
        return RogueSet.from_cubes(params, corners)
    except (ValueError, LatticeRangeError) as exc:
        raise RogueFileError(f"{path}: {exc}") from None


ROGUE_FAMILIES = ("uniform", "blob")


def random_rogue_set(params: LatticeParams, count: int, seed, family: str = "uniform") -> RogueSet:
    """Seeded rogue set of exactly ``count`` cubes.

    ``uniform`` draws without replacement; ``blob`` grows Gaussian clusters
    of about 50 cubes each around uniform centres.
    """
    if not 0 <= count <= params.ncubes:
        raise ValueError(f"count must lie in [0, {params.ncubes}]")
    rng = np.random.default_rng(seed)
    if family == "uniform":
        flat = rng.choice(params.ncubes, size=count, replace=False)
    elif family == "blob":
        nb = max(1, count // 50)
        centres = rng.integers(0, params.N, size=(nb, params.d))
        sd = max(1.0, 0.5 * (count / nb) ** (1 / params.d))
        chosen: dict = {}
        while len(chosen) < count:
            pick = centres[rng.integers(0, nb, size=count)]
            pts = np.rint(pick + rng.normal(0, sd, size=pick.shape)).astype(np.int64) % params.N
            for f in np.ravel_multi_index(pts.T, params.shape):
                chosen.setdefault(int(f), None)
                if len(chosen) == count:
                    break
        flat = np.fromiter(chosen, dtype=np.int64, count=count)
    else:
        raise ValueError(f"unknown rogue family {family!r}; choose from {', '.join(ROGUE_FAMILIES)}")
    mask = np.zeros(params.ncubes, dtype=bool)
    mask[flat] = True
    return RogueSet.from_mask(params, mask.reshape(params.shape))
