"""Phase spaces, maps, targets and samplers on tori.

Points are plain float64 arrays with coordinates in [0, 1): shape ``(d,)``
for a single point and ``(N, d)`` for a batch.  Systems and targets are
immutable dataclasses; before iteration they are lowered to small tables
interpreted by the compiled kernels in ``_kernels``.

Coordinate layout of fibered systems is ``(x, y)``: the fiber (acted on by
``T``) comes first, the base (acted on by ``R``) second.

Floating point: torus arithmetic is double precision with a mod-1 reduction
after every elementary step; drift is bounded by iteration count times
machine epsilon and is not corrected.  The doubling map is the one
exception, see ``Doubling``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np

from . import _codegen as G
from . import _kernels as K
from .rng import RngStream


class UnsupportedGeometry(ValueError):
    """Target too large for the exact-measure formulas (radius or halfwidth cap)."""


class SamplingError(RuntimeError):
    """Rejection sampling exhausted its candidate budget."""


def wrap(x):
    """Reduce to [0, 1) (never returns 1.0)."""
    w = np.asarray(x, dtype=float) - np.floor(x)
    return np.where(w >= 1.0, 0.0, w)


def torus_point(coords) -> np.ndarray:
    return wrap(np.atleast_1d(np.asarray(coords, dtype=float)))


def torus_distance(p, q) -> np.ndarray:
    """Flat-torus Euclidean distance (broadcasts over leading axes)."""
    d = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    d = np.where(d > 0.5, 1.0 - d, d)
    return np.sqrt(np.sum(d * d, axis=-1))


# ---------------------------------------------------------------------------
# tau functions


@dataclass(frozen=True)
class IntegerStep:
    """Piecewise-constant tau of one base coordinate.

    ``values[i]`` applies on ``[breakpoints[i-1], breakpoints[i])`` with the
    conventions ``breakpoints[-1] = 0`` and ``breakpoints[len] = 1``.
    A nonzero mean is rejected unless ``allow_drift`` is set (drift is only
    useful as a control).
    """

    breakpoints: tuple
    values: tuple
    coord: int = 0
    allow_drift: bool = False

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        if len(vals) != len(bps) + 1:
            raise ValueError("need len(values) == len(breakpoints) + 1")
        if any(not 0.0 < b < 1.0 for b in bps) or any(b >= c for b, c in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing inside (0, 1)")
        if not self.allow_drift and abs(self.mean) > 1e-12:
            raise ValueError(f"tau must have zero mean, got {self.mean}")

    @property
    def mean(self) -> float:
        edges = (0.0,) + self.breakpoints + (1.0,)
        return math.fsum(v * (b - a) for v, a, b in zip(self.values, edges, edges[1:]))

    @property
    def is_degenerate(self) -> bool:
        return all(v == 0 for v in self.values)

    def table(self, coord_offset: int = 0) -> np.ndarray:
        m = len(self.breakpoints)
        return np.array([coord_offset + self.coord, m, *self.breakpoints, *self.values], dtype=float)

    kind = K.TAU_STEP

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        idx = np.searchsorted(np.asarray(self.breakpoints), y[..., self.coord], side="right")
        return np.asarray(self.values, dtype=float)[idx]


@dataclass(frozen=True)
class TrigPoly:
    """tau(y) = sum_k a_k cos(2 pi k y_c) + b_k sin(2 pi k y_c), k = 1..m (mean zero by construction)."""

    cos: tuple = ()
    sin: tuple = ()
    coord: int = 0

    def __post_init__(self):
        m = max(len(self.cos), len(self.sin))
        a = tuple(float(c) for c in self.cos) + (0.0,) * (m - len(self.cos))
        b = tuple(float(c) for c in self.sin) + (0.0,) * (m - len(self.sin))
        object.__setattr__(self, "cos", a)
        object.__setattr__(self, "sin", b)

    mean = 0.0
    kind = K.TAU_TRIG

    @property
    def is_degenerate(self) -> bool:
        return all(c == 0 for c in self.cos + self.sin)

    def table(self, coord_offset: int = 0) -> np.ndarray:
        return np.array([coord_offset + self.coord, len(self.cos), *self.cos, *self.sin], dtype=float)

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)[..., self.coord]
        out = np.zeros_like(y)
        for k, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
            out = out + a * np.cos(2 * np.pi * k * y) + b * np.sin(2 * np.pi * k * y)
        return out


TauSpec = Union[IntegerStep, TrigPoly]


# ---------------------------------------------------------------------------
# systems


def _int_matrix(m) -> tuple:
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(arr == np.round(arr)):
        raise ValueError("matrix must have integer entries")
    det = round(float(np.linalg.det(arr.astype(float))))
    if det not in (1, -1):
        raise ValueError(f"matrix must have determinant +-1, got {det}")
    return tuple(tuple(int(v) for v in row) for row in arr)


def _inverse_int(m: tuple) -> np.ndarray:
    inv = np.linalg.inv(np.asarray(m, dtype=float))
    return np.round(inv)


class System:
    """Base class; subclasses are frozen dataclasses."""

    dim: int

    def lower(self, off: int, ops: list, fp: list) -> None:
        raise NotImplementedError

    @property
    def fiber_dim(self) -> int | None:
        return None


def _push(fp: list, values) -> int:
    p = len(fp)
    fp.extend(float(v) for v in np.ravel(values))
    return p


@dataclass(frozen=True)
class Rotation(System):
    alpha: tuple

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "alpha", tuple(float(v) for v in a))

    @property
    def dim(self) -> int:
        return len(self.alpha)

    def lower(self, off, ops, fp):
        ops.append((K.ROT, off, self.dim, _push(fp, self.alpha), 0, 0))


@dataclass(frozen=True)
class SkewShift(System):
    """(x, y) -> (x + alpha, y + x) on the 2-torus."""

    alpha: float

    dim = 2

    def lower(self, off, ops, fp):
        ops.append((K.SKEW, off, 2, _push(fp, [self.alpha]), 0, 0))


@dataclass(frozen=True)
class ToralAuto(System):
    matrix: tuple

    def __post_init__(self):
        object.__setattr__(self, "matrix", _int_matrix(self.matrix))

    @property
    def dim(self) -> int:
        return len(self.matrix)

    def lower(self, off, ops, fp):
        ops.append((K.AUTO, off, self.dim, _push(fp, self.matrix), 0, 0))


CAT_MATRIX = ((2, 1), (1, 1))


@dataclass(frozen=True)
class Doubling(System):
    """x -> 2x mod 1.

    Iterating 2x mod 1 exactly on a double loses one significant bit per
    step and lands on 0 after at most 53 steps, so every long orbit would be
    degenerate.  The map is realized on the 2**-52 lattice instead, with the
    vacated low bit refilled from a hash of the current state.  The result
    is a deterministic 2**-52 pseudo-orbit; the doubling map is expanding,
    so such pseudo-orbits are shadowed by genuine orbits.
    """

    dim = 1

    def lower(self, off, ops, fp):
        ops.append((K.DOUB, off, 1, 0, 0, 0))


@dataclass(frozen=True)
class TranslationFlow:
    """G_t(x) = x + t * beta."""

    beta: tuple

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(v) for v in np.atleast_1d(self.beta)))

    @property
    def dim(self) -> int:
        return len(self.beta)


@dataclass(frozen=True)
class AutomorphismPowers:
    """G_t(x) = M^t x for integer t."""

    matrix: tuple

    def __post_init__(self):
        object.__setattr__(self, "matrix", _int_matrix(self.matrix))

    @property
    def dim(self) -> int:
        return len(self.matrix)


@dataclass(frozen=True)
class Product(System):
    """Direct product T x R acting on (x, y)."""

    fiber: System
    base: System

    @property
    def dim(self) -> int:
        return self.fiber.dim + self.base.dim

    @property
    def fiber_dim(self) -> int:
        return self.fiber.dim

    def lower(self, off, ops, fp):
        self.fiber.lower(off, ops, fp)
        self.base.lower(off + self.fiber.dim, ops, fp)


@dataclass(frozen=True)
class SkewProduct(System):
    """S(x, y) = (G_{tau(y)}(x), R(y))."""

    family: Union[TranslationFlow, AutomorphismPowers]
    tau: TauSpec
    base: System

    def __post_init__(self):
        if isinstance(self.family, AutomorphismPowers) and not isinstance(self.tau, IntegerStep):
            raise ValueError("integer powers of an automorphism need an integer-valued tau")
        if self.tau.coord >= self.base.dim:
            raise ValueError("tau coordinate outside the base")

    @property
    def dim(self) -> int:
        return self.family.dim + self.base.dim

    @property
    def fiber_dim(self) -> int:
        return self.family.dim

    def lower(self, off, ops, fp):
        dx = self.family.dim
        tp = _push(fp, self.tau.table(off + dx))
        # fiber op reads the base before the base moves
        if isinstance(self.family, TranslationFlow):
            ops.append((K.FTRANS, off, dx, _push(fp, self.family.beta), self.tau.kind, tp))
        else:
            m = np.asarray(self.family.matrix, dtype=float)
            p = _push(fp, m)
            _push(fp, _inverse_int(self.family.matrix))
            ops.append((K.FPOW, off, dx, p, self.tau.kind, tp))
        self.base.lower(off + dx, ops, fp)


@lru_cache(maxsize=256)
def compile_system(system: System):
    ops: list = []
    fp: list = []
    system.lower(0, ops, fp)
    return np.asarray(ops, dtype=np.int64).reshape(-1, 6), np.asarray(fp + [0.0], dtype=float)


@lru_cache(maxsize=256)
def system_kernel(system: System):
    """(compiled step function, parameter table) for a system."""
    ops, fp = compile_system(system)
    return G.step_function(ops, fp, system.dim), fp


def _as_batch(p, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(p, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {np.shape(p)}")
    return np.ascontiguousarray(wrap(arr)), single


def iterate(system: System, p, n: int) -> np.ndarray:
    """n-th forward image of a point (or a batch of points)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    pts, single = _as_batch(p, system.dim)
    step, fp = system_kernel(system)
    out = K.advance(step, fp, pts, int(n))
    return out[0] if single else out


def iterate_fiber(system: System, x, y, n: int) -> np.ndarray:
    """T^n_y(x): the fiber part of S^n(x, y)."""
    dx = system.fiber_dim
    if dx is None:
        raise ValueError(f"{type(system).__name__} has no fiber structure")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape[-1] != dx or y.shape[-1] != system.dim - dx:
        raise ValueError("x / y dimensions do not match the system")
    state = np.concatenate([x, y], axis=-1)
    return iterate(system, state, n)[..., :dx]


def tau_ergodic_sum(tau: TauSpec, base: System, y, n) -> np.ndarray | float:
    """tau_n(y) = sum_{j<n} tau(R^j y); ``n`` may be an int or a sorted array of checkpoints."""
    pts, single = _as_batch(y, base.dim)
    step, fp = system_kernel(base)
    checkpoints = np.atleast_1d(np.asarray(n, dtype=np.int64))
    if np.any(checkpoints < 0) or np.any(np.diff(checkpoints) < 0):
        raise ValueError("checkpoints must be nonnegative and sorted")
    table = tau.table(0)
    out = K.ergodic_sums(step, fp, G.tau_function(table, tau.kind), table, pts, checkpoints)
    if np.ndim(n) == 0:
        out = out[:, 0]
        return float(out[0]) if single else out
    return out[0] if single else out


# ---------------------------------------------------------------------------
# targets

_RADIUS_CAP = 0.25


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


class Target:
    dim: int

    def measure(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Ball(Target):
    """Closed flat-torus ball."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in torus_point(self.center)))
        if not 0.0 < self.radius < _RADIUS_CAP:
            raise UnsupportedGeometry(f"ball radius must lie in (0, 1/4), got {self.radius}")

    @property
    def dim(self) -> int:
        return len(self.center)

    def measure(self) -> float:
        return unit_ball_volume(self.dim) * self.radius**self.dim


@dataclass(frozen=True)
class Box(Target):
    """Closed box: per-coordinate torus distance <= halfwidth (halfwidths up to 1/4)."""

    center: tuple
    halfwidths: tuple

    def __post_init__(self):
        c = torus_point(self.center)
        hw = np.broadcast_to(np.asarray(self.halfwidths, dtype=float), c.shape)
        object.__setattr__(self, "center", tuple(float(v) for v in c))
        object.__setattr__(self, "halfwidths", tuple(float(v) for v in hw))
        if any(not 0.0 < h <= _RADIUS_CAP for h in self.halfwidths):
            raise UnsupportedGeometry(f"box halfwidths must lie in (0, 1/4], got {self.halfwidths}")

    @property
    def dim(self) -> int:
        return len(self.center)

    def measure(self) -> float:
        return float(np.prod([2.0 * h for h in self.halfwidths]))


@dataclass(frozen=True)
class FullSpace(Target):
    """The whole torus (stand-in for 'no constraint on this factor')."""

    dim: int

    def measure(self) -> float:
        return 1.0


def _separated(a: Target, b: Target) -> bool:
    if isinstance(a, FullSpace) or isinstance(b, FullSpace):
        return False
    ca, cb = np.asarray(a.center), np.asarray(b.center)
    if isinstance(a, Ball) and isinstance(b, Ball):
        return float(torus_distance(ca, cb)) > a.radius + b.radius
    ha = np.full(a.dim, a.radius) if isinstance(a, Ball) else np.asarray(a.halfwidths)
    hb = np.full(b.dim, b.radius) if isinstance(b, Ball) else np.asarray(b.halfwidths)
    d = np.abs(ca - cb)
    d = np.where(d > 0.5, 1.0 - d, d)
    return bool(np.any(d > ha + hb))


@dataclass(frozen=True)
class LabeledUnion(Target):
    """Disjoint union of products of simple targets; component k has label k (1-based).

    Each component is a tuple of factor targets laid out on consecutive
    coordinates, e.g. ``(A_k,)`` on one space or ``(A_k, B_k)`` on X x Y.
    The last factors must be pairwise disjoint.
    """

    components: tuple
    check_disjoint: bool = field(default=True, compare=False)

    def __post_init__(self):
        comps = tuple(tuple(c) if isinstance(c, (tuple, list)) else (c,) for c in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("LabeledUnion needs at least one component")
        dims = {tuple(f.dim for f in c) for c in comps}
        if len(dims) != 1:
            raise ValueError("all components must share the factor layout")
        for c in comps:
            for f in c:
                if isinstance(f, LabeledUnion):
                    raise ValueError("nested unions are not supported")
        if self.check_disjoint:
            last = [c[-1] for c in comps]
            for i in range(len(last)):
                for j in range(i + 1, len(last)):
                    if not _separated(last[i], last[j]):
                        raise ValueError(f"components {i + 1} and {j + 1} are not disjoint")

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.components[0])

    @property
    def K(self) -> int:
        return len(self.components)

    def component_measure(self, k: int) -> float:
        return float(np.prod([f.measure() for f in self.components[k - 1]]))

    def measure(self) -> float:
        return math.fsum(self.component_measure(k) for k in range(1, self.K + 1))


def rectangle(a: Target, b: Target) -> LabeledUnion:
    return LabeledUnion(((a, b),), check_disjoint=False)


def _prim_rows(t: Target, clause: int, off: int, rows: list, tf: list) -> None:
    if isinstance(t, Ball):
        rows.append((clause, K.BALL, off, t.dim, _push(tf, list(t.center) + [t.radius])))
    elif isinstance(t, Box):
        rows.append((clause, K.BOX, off, t.dim, _push(tf, list(t.center) + list(t.halfwidths))))
    elif isinstance(t, FullSpace):
        rows.append((clause, K.FULL, off, t.dim, 0))
    else:
        raise TypeError(f"not a simple target: {t!r}")


@lru_cache(maxsize=256)
def compile_target(t: Target, offset: int = 0):
    """Lower a target to (rows, clause starts, params); labels are clause numbers."""
    rows: list = []
    tf: list = []
    comps = t.components if isinstance(t, LabeledUnion) else ((t,),)
    starts = [0]
    for c, comp in enumerate(comps, start=1):
        off = offset
        for f in comp:
            _prim_rows(f, c, off, rows, tf)
            off += f.dim
        starts.append(len(rows))
    return (
        np.asarray(rows, dtype=np.int64).reshape(-1, 5),
        np.asarray(starts, dtype=np.int64),
        np.asarray(tf + [0.0], dtype=float),
    )


@lru_cache(maxsize=256)
def target_kernel(t: Target, offset: int = 0):
    """(label function, clause function, parameter table) for a target placed at ``offset``."""
    ti, cs, tf = compile_target(t, offset)
    label, clause = G.target_functions(ti, cs)
    return label, clause, tf


def target_measure(t: Target) -> float:
    return t.measure()


def target_labels(t: Target, points) -> np.ndarray:
    """Label hit by each point (0 when outside)."""
    pts, _ = _as_batch(points, t.dim)
    label, _, tf = target_kernel(t)
    return K.labels_batch(label, tf, pts)


def target_contains(t: Target, p):
    """Membership of one point; a LabeledUnion also reports the label (or None)."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.shape != (t.dim,):
        raise ValueError(f"point of dimension {p.shape} for target of dimension {t.dim}")
    lab = int(target_labels(t, p[None, :])[0])
    if isinstance(t, LabeledUnion):
        return (lab > 0, lab if lab else None)
    return lab > 0


# ---------------------------------------------------------------------------
# sampling

REJECTION_CANDIDATES = 64


def sample_points(dim: int, rng: RngStream, count: int, start: int = 0) -> np.ndarray:
    """Uniform points for sample indices start..start+count-1."""
    return rng.uniform_block(start, count, dim).copy()


def sample_point(dim: int, rng: RngStream, index: int = 0) -> np.ndarray:
    return sample_points(dim, rng, 1, index)[0]


def _halfwidths(t: Target) -> np.ndarray:
    if isinstance(t, Ball):
        return np.full(t.dim, t.radius)
    if isinstance(t, Box):
        return np.asarray(t.halfwidths)
    return np.full(t.dim, 0.5)


def _center(t: Target) -> np.ndarray:
    return np.full(t.dim, 0.5) if isinstance(t, FullSpace) else np.asarray(t.center)


def _sample_factor(t: Target, u: np.ndarray) -> np.ndarray:
    """u has shape (count, CANDIDATES * dim)."""
    n = u.shape[0]
    c, h = _center(t), _halfwidths(t)
    if not isinstance(t, Ball):
        return wrap(c + (2.0 * u[:, : t.dim] - 1.0) * h)
    cand = c + (2.0 * u.reshape(n, REJECTION_CANDIDATES, t.dim) - 1.0) * h
    ok = np.sum((cand - c) ** 2, axis=-1) <= t.radius**2
    if not np.all(ok.any(axis=1)):
        raise SamplingError(f"no candidate accepted within {REJECTION_CANDIDATES} draws")
    first = np.argmax(ok, axis=1)
    return wrap(cand[np.arange(n), first])


def sample_in_target_batch(t: Target, rng: RngStream, count: int, start: int = 0) -> np.ndarray:
    """Uniform samples from a target, addressed by sample index.

    Balls use rejection from the bounding box with a fixed budget of
    ``REJECTION_CANDIDATES`` candidates per sample, so each sample consumes a
    fixed slice of the stream.  Unions pick a component with probability
    proportional to its measure.
    """
    comps = t.components if isinstance(t, LabeledUnion) else ((t,),)
    per_factor = [REJECTION_CANDIDATES * f.dim for f in comps[0]]
    width = 1 + sum(per_factor)
    u = rng.uniform_block(start, count, width)
    weights = np.array([math.prod(f.measure() for f in c) for c in comps])
    cum = np.cumsum(weights / weights.sum())
    which = np.minimum(np.searchsorted(cum, u[:, 0], side="right"), len(comps) - 1)
    out = np.empty((count, t.dim))
    for k, comp in enumerate(comps):
        sel = which == k
        if not sel.any():
            continue
        col, off = 1, 0
        for f, w in zip(comp, per_factor):
            out[sel, off : off + f.dim] = _sample_factor(f, u[sel, col : col + w])
            col += w
            off += f.dim
    return out


def sample_in_target(t: Target, rng: RngStream, index: int = 0) -> np.ndarray:
    return sample_in_target_batch(t, rng, 1, index)[0]


# ---------------------------------------------------------------------------
# diophantine certificate


@dataclass(frozen=True)
class DiophantineResult:
    ok: bool
    k: tuple | None = None
    l: int | None = None
    margin: float = math.inf  # min over k of |<k,a> - l| * |k|^n / C

    def __bool__(self) -> bool:
        return self.ok


def diophantine_check(alpha, C: float, n: float, K_max: int) -> DiophantineResult:
    """Check |<k, alpha> - l| > C |k|^-n for all 0 < |k|_inf <= K_max.

    Returns the worst violator (smallest ratio) when the check fails.
    """
    if K_max < 1:
        raise ValueError("K_max must be >= 1")
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    d = a.size
    axes = [np.arange(0, K_max + 1)] + [np.arange(-K_max, K_max + 1)] * (d - 1)
    grids = np.meshgrid(*axes, indexing="ij")
    ks = np.stack([g.ravel() for g in grids], axis=1)
    # one representative of each +-k pair: first nonzero coordinate positive
    nz = ks != 0
    first = np.argmax(nz, axis=1)
    keep = nz.any(axis=1) & (ks[np.arange(len(ks)), first] > 0)
    ks = ks[keep]
    dot = ks @ a
    l = np.rint(dot)
    dist = np.abs(dot - l)
    norm = np.max(np.abs(ks), axis=1).astype(float)
    ratio = dist * norm**n / C
    i = int(np.argmin(ratio))
    if ratio[i] > 1.0:
        return DiophantineResult(True, margin=float(ratio[i]))
    return DiophantineResult(False, tuple(int(v) for v in ks[i]), int(l[i]), float(ratio[i]))


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
