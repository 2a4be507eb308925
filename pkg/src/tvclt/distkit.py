"""One-dimensional laws as an atomic part plus a sampled density.

A ``MixtureDistribution`` carries a finite ``AtomicMeasure`` and an optional
``GridDensity``.  Masses live inside the parts; the a.c. weight of a law is
simply the mass of its density part.  Singular-continuous components cannot
be represented.

A ``GridDensity`` is piecewise linear on a uniform grid and zero outside
``[origin, origin + (size - 1) * step]``.  Jumps may sit on nodes, so sums of
shifted uniforms stay exact.  Its mass is the trapezoid rule, which is the
exact integral of the piecewise-linear function.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import GridTooCoarse, InvalidParameter, ZeroScale

DEFAULT_INTERVALS = 2**12
MIN_INTERVALS = 64
PRUNE_THRESHOLD = 1e-15
ATOM_TOL = 1e-12
TAIL_SIGMAS = 12.0


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridDensity:
    """Density samples at ``origin + i * step``.

    ``values[i]`` is the left limit at node ``i`` and ``right[i]`` the right
    limit; they differ only where the density jumps.  Grid interval ``i`` is
    the linear piece from ``right[i]`` to ``values[i + 1]``.  At the two end
    nodes both arrays hold the inside limit.  ``right`` defaults to
    ``values`` (continuous inside the support).
    """

    origin: float
    step: float
    values: np.ndarray
    right: np.ndarray | None = None
    mass: float = field(init=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or len(values) == 0:
            raise InvalidParameter("density values must be a nonempty 1-D array")
        right = values.copy() if self.right is None else np.array(self.right, dtype=np.float64)
        if right.shape != values.shape:
            raise InvalidParameter("right limits must match values in shape")
        if not self.step > 0:
            raise InvalidParameter(f"grid step must be positive, got {self.step}")
        for a in (values, right):
            if not np.all(np.isfinite(a)) or np.any(a < 0):
                raise InvalidParameter("density values must be finite and nonnegative")
        values[0] = right[0]
        right[-1] = values[-1]
        object.__setattr__(self, "origin", float(self.origin))
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "right", _readonly(right))
        object.__setattr__(self, "mass", float(self.node_weights().sum()))

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def hi(self) -> float:
        return self.origin + (self.size - 1) * self.step

    @property
    def grid(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.size)

    @property
    def has_jumps(self) -> bool:
        return bool(np.any(self.values != self.right))

    def node_weights(self) -> np.ndarray:
        """Trapezoid weights per node; they sum to the mass."""
        w = np.zeros(self.size)
        if self.size > 1:
            w[:-1] += self.right[:-1]
            w[1:] += self.values[1:]
        return 0.5 * self.step * w

    def node_values(self) -> np.ndarray:
        """One value per node, averaging the two limits at a jump."""
        return 0.5 * (self.values + self.right)

    def _locate(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.size == 1:
            return x, np.zeros(x.shape, dtype=np.int64), np.zeros(x.shape)
        u = (x - self.origin) / self.step
        i = np.clip(np.floor(u), 0, self.size - 2).astype(np.int64)
        t = np.clip(u - i, 0.0, 1.0)
        return x, i, t

    def evaluate(self, x) -> np.ndarray:
        """Right-continuous value at ``x``; zero outside the support."""
        x, i, t = self._locate(x)
        if self.size == 1:
            return np.where(x == self.origin, self.values[0], 0.0)
        out = (1 - t) * self.right[i] + t * self.values[i + 1]
        return np.where((x < self.origin) | (x > self.hi), 0.0, out)

    def evaluate_left(self, x) -> np.ndarray:
        """Left-continuous value at ``x``; zero outside the support."""
        x, i, t = self._locate(x)
        if self.size == 1:
            return np.where(x == self.origin, self.values[0], 0.0)
        out = (1 - t) * self.right[i] + t * self.values[i + 1]
        on_node = (t == 0.0) & (i > 0)
        out = np.where(on_node, self.values[i], out)
        return np.where((x < self.origin) | (x > self.hi), 0.0, out)

    def scaled(self, factor: float) -> GridDensity:
        return GridDensity(self.origin, self.step, self.values * factor, self.right * factor)

    def end_jumps(self) -> float:
        return float(self.values[0] + self.values[-1])

    def slope_changes(self) -> float:
        """Total absolute change of slope across interior nodes, times ``step``."""
        if self.size < 3:
            return 0.0
        slopes = self.values[1:] - self.right[:-1]
        return float(np.abs(np.diff(slopes)).sum())

    def jump_total(self) -> float:
        return float(np.abs(self.right - self.values).sum())

    def interpolation_error(self) -> float:
        """Estimate of the L1 gap between this interpolant and a smooth density.

        Uses ``h**2/8 * int |f''|`` with slope changes standing in for
        ``h * f''``.  Jumps sit on nodes and are represented exactly.
        """
        return self.step * self.slope_changes() / 8.0

    def trimmed(self) -> GridDensity:
        """Drop zero samples at both ends, keeping one zero node on each side."""
        nz = np.flatnonzero((self.values != 0) | (self.right != 0))
        if len(nz) == 0:
            return self
        i0 = max(nz[0] - 1, 0)
        i1 = min(nz[-1] + 1, self.size - 1)
        if i0 == 0 and i1 == self.size - 1:
            return self
        return self.window(i0, i1)

    def window(self, i0: int, i1: int) -> GridDensity:
        """Restriction to nodes ``i0..i1`` inclusive."""
        return GridDensity(
            self.origin + i0 * self.step, self.step, self.values[i0 : i1 + 1], self.right[i0 : i1 + 1]
        )


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely many point masses, sorted, merged and pruned on construction.

    ``pruned`` is mass removed by the prune threshold; it is still counted in
    ``total`` since it belongs to the singular part even though its locations
    are no longer listed.
    """

    locations: np.ndarray
    masses: np.ndarray
    pruned: float = 0.0

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=np.float64).ravel()
        mass = np.asarray(self.masses, dtype=np.float64).ravel()
        if loc.shape != mass.shape:
            raise InvalidParameter("atom locations and masses differ in length")
        if not (np.all(np.isfinite(loc)) and np.all(np.isfinite(mass))):
            raise InvalidParameter("atoms must be finite")
        if np.any(mass < 0):
            raise InvalidParameter("atom masses must be nonnegative")
        loc, mass = merge_atoms(loc, mass)
        keep = mass > PRUNE_THRESHOLD
        pruned = float(self.pruned) + float(mass[~keep].sum())
        object.__setattr__(self, "locations", _readonly(loc[keep]))
        object.__setattr__(self, "masses", _readonly(mass[keep]))
        object.__setattr__(self, "pruned", pruned)
        if self.total > 1 + 1e-12:
            raise InvalidParameter(f"atomic mass {self.total} exceeds 1")

    @classmethod
    def empty(cls) -> AtomicMeasure:
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def from_pairs(cls, pairs) -> AtomicMeasure:
        pairs = list(pairs)
        if not pairs:
            return cls.empty()
        loc, mass = zip(*pairs)
        return cls(np.array(loc), np.array(mass))

    @property
    def total(self) -> float:
        return float(self.masses.sum()) + self.pruned

    @property
    def size(self) -> int:
        return len(self.locations)

    def __len__(self):
        return self.size

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.locations.tolist(), self.masses.tolist()))

    def scaled(self, factor: float) -> AtomicMeasure:
        return AtomicMeasure(self.locations, self.masses * factor, self.pruned * factor)


def merge_atoms(loc: np.ndarray, mass: np.ndarray, tol: float = ATOM_TOL):
    """Sort atoms and merge runs whose consecutive gaps are within ``tol``."""
    if len(loc) == 0:
        return loc, mass
    order = np.argsort(loc, kind="stable")
    loc, mass = loc[order], mass[order]
    starts = np.concatenate(([True], np.diff(loc) > tol))
    idx = np.flatnonzero(starts)
    merged_mass = np.add.reduceat(mass, idx)
    # mass-weighted location keeps the mean exact when near-duplicates merge
    wsum = np.add.reduceat(loc * mass, idx)
    merged_loc = np.where(merged_mass > 0, wsum / np.where(merged_mass > 0, merged_mass, 1), loc[idx])
    return merged_loc, merged_mass


@dataclass(frozen=True)
class MixtureDistribution:
    atomic: AtomicMeasure = field(default_factory=AtomicMeasure.empty)
    density: GridDensity | None = None
    error_budget: float = 0.0

    def __post_init__(self):
        if self.density is not None and self.density.mass == 0 and not np.any(self.density.values):
            object.__setattr__(self, "density", None)
        if self.error_budget < 0:
            raise InvalidParameter("error budget must be nonnegative")

    @property
    def mass(self) -> float:
        return self.atomic.total + self.ac_weight

    @property
    def ac_weight(self) -> float:
        return 0.0 if self.density is None else self.density.mass

    @property
    def is_atomic(self) -> bool:
        return self.density is None

    def support(self) -> tuple[float, float]:
        lo, hi = math.inf, -math.inf
        if self.atomic.size:
            lo, hi = self.atomic.locations[0], self.atomic.locations[-1]
        if self.density is not None:
            lo, hi = min(lo, self.density.origin), max(hi, self.density.hi)
        return float(lo), float(hi)

    def with_budget(self, extra: float) -> MixtureDistribution:
        return MixtureDistribution(self.atomic, self.density, self.error_budget + max(extra, 0.0))

    def scaled(self, factor: float) -> MixtureDistribution:
        density = None if self.density is None else self.density.scaled(factor)
        return MixtureDistribution(self.atomic.scaled(factor), density, self.error_budget * factor)


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    abs_third: float | None = None

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


class Classification(str, enum.Enum):
    SINGULAR = "singular"
    NON_SINGULAR = "non_singular"


def moments(F: MixtureDistribution) -> MomentSummary:
    """Mean, variance and central absolute third moment.

    Atoms are summed exactly; the density part uses the trapezoid rule on its
    own grid.  Moments are normalized by the total mass of ``F``.
    """
    total = F.mass
    if total <= 0:
        raise InvalidParameter("cannot take moments of the zero measure")
    loc, w = F.atomic.locations, F.atomic.masses
    if F.density is not None:
        loc = np.concatenate((loc, F.density.grid))
        w = np.concatenate((w, F.density.node_weights()))
    mean = float(np.dot(w, loc) / total)
    dev = loc - mean
    var = float(np.dot(w, dev * dev) / total)
    third = float(np.dot(w, np.abs(dev) ** 3) / total)
    return MomentSummary(mean, max(var, 0.0), third)


def classify(F: MixtureDistribution) -> Classification:
    return Classification.NON_SINGULAR if F.ac_weight > 0 else Classification.SINGULAR


def affine(F: MixtureDistribution, scale: float, shift: float) -> MixtureDistribution:
    """Law of ``scale * X + shift``; grids and atoms are mapped exactly."""
    if scale == 0:
        raise ZeroScale("affine scale must be nonzero")
    atomic = AtomicMeasure(F.atomic.locations * scale + shift, F.atomic.masses, F.atomic.pruned)
    density = None
    if F.density is not None:
        d = F.density
        if scale > 0:
            density = GridDensity(scale * d.origin + shift, scale * d.step, d.values / scale, d.right / scale)
        else:
            # reflection swaps left and right limits
            density = GridDensity(scale * d.hi + shift, -scale * d.step, d.right[::-1] / -scale, d.values[::-1] / -scale)
    return MixtureDistribution(atomic, density, F.error_budget)


def standardize(F: MixtureDistribution) -> MixtureDistribution:
    """Affine image with mean 0 and variance 1."""
    m = moments(F)
    if m.variance <= 0:
        raise InvalidParameter("cannot standardize a degenerate law")
    return affine(F, 1.0 / m.sd, -m.mean / m.sd)


def resample(g: GridDensity, step: float, anchor: float) -> tuple[GridDensity, float]:
    """Re-sample ``g`` on the lattice ``anchor + k * step`` covering its support.

    Returns the new density and its mass-type error: the change of mass plus
    half a step per unit of jump that does not land on a new node.  Jumps
    that land on new nodes are kept exactly.
    """
    eps = 1e-9
    k0 = math.floor((g.origin - anchor) / step + eps)
    k1 = math.ceil((g.hi - anchor) / step - eps)
    x = anchor + step * np.arange(k0, k1 + 1)
    lo_hit = abs(x[0] - g.origin) <= eps * step
    hi_hit = abs(x[-1] - g.hi) <= eps * step
    if lo_hit:
        x[0] = g.origin
    if hi_hit:
        x[-1] = g.hi
    left = g.evaluate_left(x)
    right = g.evaluate(x)
    if lo_hit:
        left[0] = right[0] = g.right[0]
    if hi_hit:
        left[-1] = right[-1] = g.values[-1]
    out = GridDensity(x[0], step, left, right)
    # mass-type error only: smooth interpolation error is reported by
    # interpolation_error() on the grid a distance is finally taken on
    err = abs(out.mass - g.mass)
    jump_nodes = np.flatnonzero(g.right != g.values)
    if len(jump_nodes):
        pos = (g.origin + jump_nodes * g.step - anchor) / step
        off = np.abs(pos - np.round(pos)) > eps
        err += step * float(np.abs(g.right - g.values)[jump_nodes][off].sum()) / 2
    if not lo_hit:
        err += step * g.values[0] / 2
    if not hi_hit:
        err += step * g.values[-1] / 2
    return out, err


def _abs_linear_integral(da: np.ndarray, db: np.ndarray, width: np.ndarray) -> np.ndarray:
    """Exact integral of |linear| over intervals with end values ``da``, ``db``."""
    same = da * db >= 0
    absum = np.abs(da) + np.abs(db)
    cross = np.divide(da * da + db * db, absum, out=np.zeros_like(absum), where=absum > 0)
    return width * np.where(same, 0.5 * absum, 0.5 * cross)


def l1_distance(f: GridDensity | None, g: GridDensity | None) -> float:
    """Exact L1 distance between two piecewise-linear densities on any grids.

    Both are linear between consecutive points of the union of their grids,
    so the integral of the absolute difference is exact per union interval.
    """
    if f is None and g is None:
        return 0.0
    if f is None or g is None:
        return (g or f).mass
    t = np.unique(np.concatenate((f.grid, g.grid)))
    if len(t) < 2:
        return 0.0
    a, b = t[:-1], t[1:]
    mid = 0.5 * (a + b)

    def ends(d):
        inside = (mid >= d.origin) & (mid <= d.hi)
        return np.where(inside, d.evaluate(a), 0.0), np.where(inside, d.evaluate_left(b), 0.0)

    fa, fb = ends(f)
    ga, gb = ends(g)
    return float(_abs_linear_integral(fa - ga, fb - gb, b - a).sum())


def add_on_lattice(parts: list[GridDensity]) -> GridDensity | None:
    """Sum densities that share one lattice, keeping every jump exact."""
    parts = [p for p in parts if p is not None]
    if not parts:
        return None
    if len(parts) == 1:
        return parts[0]
    h = parts[0].step
    lo = min(p.origin for p in parts)
    offs = [int(round((p.origin - lo) / h)) for p in parts]
    size = max(o + p.size for o, p in zip(offs, parts))
    left = np.zeros(size)
    right = np.zeros(size)
    for o, p in zip(offs, parts):
        # a part is zero left of its first node and right of its last node
        left[o + 1 : o + p.size] += p.values[1:]
        right[o : o + p.size - 1] += p.right[:-1]
    left[0] = right[0]
    right[-1] = left[-1]
    return GridDensity(lo, h, left, right)


def _ac_family(lo: float, hi: float, pdf, intervals: int, budget: float = 0.0) -> MixtureDistribution:
    intervals = int(intervals)
    if intervals < MIN_INTERVALS:
        raise GridTooCoarse(f"need at least {MIN_INTERVALS} grid intervals, got {intervals}")
    x = np.linspace(lo, hi, intervals + 1)
    step = (hi - lo) / intervals
    return MixtureDistribution(density=GridDensity(lo, step, pdf(x)), error_budget=budget)


def uniform(lo: float = 0.0, hi: float = 1.0, intervals: int = DEFAULT_INTERVALS) -> MixtureDistribution:
    if not hi > lo:
        raise InvalidParameter(f"uniform needs lo < hi, got ({lo}, {hi})")
    return _ac_family(lo, hi, lambda x: np.full_like(x, 1.0 / (hi - lo)), intervals)


def triangular(a: float = 1.0, center: float = 0.0, intervals: int = DEFAULT_INTERVALS) -> MixtureDistribution:
    """Symmetric tent density of half-width ``a`` (peak ``1/a`` at ``center``)."""
    if not a > 0:
        raise InvalidParameter(f"triangular half-width must be positive, got {a}")
    if intervals % 2:
        raise InvalidParameter("triangular grids need an even interval count so the peak is a node")

    def pdf(x):
        return np.clip((1.0 - np.abs(x - center) / a) / a, 0.0, None)

    return _ac_family(center - a, center + a, pdf, intervals)


def gaussian(mean: float = 0.0, sd: float = 1.0, intervals: int = DEFAULT_INTERVALS) -> MixtureDistribution:
    """Normal law truncated to ``mean +- 12 sd``; the cut tail mass is charged."""
    if not sd > 0:
        raise InvalidParameter(f"gaussian sd must be positive, got {sd}")
    tail = 2.0 * float(ndtr(-TAIL_SIGMAS))

    def pdf(x):
        z = (x - mean) / sd
        return np.exp(-0.5 * z * z) / (sd * math.sqrt(2 * math.pi))

    return _ac_family(mean - TAIL_SIGMAS * sd, mean + TAIL_SIGMAS * sd, pdf, intervals, tail)


def bernoulli(p: float = 0.5) -> MixtureDistribution:
    if not 0 <= p <= 1:
        raise InvalidParameter(f"bernoulli p must lie in [0, 1], got {p}")
    pairs = [(x, w) for x, w in ((0.0, 1.0 - p), (1.0, p)) if w > 0]
    return MixtureDistribution(AtomicMeasure.from_pairs(pairs))


def point_mass(c: float = 0.0) -> MixtureDistribution:
    return MixtureDistribution(AtomicMeasure.from_pairs([(c, 1.0)]))


def atomic_list(atoms) -> MixtureDistribution:
    atoms = [(float(x), float(p)) for x, p in atoms]
    if not atoms or any(p < 0 for _, p in atoms):
        raise InvalidParameter("atomic_list needs a nonempty list of nonnegative masses")
    total = sum(p for _, p in atoms)
    if total <= 0:
        raise InvalidParameter("atomic_list masses sum to zero")
    return MixtureDistribution(AtomicMeasure.from_pairs([(x, p / total) for x, p in atoms]))


def grid(origin: float, step: float, values) -> MixtureDistribution:
    d = GridDensity(origin, step, values)
    if d.mass <= 0:
        raise InvalidParameter("grid density has zero mass")
    return MixtureDistribution(density=d.scaled(1.0 / d.mass))


def mixture(components) -> MixtureDistribution:
    """Weighted sum of ``(weight, MixtureDistribution)`` pairs.

    Densities are summed on the lattice of the finest component; any
    interpolation this needs is charged to the error budget.
    """
    components = list(components)
    if not components:
        raise InvalidParameter("mixture needs at least one component")
    weights = np.array([w for w, _ in components], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise InvalidParameter(f"mixture weights must be nonnegative and sum to 1, got {weights.tolist()}")
    loc, mass, pruned, budget = [], [], 0.0, 0.0
    dens = []
    for w, F in components:
        loc.append(F.atomic.locations)
        mass.append(F.atomic.masses * w)
        pruned += F.atomic.pruned * w
        budget += F.error_budget * w
        if F.density is not None and w > 0:
            dens.append(F.density.scaled(w))
    atomic = AtomicMeasure(np.concatenate(loc), np.concatenate(mass), pruned)
    density, err = combine_densities(dens)
    return MixtureDistribution(atomic, density, budget + err)


def combine_densities(dens: list[GridDensity]) -> tuple[GridDensity | None, float]:
    """Sum densities on the lattice of the finest one."""
    if not dens:
        return None, 0.0
    if len(dens) == 1:
        return dens[0], 0.0
    base = min(dens, key=lambda d: d.step)
    parts, err = [], 0.0
    for d in dens:
        r, e = resample(d, base.step, base.origin)
        parts.append(r)
        err += e
    return add_on_lattice(parts), err


FAMILIES = ("uniform", "triangular", "gaussian", "bernoulli", "atom", "atomic_list", "grid", "mixture")


def make_family(name: str, **params) -> MixtureDistribution:
    """Build a named family; ``mixture`` takes ``components=[(w, spec_or_dist), ...]``."""
    try:
        if name == "uniform":
            return uniform(**params)
        if name == "triangular":
            return triangular(**params)
        if name == "gaussian":
            return gaussian(**params)
        if name == "bernoulli":
            return bernoulli(**params)
        if name == "atom":
            return point_mass(**params)
        if name == "atomic_list":
            return atomic_list(**params)
        if name == "grid":
            return grid(**params)
        if name == "mixture":
            comps = []
            for c in params.pop("components"):
                if isinstance(c, dict):
                    w, spec = c["weight"], c["spec"]
                else:
                    w, spec = c
                comps.append((w, spec if isinstance(spec, MixtureDistribution) else from_spec(spec)))
            if params:
                raise TypeError(f"unexpected mixture parameters {sorted(params)}")
            return mixture(comps)
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for {name!r}: {exc}") from exc
    raise InvalidParameter(f"unknown family {name!r}; expected one of {', '.join(FAMILIES)}")


def from_spec(spec: dict) -> MixtureDistribution:
    """Build from the JSON form ``{"family": ..., "params": {...}}``."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise InvalidParameter("distribution spec must be an object with a 'family' key")
    params = dict(spec.get("params") or {})
    return make_family(spec["family"], **params)
