"""Octree workspace, cross-sections, scalar field maps and t-connectivity."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .analysis import psi_arrays
from .kinematics import ik_arrays, isotropic_point, jacobian_arrays, leg_points, working_mode_sign
from .model import MachineGeometry

UNREACHABLE = 1
JOINT_LIMIT = 2
PSI_LOW = 4
PSI_HIGH = 8
SERIAL_MARGIN = 16
PARALLEL_MARGIN = 32

REASON_NAMES = {
    UNREACHABLE: "unreachable",
    JOINT_LIMIT: "joint_limit",
    PSI_LOW: "psi_below_bound",
    PSI_HIGH: "psi_above_bound",
    SERIAL_MARGIN: "serial_margin",
    PARALLEL_MARGIN: "parallel_margin",
}

INSIDE, OUTSIDE, BOUNDARY = 1, 0, 2
LABEL_NAMES = {INSIDE: "inside", OUTSIDE: "outside", BOUNDARY: "boundary"}

CHUNK = 65536


def reason_list(code: int) -> list[str]:
    return [name for bit, name in REASON_NAMES.items() if code & bit]


@dataclass(frozen=True)
class PointPredicate:
    """Feasibility test for platform points.

    A point is feasible when the default-branch IK exists and, as enabled,
    the joints are within limits, every amplification factor lies within
    ``psi_bounds``, ``min |eta_i| >= min_eta`` and ``|det A| >= min_detA``.
    Margins default to ``1e-6 L`` and ``1e-6 L^3``.

    ``det A`` must also carry ``assembly_sign``, the sign it has at the
    isotropic point: points of the other assembly mode sit behind a parallel
    singularity and cannot be reached from the working mode. The sign is
    derived from the geometry when left as None (0 disables the check).
    """

    geom: MachineGeometry
    require_joint_limits: bool = True
    psi_bounds: tuple[float, float] | None = (1.0 / 3.0, 3.0)
    min_eta: float | None = None
    min_detA: float | None = None
    assembly_sign: int | None = None
    threads: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.psi_bounds is not None:
            lo, hi = self.psi_bounds
            if not (0 <= lo < hi):
                raise ValueError(f"psi bounds must satisfy 0 <= lo < hi, got {self.psi_bounds}")
        L = self.geom.leg_length
        if self.min_eta is None:
            object.__setattr__(self, "min_eta", 1e-6 * L)
        if self.min_detA is None:
            object.__setattr__(self, "min_detA", 1e-6 * L**3)
        if self.assembly_sign is None:
            object.__setattr__(self, "assembly_sign", working_mode_sign(self.geom))
        if self.min_eta < 0 or self.min_detA < 0:
            raise ValueError("singularity margins must be non-negative")

    def reasons(self, points) -> np.ndarray:
        """Bitmask of failed checks per point (0 means feasible)."""
        P = np.asarray(points, dtype=float).reshape(-1, 3)
        if self.threads > 1 and len(P) > CHUNK:
            chunks = [P[k:k + CHUNK] for k in range(0, len(P), CHUNK)]
            with ThreadPoolExecutor(self.threads) as pool:
                return np.concatenate(list(pool.map(self._reasons, chunks)))
        return self._reasons(P)

    def _reasons(self, P: np.ndarray) -> np.ndarray:
        geom = self.geom
        code = np.zeros(len(P), dtype=np.int64)
        rho, slack = ik_arrays(geom, P)
        reach = np.all(slack >= 0, axis=1)
        code[~reach] |= UNREACHABLE
        idx = np.nonzero(reach)[0]
        if idx.size == 0:
            return code
        rho = rho[idx]
        if self.require_joint_limits:
            lim = geom.limits
            out = np.any((rho < lim[:, 0]) | (rho > lim[:, 1]), axis=1)
            code[idx[out]] |= JOINT_LIMIT
        b, c = leg_points(geom, P[idx], rho)
        A, eta = jacobian_arrays(geom, b, c)
        code[idx[np.min(np.abs(eta), axis=1) < self.min_eta]] |= SERIAL_MARGIN
        if self.psi_bounds is not None:
            psi, det_A = psi_arrays(A, eta, 0.0)
            lo, hi = self.psi_bounds
            with np.errstate(invalid="ignore"):
                code[idx[~(psi[:, -1] >= lo)]] |= PSI_LOW
                code[idx[~(psi[:, 0] <= hi)]] |= PSI_HIGH
        else:
            det_A = np.linalg.det(A)
        signed = det_A * self.assembly_sign if self.assembly_sign else np.abs(det_A)
        code[idx[~(signed >= self.min_detA)]] |= PARALLEL_MARGIN
        return code

    def __call__(self, points) -> np.ndarray:
        return self.reasons(points) == 0

    def excluded(self, centers: np.ndarray, half: float) -> np.ndarray:
        """Cells provably infeasible: their bounding ball misses some leg's reach.

        Leg ``i`` can only reach points within ``L`` of its rail segment (the
        whole rail line when joint limits are ignored).
        """
        geom = self.geom
        radius = geom.leg_length + half * math.sqrt(3.0)
        out = np.zeros(len(centers), dtype=bool)
        for i, leg in enumerate(geom.legs):
            e = leg.axis_array
            q = centers + leg.offset_array - leg.anchor_array
            t = q @ e
            if self.require_joint_limits:
                lo, hi = geom.joint_limits[i]
                t = np.clip(t, lo, hi)
            d = np.linalg.norm(q - t[:, None] * e, axis=1)
            out |= d > radius
        return out


@dataclass(frozen=True)
class PointResult:
    feasible: bool
    reasons: list[str]


def evaluate_point(pred: PointPredicate, p) -> PointResult:
    code = int(pred.reasons(np.asarray(p, dtype=float).reshape(1, 3))[0])
    return PointResult(code == 0, reason_list(code))


# --- octree ----------------------------------------------------------------

_SAMPLE_OFFSETS = np.array(
    [(x, y, z) for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)]
    + [(0, 0, 0)]
    + [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)],
    dtype=float,
)
_CHILD_OFFSETS = np.array([(x, y, z) for z in (0, 1) for y in (0, 1) for x in (0, 1)], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class OctreeWorkspace:
    """Leaf cells of an octree decomposition.

    Leaf ``k`` has integer index ``index[k]`` on the ``2**depth[k]`` lattice
    of the root cube and label ``label[k]`` (INSIDE, OUTSIDE, BOUNDARY).
    """

    center: np.ndarray
    half_side: float
    max_depth: int
    depth: np.ndarray
    index: np.ndarray
    label: np.ndarray
    volume_lower: float
    volume_upper: float
    evaluations: int = 0

    def cell_half_sides(self) -> np.ndarray:
        return self.half_side / (2.0 ** self.depth)

    def cell_centers(self) -> np.ndarray:
        side = 2.0 * self.cell_half_sides()
        lo = self.center - self.half_side
        return lo[None] + (self.index + 0.5) * side[:, None]

    def counts(self) -> dict[str, int]:
        return {LABEL_NAMES[k]: int(np.sum(self.label == k)) for k in (INSIDE, BOUNDARY, OUTSIDE)}


def default_root_box(geom: MachineGeometry):
    """Cube of half-side 1.5 L around the isotropic point."""
    try:
        center, _ = isotropic_point(geom)
    except ValueError:
        center = np.zeros(3)
    return np.asarray(center, dtype=float), 1.5 * geom.leg_length


def compute_octree(pred, root_box=None, max_depth: int = 6) -> OctreeWorkspace:
    """Classify space into inside / outside / boundary cells.

    ``pred`` maps an (N, 3) array to a boolean mask; if it also has an
    ``excluded(centers, half)`` method, cells it rules out are labelled
    outside without further refinement. Each cell is probed at its 8 corners,
    centre and 6 face centres. A cell is inside when every probe is feasible
    and its depth is at least 2; outside when no probe is feasible and it is
    either excluded or at ``max_depth``; otherwise it is split, and at
    ``max_depth`` it becomes boundary.
    """
    if not (isinstance(max_depth, (int, np.integer)) and 1 <= max_depth <= 12):
        raise ValueError(f"max_depth must be an integer in [1, 12], got {max_depth!r}")
    if root_box is None:
        if not hasattr(pred, "geom"):
            raise ValueError("root_box required for a bare predicate")
        root_box = default_root_box(pred.geom)
    center, half = root_box
    center = np.asarray(center, dtype=float).reshape(3)
    half = float(half)
    if not (math.isfinite(half) and half > 0) or not np.all(np.isfinite(center)):
        raise ValueError("degenerate root box")
    excluded = getattr(pred, "excluded", None)
    lo = center - half

    idx = np.zeros((1, 3), dtype=np.int64)
    leaves_d, leaves_i, leaves_l = [], [], []
    evals = 0
    for depth in range(max_depth + 1):
        if len(idx) == 0:
            break
        h = half / 2**depth
        centers = lo[None] + (idx + 0.5) * (2.0 * h)
        samples = centers[:, None, :] + h * _SAMPLE_OFFSETS[None]
        ok = np.asarray(pred(samples.reshape(-1, 3)), dtype=bool).reshape(len(idx), -1)
        evals += samples.shape[0] * samples.shape[1]
        all_in = ok.all(axis=1)
        none_in = ~ok.any(axis=1)
        final = depth == max_depth
        inside = all_in & (depth >= 2)
        if final:
            outside = none_in
        else:
            outside = np.zeros(len(idx), dtype=bool)
            if excluded is not None and none_in.any():
                outside[none_in] = excluded(centers[none_in], h)
        boundary = ~(inside | outside) if final else np.zeros(len(idx), dtype=bool)
        for mask, lab in ((inside, INSIDE), (outside, OUTSIDE), (boundary, BOUNDARY)):
            if mask.any():
                leaves_d.append(np.full(int(mask.sum()), depth, dtype=np.int64))
                leaves_i.append(idx[mask])
                leaves_l.append(np.full(int(mask.sum()), lab, dtype=np.int8))
        split = ~(inside | outside | boundary)
        idx = (2 * idx[split][:, None, :] + _CHILD_OFFSETS[None]).reshape(-1, 3)

    depth_arr = np.concatenate(leaves_d) if leaves_d else np.zeros(0, dtype=np.int64)
    index_arr = np.concatenate(leaves_i) if leaves_i else np.zeros((0, 3), dtype=np.int64)
    label_arr = np.concatenate(leaves_l) if leaves_l else np.zeros(0, dtype=np.int8)
    vol = (2.0 * half / 2.0**depth_arr) ** 3
    v_in = float(vol[label_arr == INSIDE].sum())
    v_bd = float(vol[label_arr == BOUNDARY].sum())
    return OctreeWorkspace(center, half, int(max_depth), depth_arr, index_arr, label_arr,
                           v_in, v_in + v_bd, evals)


@dataclass(frozen=True)
class Connectivity:
    connected: bool
    component_count: int
    largest_component_volume: float


def t_connected(octree: OctreeWorkspace) -> Connectivity:
    """Face-adjacency components of the inside cells.

    Two leaves touch across a face iff the same-size neighbour box of the
    smaller one lies inside the larger one, so each cell only looks up its
    six neighbour boxes and their ancestors.
    """
    sel = np.nonzero(octree.label == INSIDE)[0]
    n = len(sel)
    if n == 0:
        return Connectivity(False, 0, 0.0)
    depth = octree.depth[sel]
    index = octree.index[sel]
    lookup = {(int(d), *map(int, ix)): k for k, (d, ix) in enumerate(zip(depth, index))}
    rows, cols = [], []
    for k in range(n):
        d = int(depth[k])
        for axis in range(3):
            for step in (-1, 1):
                nb = index[k].copy()
                nb[axis] += step
                if nb[axis] < 0 or nb[axis] >= 2**d:
                    continue
                dd = d
                while dd >= 0:
                    hit = lookup.get((dd, int(nb[0]), int(nb[1]), int(nb[2])))
                    if hit is not None:
                        rows.append(k)
                        cols.append(hit)
                        break
                    nb //= 2
                    dd -= 1
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    count, comp = connected_components(graph, directed=False)
    vol = (2.0 * octree.half_side / 2.0**depth) ** 3
    largest = float(np.bincount(comp, weights=vol).max())
    return Connectivity(count == 1, int(count), largest)


# --- sections and field maps -------------------------------------------------

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True, eq=False)
class Section:
    """Feasibility on a plane: ``feasible[j, i]`` at ``(u[i], v[j])``."""

    axis: str
    offset: float
    u: np.ndarray
    v: np.ndarray
    feasible: np.ndarray
    reasons: np.ndarray

    @property
    def area(self) -> float:
        du = self.u[1] - self.u[0] if len(self.u) > 1 else 0.0
        dv = self.v[1] - self.v[0] if len(self.v) > 1 else 0.0
        return float(self.feasible.sum() * du * dv)

    def points(self) -> np.ndarray:
        return _plane_points(self.axis, self.offset, self.u, self.v)


def _plane_points(axis: str, offset: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    k = _AXES[axis]
    uu, vv = np.meshgrid(u, v)
    cols = [None, None, None]
    others = [a for a in range(3) if a != k]
    cols[others[0]], cols[others[1]] = uu.ravel(), vv.ravel()
    cols[k] = np.full(uu.size, float(offset))
    return np.column_stack(cols)


def cross_section(pred: PointPredicate, axis: str, offset: float, resolution: int, root_box=None) -> Section:
    """Sample feasibility on the plane ``<axis> = offset`` at cell centres."""
    if axis not in _AXES:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    if not (isinstance(resolution, (int, np.integer)) and 8 <= resolution <= 4096):
        raise ValueError(f"resolution must be an integer in [8, 4096], got {resolution!r}")
    center, half = default_root_box(pred.geom) if root_box is None else root_box
    center = np.asarray(center, dtype=float)
    k = _AXES[axis]
    if abs(offset - center[k]) > half:
        raise ValueError(f"plane {axis} = {offset:g} lies outside the root box")
    others = [a for a in range(3) if a != k]
    step = 2.0 * half / resolution
    base = -half + (np.arange(resolution) + 0.5) * step
    u, v = center[others[0]] + base, center[others[1]] + base
    code = pred.reasons(_plane_points(axis, offset, u, v)).reshape(resolution, resolution)
    return Section(axis, float(offset), u, v, code == 0, code)


QUANTITIES = ("kappa", "psi_max", "psi_min", "det_A", "det_B", "eta_min")


@dataclass(frozen=True)
class GridSpec:
    """Regular grid with ``resolution`` nodes per axis spanning ``center +- half_side``.

    Set ``plane`` to ``("z", 0.0)`` (or x/y) for a single slice.
    """

    center: tuple[float, float, float]
    half_side: float
    resolution: int
    plane: tuple[str, float] | None = None

    def points(self) -> np.ndarray:
        if not (isinstance(self.resolution, (int, np.integer)) and 2 <= self.resolution <= 4096):
            raise ValueError(f"grid resolution must be in [2, 4096], got {self.resolution!r}")
        if not self.half_side > 0:
            raise ValueError("grid half_side must be positive")
        axes = [np.linspace(c - self.half_side, c + self.half_side, self.resolution) for c in self.center]
        if self.plane is not None:
            name, off = self.plane
            axes[_AXES[name]] = np.array([float(off)])
        zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])


@dataclass(frozen=True, eq=False)
class ScalarField:
    quantity: str
    points: np.ndarray
    values: np.ndarray
    feasible: np.ndarray


def field_values(geom: MachineGeometry, quantity: str, points: np.ndarray) -> np.ndarray:
    """Per-point analysis quantity; NaN where the IK has no solution."""
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; expected one of {', '.join(QUANTITIES)}")
    P = np.asarray(points, dtype=float).reshape(-1, 3)
    out = np.full(len(P), np.nan)
    rho, slack = ik_arrays(geom, P)
    ok = np.all(slack >= 0, axis=1)
    if not ok.any():
        return out
    b, c = leg_points(geom, P[ok], rho[ok])
    A, eta = jacobian_arrays(geom, b, c)
    if quantity == "det_A":
        vals = np.linalg.det(A)
    elif quantity == "det_B":
        vals = eta.prod(axis=1)
    elif quantity == "eta_min":
        vals = np.abs(eta).min(axis=1)
    elif quantity == "kappa":
        vals = np.full(len(A), np.inf)
        good = np.all(np.abs(eta) > 0, axis=1)
        s = np.linalg.svd(A[good] / eta[good][:, :, None], compute_uv=False)
        with np.errstate(divide="ignore"):
            vals[good] = np.sqrt(s[:, 0] / s[:, -1])
    else:
        psi, _ = psi_arrays(A, eta, 0.0)
        vals = psi[:, 0] if quantity == "psi_max" else psi[:, -1]
    out[ok] = vals
    return out


def scalar_field(geom: MachineGeometry, quantity: str, grid: GridSpec, pred: PointPredicate | None = None) -> ScalarField:
    pts = grid.points()
    values = field_values(geom, quantity, pts)
    pred = PointPredicate(geom) if pred is None else pred
    return ScalarField(quantity, pts, values, pred(pts))


def monte_carlo_volume(pred, root_box, n: int, seed: int = 0):
    """Uniform-sampling volume estimate and its standard error."""
    center, half = root_box
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n:
        m = min(CHUNK * 4, n - done)
        pts = np.asarray(center, dtype=float) + rng.uniform(-half, half, size=(m, 3))
        hits += int(np.count_nonzero(pred(pts)))
        done += m
    box = (2.0 * half) ** 3
    f = hits / n
    return box * f, box * math.sqrt(max(f * (1 - f), 0.0) / n)
