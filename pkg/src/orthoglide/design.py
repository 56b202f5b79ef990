"""Joint-limit sizing under a velocity-amplification bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import psi_arrays
from .kinematics import ik_arrays, isotropic_point, jacobian_arrays, leg_points, working_mode_sign
from .model import (
    SCHEMA_VERSION,
    GeometryParseError,
    MachineGeometry,
    dump_document,
    geometry_from_dict,
    geometry_to_dict,
    is_orthogonal,
    parse_document,
)

BISECTION_TOL = 1e-4


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class DesignResult:
    joint_limits: tuple[tuple[float, float], ...]
    center: tuple[float, float, float]
    half_side: float
    psi_bounds: tuple[float, float]
    psi_extremes: tuple[float, float]
    grid_resolution: int
    volume_ratio: float

    def apply(self, geom: MachineGeometry) -> MachineGeometry:
        return geom.with_joint_limits(self.joint_limits)


def cube_grid(center, half_side: float, n: int) -> np.ndarray:
    """``n**3`` nodes of the cube ``center +- half_side`` (corners included)."""
    t = np.linspace(-half_side, half_side, n)
    zz, yy, xx = np.meshgrid(t, t, t, indexing="ij")
    return np.asarray(center, dtype=float) + np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])


def cube_psi(geom: MachineGeometry, center, half_side: float, n: int):
    """IK and amplification factors on the cube grid.

    Returns ``(rho, psi, det_A)``; rows are NaN where the point is
    unreachable (``psi`` also where the parallel Jacobian is exactly singular).
    """
    P = cube_grid(center, half_side, n)
    rho, slack = ik_arrays(geom, P)
    psi = np.full((len(P), 3), np.nan)
    det_A = np.full(len(P), np.nan)
    ok = np.all(slack >= 0, axis=1)
    if ok.any():
        b, c = leg_points(geom, P[ok], rho[ok])
        A, eta = jacobian_arrays(geom, b, c)
        psi[ok], det_A[ok] = psi_arrays(A, eta, 0.0)
    return rho, psi, det_A


def cube_passes(geom: MachineGeometry, center, half_side: float, psi_bounds, n: int) -> bool:
    """Every grid node reachable, in the working assembly mode, with psi in bounds."""
    lo, hi = psi_bounds
    _, psi, det_A = cube_psi(geom, center, half_side, n)
    if np.isnan(psi).any():
        return False
    sign = working_mode_sign(geom)
    if sign and not np.all(det_A * sign > 0):
        return False
    return bool(psi.min() >= lo and psi.max() <= hi)


def _check_bounds(psi_bounds):
    lo, hi = (float(v) for v in psi_bounds)
    if not (0 < lo < 1 < hi):
        raise ValueError(f"psi bounds must satisfy 0 < lo < 1 < hi, got ({lo}, {hi})")
    return lo, hi


def size_joint_limits(geom: MachineGeometry, psi_bounds=(1.0 / 3.0, 3.0), grid_resolution: int = 21) -> DesignResult:
    """Largest cube around the isotropic point whose grid keeps every psi in bounds.

    The half-side is found by bisection to ``1e-4 L``. Joint limits are the
    extreme IK values over the certified grid, widened by one grid step.
    """
    lo, hi = _check_bounds(psi_bounds)
    if not is_orthogonal(geom):
        raise DesignError("joint-limit sizing supports orthogonal rail axes only")
    if not (isinstance(grid_resolution, (int, np.integer)) and grid_resolution >= 3):
        raise ValueError("grid_resolution must be an integer >= 3")
    try:
        center, _ = isotropic_point(geom)
    except ValueError as exc:
        raise DesignError(str(exc)) from None
    L = geom.leg_length
    n = int(grid_resolution)

    if not cube_passes(geom, center, 0.0, (lo, hi), 1):
        raise DesignError("psi bounds violated at the isotropic point")
    s_ok, s_bad = 0.0, L
    while cube_passes(geom, center, s_bad, (lo, hi), n):
        s_ok, s_bad = s_bad, 2.0 * s_bad
        if s_bad > 64 * L:
            raise DesignError("bisection bracket did not close")
    while s_bad - s_ok > BISECTION_TOL * L:
        mid = 0.5 * (s_ok + s_bad)
        if cube_passes(geom, center, mid, (lo, hi), n):
            s_ok = mid
        else:
            s_bad = mid
    if s_ok <= 0.0:
        raise DesignError("no cube of positive size satisfies the psi bounds on the grid")

    rho, psi, _ = cube_psi(geom, center, s_ok, n)
    step = 2.0 * s_ok / (n - 1)
    limits = tuple((float(rho[:, i].min() - step), float(rho[:, i].max() + step)) for i in range(3))
    result = DesignResult(limits, tuple(float(v) for v in center), float(s_ok), (lo, hi),
                          (float(psi.min()), float(psi.max())), n, 0.0)
    ratio = size_metrics(geom, result)["volume_ratio"]
    return DesignResult(limits, result.center, result.half_side, (lo, hi),
                        result.psi_extremes, n, ratio)


def size_metrics(geom: MachineGeometry, result: DesignResult) -> dict:
    """Certified-cube volume against the machine's bounding box.

    The box hulls the rail anchors, the rail travel at the sized limits and
    the certified cube grown by one strut length.
    """
    L = geom.leg_length
    pts = [geom.anchors]
    for i, leg in enumerate(geom.legs):
        for r in result.joint_limits[i]:
            pts.append((leg.anchor_array + r * leg.axis_array)[None])
    c = np.asarray(result.center)
    g = result.half_side + L
    pts.append(np.array([c - g, c + g]))
    allpts = np.concatenate(pts)
    extent = allpts.max(axis=0) - allpts.min(axis=0)
    box_volume = float(np.prod(extent))
    cube_volume = (2.0 * result.half_side) ** 3
    return {
        "cube_volume": cube_volume,
        "box_extent": tuple(float(v) for v in extent),
        "box_volume": box_volume,
        "volume_ratio": cube_volume / box_volume if box_volume > 0 else 0.0,
    }


# --- serialisation -------------------------------------------------------------

def result_to_dict(result: DesignResult) -> dict:
    return {
        "joint_limits": [{"min": lo, "max": hi} for lo, hi in result.joint_limits],
        "certified_cube": {"center": list(result.center), "half_side": result.half_side},
        "psi_bounds": list(result.psi_bounds),
        "psi_extremes": {"min": result.psi_extremes[0], "max": result.psi_extremes[1]},
        "grid_resolution": result.grid_resolution,
        "volume_ratio": result.volume_ratio,
    }


def save_design(result: DesignResult, geom: MachineGeometry | None = None) -> str:
    """Design document; with ``geom`` the sized machine is embedded as ``model``."""
    doc: dict = {"schema": SCHEMA_VERSION, "design_result": result_to_dict(result)}
    if geom is not None:
        doc["model"] = geometry_to_dict(result.apply(geom))
    return dump_document(doc)


def load_design(source: str) -> tuple[DesignResult, MachineGeometry | None]:
    doc = parse_document(source)
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA_VERSION:
        raise GeometryParseError("schema", "expected schema: 1")
    unknown = sorted(set(doc) - {"schema", "design_result", "model"})
    if unknown:
        raise GeometryParseError("<root>", f"unknown field(s) {', '.join(unknown)}")
    raw = doc.get("design_result")
    if not isinstance(raw, dict):
        raise GeometryParseError("design_result", "missing required section")
    try:
        result = DesignResult(
            tuple((float(e["min"]), float(e["max"])) for e in raw["joint_limits"]),
            tuple(float(v) for v in raw["certified_cube"]["center"]),
            float(raw["certified_cube"]["half_side"]),
            tuple(float(v) for v in raw["psi_bounds"]),
            (float(raw["psi_extremes"]["min"]), float(raw["psi_extremes"]["max"])),
            int(raw["grid_resolution"]),
            float(raw["volume_ratio"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GeometryParseError("design_result", f"malformed section ({exc})") from None
    geom = geometry_from_dict(doc["model"], "model") if "model" in doc else None
    return result, geom
