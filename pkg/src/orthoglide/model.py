"""Geometric description of an Orthoglide machine and its model-file format.

A machine has three PRPaR legs. Leg ``i`` carries a prismatic rail through
``anchor`` along the unit direction ``axis``; the rail slider sits at
``b_i = anchor + rho_i * axis``. A rigid strut of length ``leg_length``
joins ``b_i`` to ``c_i = p + platform_offset`` on the translating platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

SCHEMA_VERSION = 1
AXIS_TOL = 1e-12
ORTHO_TOL = 1e-12

Vec3 = tuple[float, float, float]


class GeometryParseError(ValueError):
    """Raised when a model document does not follow the schema.

    ``location`` is a dotted path to the offending field (``legs[1].axis``).
    """

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


@dataclass(frozen=True)
class LegGeometry:
    anchor: Vec3
    axis: Vec3
    platform_offset: Vec3 = (0.0, 0.0, 0.0)

    @property
    def anchor_array(self) -> np.ndarray:
        return np.array(self.anchor, dtype=float)

    @property
    def axis_array(self) -> np.ndarray:
        return np.array(self.axis, dtype=float)

    @property
    def offset_array(self) -> np.ndarray:
        return np.array(self.platform_offset, dtype=float)


@dataclass(frozen=True)
class MachineGeometry:
    leg_length: float
    legs: tuple[LegGeometry, ...]
    joint_limits: tuple[tuple[float, float], ...]
    name: str | None = field(default=None, compare=True)

    @property
    def anchors(self) -> np.ndarray:
        return np.array([leg.anchor for leg in self.legs], dtype=float)

    @property
    def axes(self) -> np.ndarray:
        return np.array([leg.axis for leg in self.legs], dtype=float)

    @property
    def offsets(self) -> np.ndarray:
        return np.array([leg.platform_offset for leg in self.legs], dtype=float)

    @property
    def limits(self) -> np.ndarray:
        """Joint limits as a (3, 2) array of ``(rho_min, rho_max)``."""
        return np.array(self.joint_limits, dtype=float)

    def with_joint_limits(self, limits) -> MachineGeometry:
        limits = tuple((float(lo), float(hi)) for lo, hi in limits)
        return MachineGeometry(self.leg_length, self.legs, limits, self.name)

    def scaled(self, s: float) -> MachineGeometry:
        """Return the geometry with every length multiplied by ``s``."""
        if not s > 0:
            raise ValueError("scale factor must be positive")
        legs = tuple(
            LegGeometry(
                tuple(s * v for v in leg.anchor),
                leg.axis,
                tuple(s * v for v in leg.platform_offset),
            )
            for leg in self.legs
        )
        limits = tuple((s * lo, s * hi) for lo, hi in self.joint_limits)
        return MachineGeometry(s * self.leg_length, legs, limits, self.name)


@dataclass(frozen=True)
class JointVector:
    rho: Vec3
    validated: bool = False


@dataclass(frozen=True)
class CartesianPoint:
    p: Vec3

    def __post_init__(self):
        if len(self.p) != 3 or not all(math.isfinite(v) for v in self.p):
            raise ValueError(f"point must be 3 finite numbers, got {self.p!r}")


def canonical_orthoglide(leg_length: float, name: str | None = None) -> MachineGeometry:
    """Symmetric machine: rails along x, y, z through the origin.

    Joint limits are the placeholder range ``[-2L, 2L]``; use
    :func:`orthoglide.design.size_joint_limits` to narrow them. With the
    default IK branch the isotropic pose is ``p = 0``, ``rho = (-L, -L, -L)``.
    """
    if not (isinstance(leg_length, (int, float)) and math.isfinite(leg_length) and leg_length > 0):
        raise ValueError(f"leg_length must be a positive finite number, got {leg_length!r}")
    L = float(leg_length)
    eye = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    legs = tuple(LegGeometry((0.0, 0.0, 0.0), e, (0.0, 0.0, 0.0)) for e in eye)
    limits = tuple((-2.0 * L, 2.0 * L) for _ in range(3))
    return MachineGeometry(L, legs, limits, name)


def is_orthogonal(geom: MachineGeometry, tol: float = ORTHO_TOL) -> bool:
    axes = geom.axes
    return all(abs(float(axes[i] @ axes[j])) <= tol for i, j in ((0, 1), (1, 2), (2, 0)))


def validate(geom: MachineGeometry) -> list[str]:
    """Return human-readable invariant violations; empty when the geometry is sound."""
    out = []
    L = geom.leg_length
    if not (math.isfinite(L) and L > 0):
        out.append("leg_length: must be positive and finite")
    if len(geom.legs) != 3:
        out.append(f"legs: expected 3 legs, got {len(geom.legs)}")
    if len(geom.joint_limits) != 3:
        out.append(f"joint_limits: expected 3 entries, got {len(geom.joint_limits)}")
    for i, leg in enumerate(geom.legs, start=1):
        vals = (*leg.anchor, *leg.axis, *leg.platform_offset)
        if not all(math.isfinite(v) for v in vals):
            out.append(f"leg {i}: non-finite component")
            continue
        if abs(math.sqrt(sum(v * v for v in leg.axis)) - 1.0) > AXIS_TOL:
            out.append(f"leg {i}: axis not unit")
    for i, (lo, hi) in enumerate(geom.joint_limits, start=1):
        if not (math.isfinite(lo) and math.isfinite(hi)):
            out.append(f"leg {i}: non-finite joint limit")
        elif not lo < hi:
            out.append(f"leg {i}: empty joint range")
    if len(geom.legs) == 3 and not any("axis" in v or "non-finite" in v for v in out):
        if not is_orthogonal(geom):
            out.append("legs: axes not pairwise orthogonal (non-canonical)")
    return out


# --- model file -----------------------------------------------------------

_TOP_KEYS = {"schema", "name", "leg_length", "legs", "joint_limits"}
_LEG_KEYS = {"anchor", "axis", "platform_offset"}
_LIMIT_KEYS = {"min", "max"}


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise GeometryParseError(where, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise GeometryParseError(where, "non-finite number")
    return value


def _vec3(value: Any, where: str) -> Vec3:
    if not isinstance(value, list) or len(value) != 3:
        raise GeometryParseError(where, "expected a list of 3 numbers")
    return tuple(_number(v, f"{where}[{k}]") for k, v in enumerate(value))


def _mapping(value: Any, where: str, allowed: set[str], required: set[str]) -> dict:
    if not isinstance(value, dict):
        raise GeometryParseError(where, "expected a mapping")
    unknown = sorted(set(map(str, value)) - allowed)
    if unknown:
        raise GeometryParseError(where, f"unknown field(s) {', '.join(unknown)}")
    for key in sorted(required):
        if key not in value:
            loc = key if where in ("", "<root>") else f"{where}.{key}"
            raise GeometryParseError(loc, "missing required field")
    return value


def geometry_from_dict(doc: Any, where: str = "") -> MachineGeometry:
    doc = _mapping(doc, where or "<root>", _TOP_KEYS, {"schema", "leg_length", "legs", "joint_limits"})
    prefix = f"{where}." if where else ""
    if doc["schema"] != SCHEMA_VERSION:
        raise GeometryParseError(f"{prefix}schema", f"unsupported schema {doc['schema']!r}")
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise GeometryParseError(f"{prefix}name", "expected a string")
    leg_length = _number(doc["leg_length"], f"{prefix}leg_length")

    legs_raw = doc["legs"]
    if not isinstance(legs_raw, list) or len(legs_raw) != 3:
        n = len(legs_raw) if isinstance(legs_raw, list) else "non-list"
        raise GeometryParseError(f"{prefix}legs", f"expected 3 legs, got {n}")
    legs = []
    for k, raw in enumerate(legs_raw):
        loc = f"{prefix}legs[{k}]"
        raw = _mapping(raw, loc, _LEG_KEYS, {"anchor", "axis"})
        offset = _vec3(raw["platform_offset"], f"{loc}.platform_offset") if "platform_offset" in raw else (0.0, 0.0, 0.0)
        legs.append(LegGeometry(_vec3(raw["anchor"], f"{loc}.anchor"), _vec3(raw["axis"], f"{loc}.axis"), offset))

    lim_raw = doc["joint_limits"]
    if not isinstance(lim_raw, list) or len(lim_raw) != 3:
        raise GeometryParseError(f"{prefix}joint_limits", "expected 3 entries")
    limits = []
    for k, raw in enumerate(lim_raw):
        loc = f"{prefix}joint_limits[{k}]"
        raw = _mapping(raw, loc, _LIMIT_KEYS, _LIMIT_KEYS)
        limits.append((_number(raw["min"], f"{loc}.min"), _number(raw["max"], f"{loc}.max")))
    return MachineGeometry(leg_length, tuple(legs), tuple(limits), name)


def geometry_to_dict(geom: MachineGeometry) -> dict:
    doc: dict[str, Any] = {"schema": SCHEMA_VERSION}
    if geom.name is not None:
        doc["name"] = geom.name
    doc["leg_length"] = float(geom.leg_length)
    doc["legs"] = [
        {
            "anchor": [float(v) for v in leg.anchor],
            "axis": [float(v) for v in leg.axis],
            "platform_offset": [float(v) for v in leg.platform_offset],
        }
        for leg in geom.legs
    ]
    doc["joint_limits"] = [{"min": float(lo), "max": float(hi)} for lo, hi in geom.joint_limits]
    return doc


def parse_document(source: str) -> Any:
    try:
        return yaml.safe_load(source)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"line {mark.line + 1}" if mark is not None else "<document>"
        raise GeometryParseError(loc, f"malformed document ({exc.__class__.__name__})") from None


def dump_document(doc: dict) -> str:
    # PyYAML writes floats with repr(), which round-trips exactly.
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def load_geometry(source: str) -> MachineGeometry:
    """Parse a model document (YAML text) into a :class:`MachineGeometry`."""
    return geometry_from_dict(parse_document(source))


def save_geometry(geom: MachineGeometry) -> str:
    return dump_document(geometry_to_dict(geom))
