"""Position kinematics and first-order (Jacobian) kinematics.

The velocity closure of each leg, dotted with the strut direction
``c_i - b_i``, removes the two passive joint rates and leaves

    (c_i - b_i)^T p_dot = eta_i * rho_dot_i,   eta_i = (c_i - b_i)^T e_i

with ``e_i`` the rail direction. Stacking the three legs gives
``A p_dot = B rho_dot`` with ``A`` rows ``(c_i - b_i)^T`` and
``B = diag(eta)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import CartesianPoint, JointVector, MachineGeometry

CLOSURE_TOL = 1e-9
EPS_A_REL = 1e-9
EPS_B_REL = 1e-9
DEFAULT_BRANCH = (-1, -1, -1)


class KinematicsError(ValueError):
    pass


class UnreachableError(KinematicsError):
    """The requested point is farther than one strut length from some rail."""

    def __init__(self, legs, excess):
        self.legs = tuple(int(i) for i in legs)
        self.excess = tuple(float(e) for e in excess)
        msg = "; ".join(f"leg {i} unreachable (perpendicular distance^2 exceeds L^2 by {e:.3g})"
                        for i, e in zip(self.legs, self.excess))
        super().__init__(msg)


class NoAssemblyError(KinematicsError):
    pass


class AmbiguousAssemblyError(KinematicsError):
    def __init__(self, candidates):
        self.candidates = [np.asarray(c, dtype=float) for c in candidates]
        listed = ", ".join(np.array2string(c, precision=6) for c in self.candidates)
        super().__init__(f"no assembly mode with all eta > 0; candidates: {listed}")


class UnavailableError(KinematicsError):
    """A matrix needed for the request is missing because the state is singular."""


def _as_point(p) -> np.ndarray:
    if isinstance(p, CartesianPoint):
        p = p.p
    arr = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"point must be finite, got {arr}")
    return arr


def _as_rho(rho) -> np.ndarray:
    if isinstance(rho, JointVector):
        rho = rho.rho
    arr = np.asarray(rho, dtype=float).reshape(3)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"joint vector must be finite, got {arr}")
    return arr


# --- batched primitives ----------------------------------------------------

def ik_arrays(geom: MachineGeometry, points: np.ndarray, branch=DEFAULT_BRANCH):
    """Vectorised IK for an (N, 3) array of platform points.

    Returns ``(rho, slack)`` where ``slack[n, i] = L^2 - w`` (negative means
    leg ``i`` cannot reach point ``n``) and ``rho`` is NaN where unreachable.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 3)
    L = geom.leg_length
    axes, anchors, offsets = geom.axes, geom.anchors, geom.offsets
    v = P[:, None, :] + offsets[None] - anchors[None]          # c_i - a_i
    u = np.einsum("nij,ij->ni", v, axes)
    perp = v - u[..., None] * axes[None]
    w = np.einsum("nij,nij->ni", perp, perp)
    slack = L * L - w
    root = np.sqrt(np.where(slack >= 0, slack, np.nan))
    rho = u + np.asarray(branch, dtype=float)[None] * root
    return rho, slack


def leg_points(geom: MachineGeometry, points: np.ndarray, rho: np.ndarray):
    """Slider points b (N, 3, 3) and platform joints c (N, 3, 3)."""
    P = np.asarray(points, dtype=float).reshape(-1, 3)
    b = geom.anchors[None] + rho[..., None] * geom.axes[None]
    c = P[:, None, :] + geom.offsets[None]
    return b, c


def jacobian_arrays(geom: MachineGeometry, b: np.ndarray, c: np.ndarray):
    """Return ``(A, eta)`` for stacked leg points; A is (N, 3, 3)."""
    A = c - b
    eta = np.einsum("nij,ij->ni", A, geom.axes)
    return A, eta


# --- single-state API ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KinematicState:
    p: np.ndarray
    rho: np.ndarray
    b: np.ndarray
    c: np.ndarray
    branch: tuple[int, int, int]
    within_limits: bool
    limit_violations: tuple[int, ...] = ()

    @property
    def strut_lengths(self) -> np.ndarray:
        """Strut lengths ``||c_i - b_i||``; each equals L on a closed loop."""
        return np.linalg.norm(self.c - self.b, axis=1)


def _make_state(geom: MachineGeometry, p: np.ndarray, rho: np.ndarray, branch) -> KinematicState:
    b, c = leg_points(geom, p[None], rho[None])
    b, c = b[0], c[0]
    L = geom.leg_length
    resid = np.abs(np.linalg.norm(c - b, axis=1) - L)
    if np.any(resid > CLOSURE_TOL * L):
        raise KinematicsError(f"loop closure violated: residuals {resid}")
    lim = geom.limits
    bad = tuple(i + 1 for i in range(3) if not (lim[i, 0] <= rho[i] <= lim[i, 1]))
    return KinematicState(p.copy(), rho.copy(), b, c, tuple(int(s) for s in branch), not bad, bad)


def inverse_kinematics(geom: MachineGeometry, p, branch=DEFAULT_BRANCH) -> KinematicState:
    """Joint positions placing the platform point at ``p``.

    ``rho_i = u_i + branch_i * sqrt(L^2 - w_i)`` where ``u_i`` is the
    rail coordinate of ``c_i`` and ``w_i`` its squared distance from the rail.
    Joint-limit violations are flagged on the state, not raised.
    """
    p = _as_point(p)
    branch = tuple(int(np.sign(s)) or -1 for s in branch)
    rho, slack = ik_arrays(geom, p[None], branch)
    slack = slack[0]
    bad = [i + 1 for i in range(3) if slack[i] < 0]
    if bad:
        raise UnreachableError(bad, [-slack[i - 1] for i in bad])
    return _make_state(geom, p, rho[0], branch)


def _branch_of(geom: MachineGeometry, p: np.ndarray, rho: np.ndarray):
    u = np.einsum("ij,ij->i", p[None] + geom.offsets - geom.anchors, geom.axes)
    return tuple(-1 if rho[i] <= u[i] else 1 for i in range(3))


def forward_kinematics(geom: MachineGeometry, rho, hint=None) -> KinematicState:
    """Platform point for given joint positions (three-sphere intersection).

    With ``hint`` the nearer of the two roots wins. Otherwise the root with
    every ``eta_i > 0`` is taken; if both qualify, the one with the larger
    coordinate sum.
    """
    rho = _as_rho(rho)
    L = geom.leg_length
    b = geom.anchors + rho[:, None] * geom.axes
    centers = b - geom.offsets                      # sphere centres for p

    c0, c1, c2 = centers
    ex = c1 - c0
    d = np.linalg.norm(ex)
    if d == 0:
        raise NoAssemblyError("coincident sphere centres; assembly undetermined")
    ex /= d
    t = c2 - c0
    i = ex @ t
    ey = t - i * ex
    j = np.linalg.norm(ey)
    if j <= 1e-12 * max(L, d):
        raise NoAssemblyError("collinear sphere centres; assembly undetermined")
    ey /= j
    ez = np.cross(ex, ey)
    # equal radii: the first two coordinates come from the two linear equations
    x = d / 2.0
    y = (i * i + j * j - 2.0 * i * x) / (2.0 * j)
    h2 = L * L - x * x - y * y
    if h2 < -CLOSURE_TOL * L * L:
        pair = max(np.linalg.norm(centers[a] - centers[k]) for a, k in ((0, 1), (1, 2), (0, 2)))
        raise NoAssemblyError(
            f"spheres of radius L={L:g} have no common point (max centre distance {pair:.6g})")
    h = np.sqrt(max(h2, 0.0))
    base = c0 + x * ex + y * ey
    roots = [base + h * ez, base - h * ez]

    if hint is not None:
        hp = _as_point(hint)
        p = min(roots, key=lambda r: float(np.linalg.norm(r - hp)))
    else:
        ok = []
        for r in roots:
            _, eta = jacobian_arrays(geom, b[None], (r + geom.offsets)[None])
            if np.all(eta[0] > 0):
                ok.append(r)
        if not ok:
            raise AmbiguousAssemblyError(roots)
        p = max(ok, key=lambda r: float(r.sum()))
    return _make_state(geom, p, rho, _branch_of(geom, p, rho))


@dataclass(frozen=True, eq=False)
class JacobianSet:
    """Jacobian matrices at one configuration.

    ``J_inv`` is absent when some ``|eta_i| <= eps_B`` (serial singularity);
    ``J`` is absent when ``|det A| <= eps_A`` (parallel singularity).
    """

    A: np.ndarray
    B: np.ndarray
    eta: np.ndarray
    det_A: float
    det_B: float
    eps_A: float
    eps_B: float
    J_inv: np.ndarray | None = None
    J: np.ndarray | None = None
    serial_legs: tuple[int, ...] = field(default=())
    parallel_singular: bool = False

    @classmethod
    def from_rows(cls, A, eta, leg_length: float = 1.0, eps_A=None, eps_B=None) -> JacobianSet:
        A = np.array(A, dtype=float).reshape(3, 3)
        eta = np.array(eta, dtype=float).reshape(3)
        L = float(leg_length)
        eps_A = EPS_A_REL * L**3 if eps_A is None else float(eps_A)
        eps_B = EPS_B_REL * L if eps_B is None else float(eps_B)
        det_A = float(np.linalg.det(A))
        det_B = float(eta[0] * eta[1] * eta[2])
        serial = tuple(i + 1 for i in range(3) if abs(eta[i]) <= eps_B)
        parallel = abs(det_A) <= eps_A
        J_inv = None if serial else A / eta[:, None]
        J = None if parallel else np.linalg.solve(A, np.diag(eta))
        return cls(A, np.diag(eta), eta, det_A, det_B, eps_A, eps_B, J_inv, J, serial, parallel)

    @classmethod
    def from_matrices(cls, J, J_inv=None) -> JacobianSet:
        """Wrap a bare Jacobian (A = J_inv, B = I); for analysis of synthetic matrices."""
        J = np.array(J, dtype=float).reshape(3, 3)
        J_inv = np.linalg.inv(J) if J_inv is None else np.array(J_inv, dtype=float).reshape(3, 3)
        return cls(J_inv, np.eye(3), np.ones(3), float(np.linalg.det(J_inv)), 1.0,
                   EPS_A_REL, EPS_B_REL, J_inv, J)


def jacobians(geom: MachineGeometry, state: KinematicState, eps_A=None, eps_B=None) -> JacobianSet:
    A, eta = jacobian_arrays(geom, state.b[None], state.c[None])
    return JacobianSet.from_rows(A[0], eta[0], geom.leg_length, eps_A, eps_B)


def velocity_map(jac: JacobianSet, rho_dot) -> np.ndarray:
    """Platform velocity produced by joint rates (``p_dot = J rho_dot``)."""
    if jac.J is None:
        raise UnavailableError("J unavailable at a parallel singularity")
    return jac.J @ np.asarray(rho_dot, dtype=float).reshape(3)


def joint_rates(jac: JacobianSet, p_dot) -> np.ndarray:
    """Joint rates needed for a platform velocity (``rho_dot = J_inv p_dot``)."""
    if jac.J_inv is None:
        raise UnavailableError(f"J_inv unavailable: serial singularity on legs {jac.serial_legs}")
    return jac.J_inv @ np.asarray(p_dot, dtype=float).reshape(3)


def isotropic_point(geom: MachineGeometry):
    """Pose where every strut lies along its rail with positive sense.

    Requires orthonormal axes and anchors/offsets compatible with such a pose;
    returns ``(p, rho)``.
    """
    axes = geom.axes
    if not np.allclose(axes @ axes.T, np.eye(3), atol=1e-12):
        raise ValueError("isotropic point defined only for orthonormal rail axes")
    q = geom.anchors - geom.offsets
    coords = np.empty(3)
    for j in range(3):
        vals = [axes[j] @ q[i] for i in range(3) if i != j]
        if abs(vals[0] - vals[1]) > 1e-9 * geom.leg_length:
            raise ValueError("anchors and offsets admit no isotropic pose")
        coords[j] = 0.5 * (vals[0] + vals[1])
    p = axes.T @ coords
    rho = np.array([axes[i] @ (p - q[i]) for i in range(3)]) - geom.leg_length
    return p, rho


def working_mode_sign(geom: MachineGeometry) -> int:
    """Sign of det A at the isotropic pose, or 0 when the geometry has none."""
    try:
        p, rho = isotropic_point(geom)
    except ValueError:
        return 0
    b, c = leg_points(geom, p[None], rho[None])
    A, _ = jacobian_arrays(geom, b, c)
    return int(np.sign(np.linalg.det(A[0])))
