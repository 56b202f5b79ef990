"""Conditioning, isotropy, velocity amplification and singularity classes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import JacobianSet, KinematicState, UnavailableError, jacobians
from .model import MachineGeometry

SIGMA_FLOOR = 1e-300
VARIANTS = ("paper", "standard")


def singular_values(M) -> np.ndarray:
    """Singular values of a 3x3 matrix, descending."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return np.linalg.svd(M, compute_uv=False)


def condition_number(M, variant: str = "paper") -> float:
    """Ratio of extreme singular values.

    ``variant="paper"`` returns ``sqrt(sigma_max / sigma_min)``;
    ``variant="standard"`` returns the plain ratio. Both are 1 exactly when the
    matrix is a scaled rotation. Returns ``inf`` for a singular matrix.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    s = singular_values(M)
    if s[-1] <= SIGMA_FLOOR:
        return float("inf")
    ratio = float(s[0] / s[-1])
    return float(np.sqrt(ratio)) if variant == "paper" else ratio


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """Velocity ellipsoid ``p_dot^T (J J^T)^-1 p_dot <= 1``.

    ``xi`` are the square roots of the eigenvalues of ``(J J^T)^-1``
    (ascending) and ``axes[:, k]`` the matching unit eigenvectors. The
    geometric semi-axis along ``axes[:, k]`` has length ``psi[k] = 1 / xi[k]``.
    """

    axes: np.ndarray
    xi: np.ndarray
    psi: np.ndarray


def manipulability(jac: JacobianSet) -> Ellipsoid:
    if jac.J is None or jac.J_inv is None:
        raise UnavailableError("velocity ellipsoid needs both J and J_inv (state is singular)")
    # (J J^T)^-1 = J^-T J^-1; built from J_inv so it stays independent of an SVD of J
    M = jac.J_inv.T @ jac.J_inv
    lam, vecs = np.linalg.eigh(0.5 * (M + M.T))
    xi = np.sqrt(np.clip(lam, 0.0, None))
    with np.errstate(divide="ignore"):
        psi = 1.0 / xi
    return Ellipsoid(vecs, xi, psi)


def psi_svd(jac: JacobianSet) -> np.ndarray:
    """Amplification factors as the singular values of J (descending)."""
    if jac.J is None:
        raise UnavailableError("J unavailable at a parallel singularity")
    return singular_values(jac.J)


@dataclass(frozen=True)
class IsotropyResult:
    isotropic: bool
    ratio_spread: tuple[float, float, float]
    link_dots: tuple[float, float, float]
    unit_deviation: tuple[float, float, float]

    @property
    def max_residual(self) -> float:
        return max(map(abs, self.ratio_spread + self.link_dots + self.unit_deviation))


def isotropy_check(geom: MachineGeometry, state: KinematicState, tol: float = 1e-9) -> IsotropyResult:
    """Test the isotropy and unit-amplification conditions at ``state``.

    Residual groups, each over leg pairs (1,2), (2,3), (3,1) or legs 1..3:
    differences of ``||c_i - b_i|| / eta_i``; dot products of the unit
    strut directions; and ``||c_i - b_i|| / eta_i - 1``. Dot products are
    normalised by L^2 so ``tol`` is scale free.
    """
    jac = jacobians(geom, state)
    if jac.serial_legs:
        raise UnavailableError(f"isotropy undefined: serial singularity on legs {jac.serial_legs}")
    L = geom.leg_length
    struts = state.c - state.b
    ratio = np.linalg.norm(struts, axis=1) / jac.eta
    pairs = ((0, 1), (1, 2), (2, 0))
    spread = tuple(float(ratio[i] - ratio[j]) for i, j in pairs)
    dots = tuple(float(struts[i] @ struts[j]) / (L * L) for i, j in pairs)
    unit = tuple(float(r - 1.0) for r in ratio)
    ok = all(abs(v) <= tol for v in spread + dots + unit)
    return IsotropyResult(ok, spread, dots, unit)


@dataclass(frozen=True)
class Classification:
    serial_legs: tuple[int, ...] = ()
    parallel: str | None = None          # "coplanar" | "parallel_links"

    @property
    def regular(self) -> bool:
        return not self.serial_legs and self.parallel is None

    def __str__(self) -> str:
        if self.regular:
            return "regular"
        parts = []
        if self.serial_legs:
            parts.append("serial_singular(" + ",".join(map(str, self.serial_legs)) + ")")
        if self.parallel:
            parts.append(f"parallel_singular({self.parallel})")
        return "+".join(parts)


def classify_singularity(jac: JacobianSet, eps_A: float | None = None, eps_B: float | None = None) -> Classification:
    eps_A = jac.eps_A if eps_A is None else eps_A
    eps_B = jac.eps_B if eps_B is None else eps_B
    serial = tuple(i + 1 for i in range(3) if abs(jac.eta[i]) <= eps_B)
    parallel = None
    if abs(jac.det_A) <= eps_A:
        rows = jac.A
        cross_tol = eps_A ** (2.0 / 3.0)
        links_parallel = all(
            np.linalg.norm(np.cross(rows[i], rows[j])) <= cross_tol for i, j in ((0, 1), (1, 2), (2, 0))
        )
        parallel = "parallel_links" if links_parallel else "coplanar"
    return Classification(serial, parallel)


@dataclass(frozen=True, eq=False)
class AnalysisReport:
    kappa_paper: float
    kappa_standard: float
    singular_values: np.ndarray | None   # of J_inv
    psi: np.ndarray | None
    ellipsoid: Ellipsoid | None
    det_A: float
    det_B: float
    eta: np.ndarray
    classification: Classification

    def as_dict(self) -> dict:
        def vec(a):
            return None if a is None else [float(v) for v in a]
        ell = self.ellipsoid
        return {
            "kappa_paper": float(self.kappa_paper),
            "kappa_standard": float(self.kappa_standard),
            "singular_values_J_inv": vec(self.singular_values),
            "psi": vec(self.psi),
            "ellipsoid": None if ell is None else {
                "xi": vec(ell.xi),
                "axes": [vec(ell.axes[:, k]) for k in range(3)],
            },
            "det_A": float(self.det_A),
            "det_B": float(self.det_B),
            "eta": vec(self.eta),
            "classification": str(self.classification),
        }


def analyze(geom: MachineGeometry, state: KinematicState, eps_A=None, eps_B=None) -> AnalysisReport:
    jac = jacobians(geom, state, eps_A, eps_B)
    cls = classify_singularity(jac)
    if jac.J_inv is None:
        sv, kp, ks = None, float("inf"), float("inf")
    else:
        sv = singular_values(jac.J_inv)
        kp, ks = condition_number(jac.J_inv, "paper"), condition_number(jac.J_inv, "standard")
    ell = psi = None
    if jac.J is not None and jac.J_inv is not None:
        ell = manipulability(jac)
        psi = ell.psi.copy()
    return AnalysisReport(kp, ks, sv, psi, ell, jac.det_A, jac.det_B, jac.eta.copy(), cls)


def psi_arrays(A: np.ndarray, eta: np.ndarray, det_tol: np.ndarray | float):
    """Batched amplification factors: singular values of J = A^-1 diag(eta).

    Rows whose ``|det A| <= det_tol`` get NaN. Returns ``(psi, det_A)``.
    """
    det_A = np.linalg.det(A)
    ok = np.abs(det_A) > det_tol
    psi = np.full(eta.shape, np.nan)
    if np.any(ok):
        J = np.linalg.solve(A[ok], eta[ok][:, :, None] * np.eye(3)[None])
        psi[ok] = np.linalg.svd(J, compute_uv=False)
    return psi, det_A
