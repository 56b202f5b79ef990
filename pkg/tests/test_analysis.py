import math

import numpy as np
import pytest

from orthoglide.analysis import (
    analyze,
    classify_singularity,
    condition_number,
    isotropy_check,
    manipulability,
    psi_svd,
)
from orthoglide.kinematics import JacobianSet, UnavailableError, inverse_kinematics, jacobians
from orthoglide.model import canonical_orthoglide

R3 = math.sqrt(3.0)


@pytest.mark.parametrize("variant", ["paper", "standard"])
def test_condition_identity(variant):
    assert condition_number(np.eye(3), variant) == 1.0


def test_condition_diagonal():
    M = np.diag([2.0, 1.0, 0.5])
    assert condition_number(M, "paper") == pytest.approx(2.0, abs=1e-15)
    assert condition_number(M, "standard") == pytest.approx(4.0, abs=1e-15)
    assert condition_number(M) == condition_number(M, "paper")


def test_condition_rank_deficient():
    M = [[1, 0, 0], [0, 1, 0], [1, 1, 0]]
    assert condition_number(M, "paper") == math.inf
    assert condition_number(M, "standard") == math.inf


def test_condition_rejects_non_finite():
    with pytest.raises(ValueError):
        condition_number([[1, 0, 0], [0, math.nan, 0], [0, 0, 1]])
    with pytest.raises(ValueError):
        condition_number(np.eye(3), "frobenius")


def test_manipulability_isotropic(canon):
    ell = manipulability(jacobians(canon, inverse_kinematics(canon, (0, 0, 0))))
    assert np.allclose(ell.xi, 1.0) and np.allclose(ell.psi, 1.0)
    assert np.allclose(ell.axes @ ell.axes.T, np.eye(3), atol=1e-12)


def test_manipulability_diagonal():
    ell = manipulability(JacobianSet.from_matrices(np.diag([3.0, 1.0, 1.0 / 3.0])))
    assert np.allclose(ell.psi, [3.0, 1.0, 1.0 / 3.0], atol=1e-12)
    assert np.allclose(ell.psi * ell.xi, 1.0, atol=1e-12)


def test_manipulability_off_center_against_svd(canon):
    ell = manipulability(jacobians(canon, inverse_kinematics(canon, (0, 0.5, 0))))
    J_inv = np.array([[1, 1 / R3, 0], [0, 1, 0], [0, 1 / R3, 1]])
    oracle = np.sort(1.0 / np.linalg.svd(J_inv, compute_uv=False))[::-1]
    assert np.allclose(ell.psi, oracle, atol=1e-9)


def test_manipulability_unavailable_when_parallel_singular():
    jac = JacobianSet.from_rows([[1, 0, 0], [0, 1, 0], [1, 1, 0]], [1, 1, 1])
    with pytest.raises(UnavailableError):
        manipulability(jac)


def test_isotropy_center(canon):
    res = isotropy_check(canon, inverse_kinematics(canon, (0, 0, 0)))
    assert res.isotropic
    assert res.max_residual <= 1e-12


def test_isotropy_off_center(canon):
    res = isotropy_check(canon, inverse_kinematics(canon, (0, 0.5, 0)))
    assert not res.isotropic
    # (c1 - b1).(c2 - b2) = (sqrt3/2, 1/2, 0).(0, 1, 0)
    assert res.link_dots[0] == pytest.approx(0.5, abs=1e-12)


def test_isotropy_scaled():
    geom = canonical_orthoglide(2.5)
    s = inverse_kinematics(geom, (0, 0, 0))
    assert s.rho.tolist() == [-2.5, -2.5, -2.5]
    assert isotropy_check(geom, s).isotropic


def test_isotropy_unavailable_at_serial_singularity(canon):
    with pytest.raises(UnavailableError):
        isotropy_check(canon, inverse_kinematics(canon, (0, 1, 0)))


def test_classify_regular():
    assert str(classify_singularity(JacobianSet.from_rows(np.eye(3), [1, 1, 1]))) == "regular"


def test_classify_serial(canon):
    cls = classify_singularity(jacobians(canon, inverse_kinematics(canon, (0, 1, 0))))
    # every strut points along +y here, so legs 1 and 3 are both perpendicular to their rails
    assert cls.serial_legs == (1, 3)
    assert cls.parallel == "parallel_links"


# leg 1 perpendicular to its rail while the struts still span space; 0.6^2 + 0.8^2
# is 1 only up to rounding, so eta_1 ~ 1e-8 and these tests widen eps_B
SERIAL_P = (-0.3, 0.6, 0.8)


def test_classify_serial_only(canon):
    s = inverse_kinematics(canon, SERIAL_P)
    assert abs((s.c[0] - s.b[0]) @ canon.axes[0]) <= 1e-7
    cls = classify_singularity(jacobians(canon, s), eps_B=1e-7)
    assert cls.serial_legs == (1,)
    assert cls.parallel is None


def test_classify_coplanar():
    jac = JacobianSet.from_rows([[1, 0, 0], [0, 1, 0], [1, 1, 0]], [1, 1, 1])
    assert str(classify_singularity(jac)) == "parallel_singular(coplanar)"


def test_classify_parallel_links():
    jac = JacobianSet.from_rows([[0, 1, 0], [0, 2, 0], [0, -1, 0]], [1, 1, 1])
    assert classify_singularity(jac).parallel == "parallel_links"


def test_analyze_isotropic(canon):
    rep = analyze(canon, inverse_kinematics(canon, (0, 0, 0)))
    assert rep.kappa_paper == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(rep.psi, 1.0)
    assert str(rep.classification) == "regular"


def test_analyze_off_center(canon):
    rep = analyze(canon, inverse_kinematics(canon, (0, 0.5, 0)))
    assert rep.det_B == pytest.approx(0.75, abs=1e-12)
    assert rep.kappa_paper == pytest.approx(math.sqrt(rep.kappa_standard), abs=1e-12)
    assert np.allclose(rep.psi * rep.ellipsoid.xi, 1.0, atol=1e-12)


def test_analyze_serial_singular_partial(canon):
    rep = analyze(canon, inverse_kinematics(canon, SERIAL_P), eps_B=1e-7)
    assert rep.classification.serial_legs == (1,)
    assert rep.psi is None and rep.ellipsoid is None
    assert rep.kappa_paper == math.inf
    assert rep.as_dict()["psi"] is None


def test_psi_matches_svd_of_j(designed, workspace_points):
    for p in workspace_points:
        jac = jacobians(designed, inverse_kinematics(designed, p))
        ell = manipulability(jac)
        assert np.allclose(ell.psi, psi_svd(jac), rtol=0, atol=1e-9)
        k = condition_number(jac.J_inv, "paper")
        assert k == pytest.approx(math.sqrt(ell.psi[0] / ell.psi[-1]), abs=1e-9)


def test_ellipsoid_membership(designed, workspace_points):
    rng = np.random.default_rng(5)
    for p in workspace_points[:100]:
        jac = jacobians(designed, inverse_kinematics(designed, p))
        M = np.linalg.inv(jac.J @ jac.J.T)
        r = rng.normal(size=3)
        r /= np.linalg.norm(r)
        pdot = jac.J @ r
        assert pdot @ M @ pdot <= 1 + 1e-9
