import math

import numpy as np
import pytest

from orthoglide.design import (
    DesignError,
    cube_passes,
    load_design,
    save_design,
    size_joint_limits,
    size_metrics,
)
from orthoglide.model import LegGeometry, MachineGeometry, canonical_orthoglide
from orthoglide.workspace import PointPredicate


def canonical_psi_oracle(L, center, half, n):
    """Amplification factors of the canonical machine on an n^3 grid.

    Written directly from the closure of a canonical leg: rho_i = p_i - sqrt(L^2 - |p|^2 + p_i^2),
    the strut is p - rho_i e_i and its rail component is p_i - rho_i.
    Returns (rho, psi) with psi the singular values of J = (J^-1)^-1.
    """
    t = np.linspace(-half, half, n)
    P = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3) + center
    r2 = (P**2).sum(axis=1, keepdims=True)
    root = np.sqrt(L**2 - r2 + P**2)
    rho = P - root
    struts = P[:, None, :] - rho[:, :, None] * np.eye(3)[None]
    J_inv = struts / root[:, :, None]
    psi = 1.0 / np.linalg.svd(J_inv, compute_uv=False)
    return rho, psi


def test_design_certifies_cube(design_result):
    r = design_result
    assert r.half_side > 0
    assert r.center == (0.0, 0.0, 0.0)
    assert 1 / 3 <= r.psi_extremes[0] and r.psi_extremes[1] <= 3
    # bisection tolerance: a slightly larger cube must fail
    canon = canonical_orthoglide(1.0)
    assert not cube_passes(canon, r.center, r.half_side + 2e-4, r.psi_bounds, r.grid_resolution)


def test_double_resolution_oracle(design_result):
    r = design_result
    n = 2 * r.grid_resolution - 1
    rho, psi = canonical_psi_oracle(1.0, np.zeros(3), r.half_side, n)
    assert np.all(np.isfinite(psi))
    assert psi.min() >= 1 / 3 and psi.max() <= 3
    lim = np.array(r.joint_limits)
    assert np.all(rho >= lim[:, 0]) and np.all(rho <= lim[:, 1])


def test_psi_continuous_past_certified_cube(design_result):
    # the bound is tight: just past the certified size the oracle exceeds it
    _, psi = canonical_psi_oracle(1.0, np.zeros(3), design_result.half_side * 1.05, 21)
    assert psi.max() > 3 or psi.min() < 1 / 3


def test_sized_cube_points_feasible(designed, design_result):
    t = np.linspace(-design_result.half_side, design_result.half_side, 9)
    P = np.stack(np.meshgrid(t, t, t), axis=-1).reshape(-1, 3)
    assert PointPredicate(designed)(P).all()


def test_tight_bounds_give_tiny_cube(canon):
    r = size_joint_limits(canon, (0.999, 1.001), 11)
    assert 0 < r.half_side < 0.1


def test_monotone_in_bounds(canon, design_result):
    tight = size_joint_limits(canon, (0.5, 2.0), 21)
    assert tight.half_side <= design_result.half_side


@pytest.mark.parametrize("bounds", [(3.0, 1 / 3), (1.0, 3.0), (0.5, 1.0), (0.0, 3.0)])
def test_bad_bounds(canon, bounds):
    with pytest.raises(ValueError):
        size_joint_limits(canon, bounds)


def test_non_orthogonal_rejected(canon):
    s = math.sqrt(0.5)
    legs = (canon.legs[0], LegGeometry((0, 0, 0), (s, s, 0.0)), canon.legs[2])
    with pytest.raises(DesignError):
        size_joint_limits(MachineGeometry(1.0, legs, canon.joint_limits))


def test_volume_ratio_regression(design_result):
    # frozen from the reference run: canonical L = 1, bounds (1/3, 3), 21-point grid
    assert design_result.volume_ratio == pytest.approx(0.01200520729083012, rel=1e-12)


def test_volume_ratio_consistent(canon, design_result):
    m = size_metrics(canon, design_result)
    assert m["cube_volume"] == pytest.approx((2 * design_result.half_side) ** 3)
    assert m["volume_ratio"] == design_result.volume_ratio
    assert 0 < m["volume_ratio"] < 1


@pytest.mark.parametrize("s", [0.5, 2.5])
def test_scale_invariance(design_result, s):
    r = size_joint_limits(canonical_orthoglide(s), (1 / 3, 3), 21)
    assert r.half_side == pytest.approx(s * design_result.half_side, rel=1e-9)
    assert r.volume_ratio == pytest.approx(design_result.volume_ratio, rel=1e-9)


def test_save_load_roundtrip(canon, design_result):
    text = save_design(design_result, canon)
    back, geom = load_design(text)
    assert back == design_result
    assert geom == design_result.apply(canon)
    back2, geom2 = load_design(save_design(design_result))
    assert back2 == design_result and geom2 is None
