import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthoglide.model import (
    GeometryParseError,
    LegGeometry,
    MachineGeometry,
    canonical_orthoglide,
    load_geometry,
    save_geometry,
    validate,
)


def test_canonical_axes_and_anchors(canon):
    assert canon.axes.tolist() == np.eye(3).tolist()
    assert canon.anchors.tolist() == np.zeros((3, 3)).tolist()
    assert canon.offsets.tolist() == np.zeros((3, 3)).tolist()
    assert canon.joint_limits == ((-2.0, 2.0),) * 3


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan, math.inf])
def test_canonical_rejects_nonpositive_length(bad):
    with pytest.raises(ValueError):
        canonical_orthoglide(bad)


def test_validate_canonical_is_clean(canon):
    assert validate(canon) == []


def test_validate_non_unit_axis(canon):
    legs = (LegGeometry((0, 0, 0), (2.0, 0.0, 0.0)),) + canon.legs[1:]
    geom = MachineGeometry(1.0, legs, canon.joint_limits)
    assert validate(geom) == ["leg 1: axis not unit"]


def test_validate_empty_joint_range(canon):
    geom = canon.with_joint_limits([(-2, 2), (0.5, 0.5), (-2, 2)])
    assert validate(geom) == ["leg 2: empty joint range"]


def test_validate_flags_non_orthogonal_axes(canon):
    s = math.sqrt(0.5)
    legs = (canon.legs[0], LegGeometry((0, 0, 0), (s, s, 0.0)), canon.legs[2])
    problems = validate(MachineGeometry(1.0, legs, canon.joint_limits))
    assert problems == ["legs: axes not pairwise orthogonal (non-canonical)"]


def test_roundtrip_canonical(canon):
    assert load_geometry(save_geometry(canon)) == canon


def test_missing_leg_length_names_field(canon):
    text = save_geometry(canon).replace("leg_length: 1.0\n", "")
    with pytest.raises(GeometryParseError) as err:
        load_geometry(text)
    assert err.value.location == "leg_length"


def test_two_legs_rejected():
    text = """
schema: 1
leg_length: 1.0
legs:
  - {anchor: [0, 0, 0], axis: [1, 0, 0]}
  - {anchor: [0, 0, 0], axis: [0, 1, 0]}
joint_limits:
  - {min: -1.0, max: 1.0}
  - {min: -1.0, max: 1.0}
  - {min: -1.0, max: 1.0}
"""
    with pytest.raises(GeometryParseError, match="expected 3 legs"):
        load_geometry(text)


@pytest.mark.parametrize("value", [".nan", ".inf", "-.inf"])
def test_non_finite_rejected(canon, value):
    text = save_geometry(canon).replace("leg_length: 1.0", f"leg_length: {value}")
    with pytest.raises(GeometryParseError, match="non-finite"):
        load_geometry(text)


def test_unknown_field_rejected(canon):
    text = save_geometry(canon) + "colour: red\n"
    with pytest.raises(GeometryParseError, match="unknown field"):
        load_geometry(text)


def test_unknown_leg_field_located(canon):
    text = save_geometry(canon).replace("platform_offset:", "offset:", 1)
    with pytest.raises(GeometryParseError) as err:
        load_geometry(text)
    assert err.value.location == "legs[0]"


def test_platform_offset_optional(canon):
    text = save_geometry(canon).replace("    platform_offset: [0.0, 0.0, 0.0]\n", "")
    assert load_geometry(text) == canon


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vec = st.tuples(finite, finite, finite)


@st.composite
def geometries(draw):
    legs = tuple(LegGeometry(draw(vec), draw(vec), draw(vec)) for _ in range(3))
    limits = tuple(tuple(sorted((draw(finite), draw(finite)))) for _ in range(3))
    name = draw(st.one_of(st.none(), st.text(max_size=12)))
    return MachineGeometry(draw(st.floats(1e-6, 1e6)), legs, limits, name)


@settings(max_examples=200, deadline=None)
@given(geometries())
def test_roundtrip_random(geom):
    back = load_geometry(save_geometry(geom))
    assert back == geom


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-9, 1e9))
def test_canonical_always_valid(L):
    geom = canonical_orthoglide(L)
    assert validate(geom) == []
    ax = geom.axes
    for i, j in ((0, 1), (1, 2), (2, 0)):
        assert abs(ax[i] @ ax[j]) <= 1e-12
