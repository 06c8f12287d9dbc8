import numpy as np
import pytest

from exitmap.core.flow_core import shear
from exitmap.core.geometry import (
    GeometryError,
    Location,
    ProjectionError,
    make_band,
    make_disc,
    make_halfplane,
    unit_circle,
)


def test_unit_circle_is_exact_at_quarter_turns():
    pts = unit_circle([0.0, 0.25, 0.5, 0.75])
    assert pts.tolist() == [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]


def test_disc_locates_inside_boundary_and_outside():
    disc = make_disc()
    assert disc.locate((0.2, 0.1)) is Location.INSIDE
    assert disc.locate((0.6, 0.8)) is Location.BOUNDARY
    assert disc.locate((1.0, 1.0)) is Location.OUTSIDE


def test_complement_swaps_inside_and_outside_and_keeps_boundary():
    outside = make_disc().complement()
    assert outside.locate((0.2, 0.1)) is Location.OUTSIDE
    assert outside.locate((2.0, 0.0)) is Location.INSIDE
    assert outside.locate((0.0, -1.0)) is Location.BOUNDARY


def test_nan_points_count_as_outside():
    codes = make_halfplane("lower").locate_many(np.array([[0.0, np.nan], [0.0, -1.0]]))
    assert codes.tolist() == [1, -1]


def test_circle_param_recovers_the_angle_parameter():
    boundary = make_disc().boundary
    for s in (0.0, 0.1, 0.3, 0.999):
        assert boundary.distance(boundary.param(boundary.point(s)), s) < 1e-7


def test_circle_param_rejects_points_off_the_curve():
    with pytest.raises(ProjectionError):
        make_disc().boundary.param((0.5, 0.0))


def test_line_param_is_the_x_coordinate_and_rejects_off_axis_points():
    boundary = make_halfplane("upper").boundary
    assert boundary.param((-2.5, 0.0)) == -2.5
    with pytest.raises(ProjectionError):
        boundary.param((0.0, 0.1))


def test_transformed_region_follows_the_homeomorphism():
    h = shear(lambda x: 0.25 * np.sin(np.pi * x))
    region = make_halfplane("lower").transformed(h)
    assert region.locate((0.5, 0.2)) is Location.INSIDE
    assert region.locate((0.5, 0.25)) is Location.BOUNDARY
    assert region.boundary.param((0.5, 0.25)) == pytest.approx(0.5)
    assert np.allclose(region.boundary.point(0.5), (0.5, 0.25))


def test_band_membership():
    band = make_band(axis=0, center=20.0, half_width=1.0)
    assert band.locate((20.5, 80.0)) is Location.INSIDE
    assert band.locate((21.0, 0.0)) is Location.BOUNDARY
    assert band.locate((22.0, 0.0)) is Location.OUTSIDE


def test_invalid_regions_are_rejected():
    with pytest.raises(GeometryError):
        make_disc(radius=0.0)
    with pytest.raises(GeometryError):
        make_halfplane("left")
