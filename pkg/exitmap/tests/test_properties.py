import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from exitmap.config import Tolerances
from exitmap.core.flow_core import builtin_flow, group_law_residual
from exitmap.core.geometry import make_disc
from exitmap.export import _cell
from exitmap.modules.first_maps import TypeLabel, check_two_to_one
from exitmap.modules.planar_analysis import (
    ParametricMapSample,
    TypeSequence,
    check_monotone_identity,
)
from exitmap.modules.realization import RealizableMapSpec, radial_homeomorphism

positive = st.floats(min_value=1e-15, max_value=1e3, allow_nan=False, allow_infinity=False)
labels = st.lists(st.sampled_from(list(TypeLabel)), min_size=1, max_size=60)


@given(positive)
def test_merged_keeps_the_override(value):
    assert Tolerances().merged({"boundary": value}).boundary == value


@given(labels)
def test_runs_cover_every_sample_and_adjacent_runs_differ(lbls):
    seq = TypeSequence.from_labels(np.arange(len(lbls), dtype=float), lbls, periodic=False)
    assert sum(run.length for run in seq.runs) == len(lbls)
    assert seq.runs[0].first == 0
    assert seq.runs[-1].last == len(lbls) - 1
    for a, b in zip(seq.runs, seq.runs[1:]):
        assert a.label is not b.label
        assert b.first == a.last + 1


@given(st.sets(st.integers(min_value=0, max_value=999), min_size=2, max_size=40),
       st.booleans())
def test_distinct_values_are_never_more_than_one_to_one(ticks, periodic):
    values = sorted(t / 1000 for t in ticks)
    pairs = [(i / len(values), v) for i, v in enumerate(values[::-1])]
    assert check_two_to_one(pairs, periodic=periodic).passed


@settings(deadline=None, max_examples=25)
@given(st.integers(min_value=8, max_value=200))
def test_identity_map_passes_monotone_identity(n):
    s = np.arange(n) / n
    assert check_monotone_identity(ParametricMapSample.from_values(s, s, periodic=False)).passed


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_csv_cells_keep_twelve_significant_digits(value):
    cell = _cell(value)
    assert isinstance(cell, str)
    assert math.isclose(float(cell), value, rel_tol=1e-11, abs_tol=0.0) or value == 0.0


def test_csv_cells_blank_out_missing_values():
    assert _cell(None) == ""
    assert _cell(float("nan")) == ""
    assert _cell(np.bool_(True)) == "true"
    assert _cell(TypeLabel.A1) == TypeLabel.A1.value


coordinate = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)
moment = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False)
FOCUS = builtin_flow("affine_focus", lam=1.0, mu=1.0, p=1.0)


@settings(deadline=None, max_examples=50)
@given(moment, moment, coordinate, coordinate)
def test_affine_focus_obeys_the_group_law(s, t, x, y):
    assert group_law_residual(FOCUS, [(s, t, (x, y))]).max_residual < 1e-8


@settings(deadline=None, max_examples=50)
@given(st.floats(min_value=0.0, max_value=1.0, exclude_max=True))
def test_circle_parameters_round_trip(s):
    boundary = make_disc().boundary
    assert boundary.distance(boundary.param(boundary.point(s)), s) < 1e-7


@given(coordinate, coordinate)
def test_complement_negates_location_codes(x, y):
    disc = make_disc()
    pts = np.array([[x, y]])
    assert disc.complement().locate_many(pts).tolist() == (-disc.locate_many(pts)).tolist()


SQUARE_H = radial_homeomorphism(RealizableMapSpec.square())


@settings(deadline=None, max_examples=40)
@given(st.floats(min_value=0.1, max_value=3.0), st.floats(min_value=-3.1, max_value=3.1))
def test_radial_homeomorphism_is_a_bijection(r, theta):
    p = np.array([[r * np.cos(theta), r * np.sin(theta)]])
    assert np.allclose(SQUARE_H.inverse(SQUARE_H(p)), p, atol=1e-8)
