import numpy as np
import pytest

from exitmap.core.flow_core import MoebiusMap, RotationFlow, builtin_flow, moebius_conjugate
from exitmap.core.geometry import make_disc, make_halfplane, moebius_image, unit_circle
from exitmap.modules.first_maps import (
    PreconditionError,
    Status,
    TypeLabel,
    check_backward_invariance,
    check_coverage,
    check_duality,
    check_forward_invariance,
    check_period_bound,
    check_two_to_one,
    classify_boundary_point,
    classify_many,
    first_in,
    first_out,
)
from exitmap.modules.planar_analysis import sample_F_E, sample_F_R

HORIZON = 20.0


def _circle_distance(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def test_exmap_exit_from_one_sixth_turn():
    flow, disc = builtin_flow("exmap"), make_disc()
    outcome = first_out(flow, disc, unit_circle(1 / 6), HORIZON)
    assert outcome.status is Status.DEFINED
    assert outcome.time == pytest.approx(np.log(3) / 2, abs=1e-6)
    assert _circle_distance(outcome.param, 1 / 12) < 1e-6


def test_exmap_first_out_map_matches_closed_form_at_64_samples():
    flow, disc = builtin_flow("exmap"), make_disc()
    sample = sample_F_E(flow, disc, 64, HORIZON)
    for s, value, outcome in zip(sample.s, sample.values, sample.outcomes):
        c, sn = unit_circle(s)
        if c == 0.0:
            # straight into the origin
            assert outcome.status is Status.UNDEFINED
        elif abs(sn) > abs(c):
            exit_point = (np.sign(c) * abs(sn), np.sign(sn) * abs(c))
            expected = np.arctan2(exit_point[1], exit_point[0]) / (2 * np.pi) % 1.0
            assert outcome.status is Status.DEFINED
            assert outcome.time == pytest.approx(np.log(abs(sn / c)), abs=1e-6)
            assert _circle_distance(value, expected) < 1e-6
        else:
            assert outcome.status is Status.DEFINED
            assert outcome.time == 0.0
            assert _circle_distance(value, s) < 1e-6


def test_exmap_first_in_map_matches_closed_form_at_64_samples():
    F = sample_F_R(builtin_flow("exmap"), make_disc(), 64, HORIZON)  # noqa: N806
    for s, value, status in zip(F.s, F.values, F.status):
        c, sn = unit_circle(s)
        if abs(abs(sn) - abs(c)) < 1e-9:
            # tangencies are covered by the type B test
            continue
        if abs(sn) > abs(c):
            assert status is Status.DEFINED
            assert _circle_distance(value, s) < 1e-6
        else:
            assert status is Status.UNDEFINED
            assert np.isnan(value)


def test_exmap_quarter_turn_is_type_c_and_tangency_is_type_b():
    flow, disc = builtin_flow("exmap"), make_disc()
    top = classify_boundary_point(flow, disc, unit_circle(0.25), HORIZON)
    assert top.label is TypeLabel.C
    assert top.exit.status is Status.UNDEFINED
    tangent = classify_boundary_point(flow, disc, unit_circle(0.125), HORIZON)
    assert tangent.label is TypeLabel.B
    assert tangent.ret.status is Status.UNDEFINED


def test_exmap_steep_point_is_type_a2():
    bt = classify_boundary_point(builtin_flow("exmap"), make_disc(), unit_circle(1 / 6), HORIZON)
    assert bt.label is TypeLabel.A2
    assert bt.ret.time == 0.0


def _affine_expected(x, p):
    threshold = -p
    if p > 0:
        return TypeLabel.A2 if x < threshold else TypeLabel.B
    if p == 0:
        return TypeLabel.A2 if x < 0 else TypeLabel.A1
    return TypeLabel.C if x <= threshold else TypeLabel.A1


@pytest.mark.parametrize("p", [1.0, 0.0, -1.0])
def test_affine_focus_classification_follows_the_threshold(p):
    flow = builtin_flow("affine_focus", lam=1.0, mu=1.0, p=p)
    lower = make_halfplane("lower", transversal=True)
    xs = np.linspace(-3.0, 3.0, 33)
    spacing = xs[1] - xs[0]
    kept = [x for x in xs if abs(x + p) > spacing + 1e-12 and abs(x) > spacing + 1e-12]
    types = classify_many(flow, lower, [(x, 0.0) for x in kept], 30.0, threads=1)
    for x, bt in zip(kept, types):
        assert bt.label is _affine_expected(x, p), f"x={x:g}: {bt.label.value} {bt.notes}"


def test_affine_focus_named_points():
    lower = make_halfplane("lower")
    centred = builtin_flow("affine_focus", lam=1.0, mu=1.0, p=0.0)
    assert classify_boundary_point(centred, lower, (1.0, 0.0), 30.0).label is TypeLabel.A1
    assert classify_boundary_point(centred, lower, (-1.0, 0.0), 30.0).label is TypeLabel.A2
    assert classify_boundary_point(centred, lower, (0.0, 0.0), 30.0).label is TypeLabel.A3
    raised = builtin_flow("affine_focus", lam=1.0, mu=1.0, p=1.0)
    assert classify_boundary_point(raised, lower, (0.5, 0.0), 30.0).label is TypeLabel.B


def test_first_out_rejects_points_outside_the_closure():
    with pytest.raises(PreconditionError):
        first_out(builtin_flow("exmap"), make_disc(), (2.0, 0.0), HORIZON)


def test_first_out_from_an_interior_point_reaches_the_boundary():
    outcome = first_out(builtin_flow("source"), make_disc(), (0.5, 0.0), HORIZON)
    assert outcome.time == pytest.approx(np.log(2.0), abs=1e-8)
    assert np.allclose(outcome.point, (1.0, 0.0), atol=1e-8)


def test_first_in_from_outside_reaches_the_closed_disc():
    outcome = first_in(builtin_flow("sink"), make_disc(), (2.0, 0.0), HORIZON)
    assert outcome.status is Status.DEFINED
    assert outcome.time == pytest.approx(np.log(2.0), abs=1e-8)


def test_exit_and_return_duality_holds_on_the_exmap_disc():
    points = unit_circle(np.arange(16) / 16 + 1 / 64)
    interior = [(0.3, 0.5), (-0.2, -0.1)]
    result = check_duality(builtin_flow("exmap"), make_disc(), [*points, *interior], HORIZON)
    assert result.passed, result.violations


def test_rotation_exit_and_return_times_stay_below_the_period():
    flow = RotationFlow()
    disc = make_disc(center=(0.5, 0.0))
    s = (np.arange(32) + 0.5) / 32
    types = classify_many(flow, disc, disc.boundary.point(s), 4.0)
    assert all(bt.label is not TypeLabel.UNRESOLVED for bt in types)
    assert check_period_bound(types, flow.period).passed
    assert check_coverage(types).passed


def test_two_to_one_rejects_three_preimages():
    result = check_two_to_one([(0.1, 0.5), (0.2, 0.5), (0.3, 0.5)], periodic=True)
    assert not result.passed
    assert "3 preimages" in result.violations[0]


def test_two_to_one_allows_a_pair_with_a_fixed_preimage():
    assert check_two_to_one([(0.5, 0.5), (0.7, 0.5), (0.9, 0.2)], periodic=True).passed


def test_two_to_one_rejects_two_moving_preimages():
    assert not check_two_to_one([(0.1, 0.5), (0.7, 0.5)], periodic=False).passed


INTERIOR = [(0.3, 0.2), (-0.5, 0.1), (0.0, -0.6)]


def test_source_disc_is_backward_invariant_through_type_b():
    points = unit_circle(np.arange(16) / 16)
    result = check_backward_invariance(builtin_flow("source"), make_disc(), points, 10.0,
                                       interior=INTERIOR)
    assert result.passed, result.violations
    assert result.details["all_B"] is True
    assert result.details["direct_invariant"] is True


def test_sink_disc_is_forward_but_not_backward_invariant():
    flow, disc = builtin_flow("sink"), make_disc()
    points = unit_circle(np.arange(16) / 16)
    backward = check_backward_invariance(flow, disc, points, 10.0, interior=INTERIOR)
    assert backward.passed
    assert backward.details["all_B"] is False
    assert backward.details["direct_invariant"] is False
    forward = check_forward_invariance(flow, disc, points, 10.0, interior=INTERIOR)
    assert forward.passed
    assert forward.details["all_C"] is True


def test_focus_below_the_line_is_not_forward_invariant_through_exit_points():
    flow = builtin_flow("affine_focus", lam=1.0, mu=1.0, p=-1.0)
    lower = make_halfplane("lower", transversal=True)
    points = lower.boundary.point(np.linspace(-3.0, 3.0, 33))
    result = check_forward_invariance(flow, lower, points, 30.0)
    assert result.passed, result.violations
    assert result.details["labels"] == ["A-1", "C"]
    assert result.details["all_C"] is False
    assert result.details["direct_invariant"] is False
    assert result.details["orbit_witnesses"] > 0


def test_classification_survives_moebius_conjugation():
    flow, disc = builtin_flow("exmap"), make_disc()
    moebius = MoebiusMap(np.array([[2.0, 1.0], [0.0, 1.0]]))
    moved_flow, moved_disc = moebius_conjugate(flow, moebius), moebius_image(disc, moebius)
    points = unit_circle((np.arange(16) + 0.25) / 16)
    plain = classify_many(flow, disc, points, HORIZON, threads=1)
    moved = classify_many(moved_flow, moved_disc, moebius.apply_points(points), HORIZON,
                          threads=1)
    assert [bt.label for bt in moved] == [bt.label for bt in plain]
