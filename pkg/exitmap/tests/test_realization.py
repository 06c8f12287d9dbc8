import numpy as np
import pytest

from exitmap.config import Tolerances
from exitmap.core.flow_core import FlowKind
from exitmap.modules.realization import (
    BracketError,
    CircleMapSpec,
    HypothesisViolation,
    RealizableMapSpec,
    build_disc_realization,
    build_halfplane_realization,
    piecewise_linear_h,
    radial_homeomorphism,
    radial_profile,
    solve_negative_branch,
    verify_disc_realization,
    verify_realization,
)

SAMPLES = np.linspace(-3.0, 0.0, 32)


@pytest.mark.parametrize("spec", [RealizableMapSpec.neg(), RealizableMapSpec.square()],
                         ids=["neg", "square"])
def test_halfplane_realization_reproduces_the_map_with_unit_exit_time(spec):
    rf = build_halfplane_realization(spec)
    assert rf.kind is FlowKind.REALIZATION
    report = verify_realization(rf, SAMPLES, horizon=5.0)
    assert report.max_error < 1e-5
    assert report.max_time_error < 1e-6


def test_positive_axis_points_leave_at_once():
    rf = build_halfplane_realization(RealizableMapSpec.neg())
    report = verify_realization(rf, [0.5, 2.0], horizon=5.0)
    assert report.exit_times == [0.0, 0.0]
    assert report.max_error == 0.0


def test_scaled_neg_realization():
    rf = build_halfplane_realization(RealizableMapSpec.scaled_neg(2.0))
    report = verify_realization(rf, [-2.0, -1.0, -0.25], horizon=5.0)
    assert report.max_error < 1e-5


def test_tabulated_map_is_solved_numerically():
    spec = RealizableMapSpec.tabulated([-4.0, -2.0, 0.0], [3.0, 1.0, 0.0])
    assert spec.inverse_negative([1.0, 2.0]) == pytest.approx([-2.0, -3.0], abs=1e-9)
    report = verify_realization(build_halfplane_realization(spec), [-3.0, -1.0], horizon=5.0)
    assert report.max_error < 1e-5


def test_map_moving_positive_points_violates_the_hypotheses():
    spec = RealizableMapSpec.from_callable(lambda x: np.where(x < 0, -x, 2 * x), "double")
    with pytest.raises(HypothesisViolation) as info:
        build_halfplane_realization(spec)
    assert any(e["probe"] == "identity" and e["x"] == 1.0 for e in info.value.failed)


def test_increasing_negative_branch_violates_the_hypotheses():
    spec = RealizableMapSpec.from_callable(lambda x: np.where(x < 0, x + 1.0, x), "shift")
    with pytest.raises(HypothesisViolation):
        spec.validate()


def test_radial_homeomorphism_round_trips():
    h = radial_homeomorphism(RealizableMapSpec.square())
    pts = np.array([[0.3, -0.4], [-1.5, 0.2], [2.0, 1.0], [0.0, -2.5]])
    assert np.allclose(h.inverse(h(pts)), pts, atol=1e-9)


def test_radial_profile_interpolates_identity_and_map():
    spec = RealizableMapSpec.neg()
    xs = np.array([-2.0, -0.5])
    assert np.allclose(radial_profile(spec, 0.0, xs), -xs)
    assert np.allclose(radial_profile(spec, 1.0, xs), spec.P(xs))


def test_closed_curves_are_closed():
    rf = build_halfplane_realization(RealizableMapSpec.square())
    curve = rf.closed_curve(1.5, 64)
    assert curve.shape == (64, 2)
    assert np.allclose(curve[0], curve[-1], atol=1e-12)


def test_piecewise_linear_h_fixes_the_anchor_points():
    h, h_inv = piecewise_linear_h(1 / 3)
    assert h(np.array([0.0, 1 / 3, 1.0])) == pytest.approx([0.0, 0.5, 1.0])
    u = np.linspace(0.0, 1.0, 9)
    assert h(h_inv(u)) == pytest.approx(u)


@pytest.mark.parametrize("alpha", [1 / 3, 1 / 2])
def test_disc_realization_of_tent_map(alpha):
    dr = build_disc_realization(CircleMapSpec.tent(alpha))
    assert verify_disc_realization(dr, 64, horizon=5.0) < 1e-4


def test_tent_needs_alpha_inside_the_unit_interval():
    with pytest.raises(HypothesisViolation):
        CircleMapSpec.tent(1.0)


def test_negative_branch_without_a_sign_change_raises_bracket_error():
    def lifted(x):
        return np.abs(x) + 1.0

    with pytest.raises(BracketError):
        solve_negative_branch(lifted, 0.5, Tolerances())


def test_negative_branch_solves_the_oscillator_reset():
    def reset(x):
        return np.maximum(-2.0 * np.asarray(x), x)

    assert solve_negative_branch(reset, 3.0, Tolerances()) == pytest.approx(-1.5, abs=1e-9)
