import numpy as np
import pytest

from exitmap.core.flow_core import (
    FlowError,
    HomeomorphismError,
    Homeomorphism2D,
    MoebiusMap,
    RotationFlow,
    builtin_flow,
    conjugate_flow,
    flow_is_global,
    group_law_residual,
    moebius_conjugate,
    random_probes,
    scaling,
    shear,
)


def test_affine_focus_satisfies_the_group_law():
    flow = builtin_flow("affine_focus", lam=1.0, mu=1.0, p=1.0)
    report = group_law_residual(flow, random_probes(np.random.default_rng(7), 25))
    assert report.checked == 25
    assert report.max_residual < 1e-8


def test_gravity_group_law_and_closed_form():
    flow = builtin_flow("gravity", g=1.0)
    assert np.allclose(flow.evaluate(2.0, (1.0, 0.0)), (-1.0, 0.0), atol=1e-12)
    report = group_law_residual(flow, random_probes(np.random.default_rng(3), 10))
    assert report.max_residual < 1e-10


def test_rotation_returns_to_start_after_one_period():
    flow = RotationFlow()
    assert flow.period == pytest.approx(2.0)
    p = np.array([0.3, -1.2])
    assert np.allclose(flow.evaluate(2.0, p), p, atol=1e-12)
    assert np.allclose(flow.evaluate(1.0, p), -p, atol=1e-12)


def test_exmap_closed_form_stretches_x_and_contracts_y():
    flow = builtin_flow("exmap")
    assert np.allclose(flow.evaluate(1.0, (1.0, 1.0)), (np.e, 1 / np.e), atol=1e-12)


def test_integrated_twin_matches_the_closed_form():
    closed = builtin_flow("exmap")
    integrated = builtin_flow("exmap", integrate=True)
    for t in (0.5, 1.0, 1.7):
        assert np.allclose(integrated.evaluate(t, (0.4, 0.9)), closed.evaluate(t, (0.4, 0.9)),
                           atol=1e-7)


def test_polynomial_field_integrates_a_linear_system():
    terms = {"x": [(1.0, 1, 0)], "y": [(-1.0, 0, 1)]}
    flow = builtin_flow("polynomial", terms=terms)
    assert np.allclose(flow.evaluate(1.0, (1.0, 1.0)), (np.e, 1 / np.e), atol=1e-7)


def test_unknown_builtin_flow_is_rejected():
    with pytest.raises(FlowError, match="Unknown builtin flow"):
        builtin_flow("lorenz")


def test_bad_builtin_parameters_are_reported_as_flow_errors():
    with pytest.raises(FlowError, match="Bad parameters"):
        builtin_flow("exmap", speed=2.0)


def test_cayley_sends_unit_disc_to_lower_half_plane():
    cayley = MoebiusMap.cayley()
    assert abs(cayley(-1.0)) < 1e-15
    assert not np.isfinite(cayley(1.0))
    inside = cayley(np.array([0.0, 0.3 + 0.2j, -0.5j]))
    assert np.all(inside.imag < 0)
    on_circle = cayley(np.exp(1j * np.array([0.4, 1.9, 3.0])))
    assert np.allclose(on_circle.imag, 0.0, atol=1e-12)


def test_moebius_inverse_and_points_at_infinity():
    cayley = MoebiusMap.cayley()
    z = np.array([0.2 + 0.1j, -0.7j, 2.0])
    assert np.allclose(cayley.inverse()(cayley(z)), z)
    pts = cayley.apply_points(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert np.isnan(pts[0]).all()
    assert np.allclose(pts[1], (0.0, -1.0))


def test_shear_round_trips_and_conjugates_translation():
    h = shear(lambda x: 0.25 * np.sin(np.pi * x), "sine")
    assert h.check() < 1e-12
    flow = conjugate_flow(builtin_flow("translation"), h)
    p = h(np.array([0.3, 0.5]))
    expected = h(np.array([1.3, 0.5]))
    assert np.allclose(flow.evaluate(1.0, p), expected, atol=1e-12)


def test_inconsistent_homeomorphism_fails_its_check():
    broken = Homeomorphism2D(lambda p: 2.0 * p, lambda p: p, "broken")
    with pytest.raises(HomeomorphismError):
        broken.check()


def test_orbit_samples_many_times_at_once():
    orbit = builtin_flow("exmap").orbit((1.0, 1.0))
    assert np.allclose(orbit([0.0, np.log(2.0)]), [[1.0, 1.0], [2.0, 0.5]])


def test_scaling_conjugation_doubles_rotation_orbits():
    doubled = conjugate_flow(RotationFlow(), scaling(2.0))
    assert np.allclose(doubled.evaluate(1.0, (2.0, 0.0)), (-2.0, 0.0), atol=1e-12)
    with pytest.raises(HomeomorphismError):
        scaling(0.0)


def test_moebius_conjugate_satisfies_the_defining_identity(caplog):
    rotation, cayley = RotationFlow(), MoebiusMap.cayley()
    with caplog.at_level("WARNING"):
        moved = moebius_conjugate(rotation, cayley)
    assert "not an equilibrium" in caplog.text
    z = np.array([0.5, 0.0])
    lhs = moved.evaluate(0.5, cayley.apply_points(z))
    rhs = cayley.apply_points(rotation.evaluate(0.5, z))
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_identity_moebius_map_leaves_the_flow_unchanged():
    flow = builtin_flow("sink")
    same = moebius_conjugate(flow, MoebiusMap.identity())
    assert np.allclose(same.evaluate(0.7, (0.3, -0.4)), flow.evaluate(0.7, (0.3, -0.4)))


def test_linear_flows_are_global():
    assert flow_is_global(builtin_flow("exmap"))
    assert flow_is_global(RotationFlow())
