import numpy as np
import pytest

from exitmap.core.flow_core import RotationFlow, builtin_flow, identity_map
from exitmap.modules.hybrid import (
    HybridError,
    HybridTrajectory,
    ImpactingSystem,
    JumpRecord,
    NormalFormError,
    NotInducedError,
    Policy,
    ResetMap,
    ResetUndefinedError,
    Termination,
    ZenoStatus,
    check_conjugacy_invariance,
    detect_zeno,
    first_in_time_scenario,
    induced_system,
    normal_form_conjugate,
    orbits_between,
    poincare_composition,
    simulate,
    sliding_set,
)
from exitmap.scenarios import builtin_scenario


def _ball(r):
    return ImpactingSystem(ResetMap.restitution(r), builtin_flow("gravity", g=1.0))


def _oscillator(mu):
    return ImpactingSystem(ResetMap.oscillator(mu), RotationFlow())


@pytest.mark.parametrize("r", [0.3, 0.5, 0.8])
def test_bouncing_ball_is_zeno_with_geometric_accumulation_time(r):
    traj = simulate(_ball(r), (1.0, 0.0), 2 / (1 - r) + 10, max_events=400)
    assert traj.termination is Termination.ZENO
    assert traj.zeno.status is ZenoStatus.ZENO
    assert traj.zeno.accumulation_time == pytest.approx(2 / (1 - r), abs=1e-3)


def test_bouncing_ball_first_impact_reverses_and_damps_velocity():
    traj = simulate(_ball(0.5), (1.0, 0.0), 20.0, max_events=400)
    first = traj.jumps[0]
    assert first.time == pytest.approx(2.0, abs=1e-8)
    assert np.allclose(first.pre, (-1.0, 0.0), atol=1e-8)
    assert np.allclose(first.post, (0.5, 0.0), atol=1e-8)
    gaps = np.diff(traj.jump_times)
    assert gaps[:3] == pytest.approx([1.0, 0.5, 0.25], abs=1e-7)


def test_impact_oscillator_jumps_once_per_half_period():
    traj = simulate(_oscillator(1.0), (-1.0, 0.0), 9.5)
    assert traj.termination is Termination.HORIZON
    assert traj.jump_times == pytest.approx(list(range(10)), abs=1e-7)
    assert traj.zeno.status is ZenoStatus.NOT_ZENO


def test_impact_oscillator_poincare_map_fixes_minus_one():
    step = poincare_composition(_oscillator(1.0), -1.0, 5.0)
    assert step.value == pytest.approx(-1.0, abs=1e-6)
    assert step.flag == "equilibrium or periodic"


def test_weak_oscillator_orbits_stay_between_the_first_two_hits():
    result = orbits_between(_oscillator(0.5), -1.0, 10.0)
    assert result.passed, result.violations
    assert result.details["z"] == pytest.approx(-0.5, abs=1e-6)


@pytest.mark.parametrize("mu", [1.0, 2.0, 5.0])
def test_normal_form_conjugates_the_reset_to_negation(mu):
    system = _oscillator(mu)
    nf = normal_form_conjugate(system)
    assert nf.max_residual < 1e-6
    check = check_conjugacy_invariance(system, nf.system, nf.H)
    assert check.passed, check.violations


@pytest.mark.parametrize("mu", [2.0, 5.0])
def test_normal_form_maps_the_wall_point_to_itself(mu):
    nf = normal_form_conjugate(_oscillator(mu))
    assert abs(nf.shift) < 1e-12
    assert nf.H(np.array([[0.0, 0.5]]))[0] == pytest.approx([0.0, 0.5], abs=1e-9)
    assert nf.H(np.array([[-2.0, 0.0]]))[0, 0] == pytest.approx(-2.0, abs=1e-12)
    assert nf.H(np.array([[1.0, 0.0]]))[0, 0] == pytest.approx(1.0 / mu, abs=1e-9)


def test_normal_form_of_the_identity_reset_is_refused():
    identity = ImpactingSystem(ResetMap("identity", lambda x: np.asarray(x)), RotationFlow())
    with pytest.raises(NormalFormError):
        normal_form_conjugate(identity)


def test_normal_form_needs_a_total_reset():
    with pytest.raises(NormalFormError):
        normal_form_conjugate(_ball(0.5))


def test_comsin_shear_lower_flow_does_not_induce_a_system():
    spec = builtin_scenario("zeno_shear").hybrid
    with pytest.raises(NotInducedError) as info:
        spec.build()
    assert any(abs(x) < 1e-9 for x in info.value.report["unresolved"])


def test_reset_outside_its_domain_raises():
    with pytest.raises(ResetUndefinedError):
        ResetMap.restitution(0.5).at(1.0)


def test_restitution_coefficient_must_lie_in_unit_interval():
    with pytest.raises(HybridError):
        ResetMap.restitution(1.5)


def test_prefer_jump_policy_still_flows_from_fixed_reset_points():
    traj = simulate(_oscillator(1.0), (1.0, 0.0), 3.0, policy=Policy.PREFER_JUMP)
    assert traj.jumps[0].time == pytest.approx(1.0, abs=1e-7)


def test_detect_zeno_is_inconclusive_with_few_events():
    traj = HybridTrajectory(np.zeros(2), Policy.PREFER_SLIDE)
    traj.jumps = [JumpRecord(n, float(n), np.zeros(2), np.zeros(2)) for n in range(3)]
    assert detect_zeno(traj).status is ZenoStatus.INCONCLUSIVE


def _halving_jumps(count):
    traj = HybridTrajectory(np.zeros(2), Policy.PREFER_SLIDE)
    times = [2.0 * (1.0 - 0.5**k) for k in range(1, count + 1)]
    traj.jumps = [JumpRecord(n, t, np.zeros(2), np.zeros(2)) for n, t in enumerate(times)]
    return traj


def test_detect_zeno_estimates_the_geometric_accumulation_time():
    verdict = detect_zeno(_halving_jumps(10))
    assert verdict.status is ZenoStatus.ZENO
    assert verdict.accumulation_time == pytest.approx(2.0, abs=1e-9)


def test_accumulation_past_the_horizon_is_not_zeno():
    verdict = detect_zeno(_halving_jumps(10), horizon=1.999)
    assert verdict.status is ZenoStatus.NOT_ZENO
    assert verdict.accumulation_time == pytest.approx(2.0, abs=1e-9)
    assert detect_zeno(_halving_jumps(10), horizon=2.5).status is ZenoStatus.ZENO


def test_cooling_water_leaves_and_reenters_a_narrow_band():
    report = first_in_time_scenario(0.5, horizon=50.0)
    assert report.status == "ok"
    assert report.exit_time > 0
    assert report.return_time > 0


def test_cooling_water_never_leaves_a_wide_band():
    report = first_in_time_scenario(100.0, horizon=50.0)
    assert report.status == "never-exits"
    assert report.total is None


def test_cooling_rejects_non_positive_band():
    with pytest.raises(HybridError):
        first_in_time_scenario(0.0)


def test_rotation_below_the_line_induces_the_elastic_reset():
    xs = np.linspace(-2.95, 2.95, 60)
    system = induced_system(RotationFlow(), RotationFlow(), xs=xs)
    assert system.reset(np.array([-1.0, 1.0])) == pytest.approx([1.0, 1.0], abs=1e-6)
    assert system.reset.domain == pytest.approx((-2.95, 2.95))


def test_clockwise_flow_above_makes_fixed_reset_points_slide():
    system = ImpactingSystem(ResetMap.oscillator(1.0), RotationFlow(-np.pi))
    assert sliding_set(system, [-1.0, 0.5, 1.0]) == [0.5, 1.0]
    traj = simulate(system, (0.5, 0.0), 2.0)
    assert traj.jumps == []
    assert [seg.mode for seg in traj.segments] == ["sliding"]
    assert traj.termination is Termination.HORIZON


def test_identity_conjugacy_detects_different_resets():
    check = check_conjugacy_invariance(_oscillator(1.0), _oscillator(2.0), identity_map())
    assert not check.passed
    assert check.details["reset"] > 0.1
