import json

import pytest
from pydantic import ValidationError

from exitmap.core.flow_core import FlowKind
from exitmap.core.geometry import Location
from exitmap.scenarios import (
    BUILTIN_SCENARIOS,
    NEGATIVE_CONTROLS,
    FlowSpec,
    HybridSpec,
    RegionSpec,
    Scenario,
    ScenarioError,
    builtin_scenario,
    dump_scenario,
    load_scenario,
    named_homeomorphism,
    scenario_schema,
)


def test_builtin_accepts_positional_and_keyword_arguments():
    affine = builtin_scenario("affine(-1)")
    assert affine.name == "affine(p=-1)"
    assert affine.flow.params["p"] == -1.0
    ball = builtin_scenario("bouncing_ball(r=0.3)")
    assert ball.hybrid.reset.r == 0.3
    assert ball.hybrid.horizon == pytest.approx(2 / 0.7 + 10)


def test_every_builtin_resolves_with_its_defaults():
    for name in BUILTIN_SCENARIOS:
        assert builtin_scenario(name).name.startswith(name)


def test_negative_controls_are_registered():
    assert set(NEGATIVE_CONTROLS) <= set(BUILTIN_SCENARIOS)


@pytest.mark.parametrize("name", ["nope", "affine(q=2)", "affine(one)", "exmap(", "rotation(3)"])
def test_unknown_or_badly_called_builtins_raise(name):
    with pytest.raises(ScenarioError):
        builtin_scenario(name)


def test_flow_without_region_is_rejected():
    with pytest.raises(ValidationError, match="region"):
        Scenario(name="half", flow=FlowSpec(builtin="exmap"))


def test_empty_scenario_is_rejected():
    with pytest.raises(ValidationError, match="nothing to compute"):
        Scenario(name="empty")


def test_unknown_builtin_flow_is_rejected():
    with pytest.raises(ValidationError, match="unknown builtin flow"):
        FlowSpec(builtin="warp_drive")


def test_hybrid_needs_exactly_one_reset_source():
    flow = FlowSpec(builtin="rotation")
    with pytest.raises(ValidationError, match="exactly one"):
        HybridSpec(flow=flow)
    with pytest.raises(ValidationError, match="exactly one"):
        HybridSpec(flow=flow, reset={"kind": "oscillator"}, lower_flow=flow)


def test_moebius_region_needs_its_coefficients():
    with pytest.raises(ValidationError, match="four complex"):
        RegionSpec(kind="moebius_image", base=RegionSpec(kind="disc"))


def test_moebius_image_of_the_disc_is_the_lower_half_plane():
    spec = RegionSpec(kind="moebius_image", base=RegionSpec(kind="disc"),
                      matrix=[(0, 1), (0, 1), (1, 0), (-1, 0)])
    region = spec.build()
    assert region.locate((0.0, -1.0)) is Location.INSIDE
    assert region.locate((0.0, 2.0)) is Location.OUTSIDE


def test_extra_fields_are_forbidden():
    with pytest.raises(ValidationError):
        FlowSpec(builtin="exmap", speed=2)


def test_load_scenario_reports_invalid_files(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"name": "bad", "flow": {"builtin": "exmap"}}), encoding="utf-8")
    with pytest.raises(ScenarioError, match="invalid"):
        load_scenario(path)
    with pytest.raises(ScenarioError, match="Cannot read"):
        load_scenario(tmp_path / "missing.json")


def test_dumped_scenario_loads_back(tmp_path):
    original = builtin_scenario("affine(p=0.5)")
    path = tmp_path / "affine.json"
    path.write_text(dump_scenario(original), encoding="utf-8")
    assert load_scenario(path) == original


def test_schema_describes_the_top_level_sections():
    schema = scenario_schema()
    for key in ("flow", "region", "hybrid", "realize", "synthetic", "tolerances"):
        assert key in schema["properties"]


def test_scenario_tolerances_override_the_defaults():
    sc = builtin_scenario("exmap")
    sc = sc.model_copy(update={"tolerances": {"horizon": 7.5}})
    assert sc.tolerance_set().horizon == 7.5


def test_flow_spec_builds_conjugated_flows():
    flow = FlowSpec(builtin="translation", conjugacy="sine_shear").build()
    assert flow.kind is FlowKind.CONJUGATED


def test_unknown_conjugacy_raises():
    with pytest.raises(ScenarioError, match="Unknown conjugacy"):
        named_homeomorphism("twist")
