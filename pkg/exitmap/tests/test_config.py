import json

import pytest

from exitmap.config import Config, ConfigError, Tolerances


def test_ladder_starts_at_ladder_start_and_shrinks_by_ratio():
    tol = Tolerances()
    ladder = tol.ladder()
    assert len(ladder) == tol.ladder_rungs
    assert ladder[0] == pytest.approx(1e-2)
    assert ladder[1] == pytest.approx(2.5e-3)
    assert all(a > b for a, b in zip(ladder, ladder[1:]))


def test_merged_applies_overrides_without_touching_the_original():
    base = Tolerances()
    tuned = base.merged({"boundary": 1e-7, "graze_probes": [1e-3, 1e-2]})
    assert tuned.boundary == 1e-7
    assert tuned.graze_probes == (1e-3, 1e-2)
    assert base.boundary == 1e-9


def test_merged_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="no_such_knob"):
        Tolerances().merged({"no_such_knob": 1.0})


def test_from_file_layers_overrides_on_top_of_base(tmp_path):
    path = tmp_path / "tol.json"
    path.write_text(json.dumps({"horizon": 12.5}), encoding="utf-8")
    base = Tolerances().merged({"merge": 1e-4})
    loaded = Tolerances.from_file(path, base)
    assert loaded.horizon == 12.5
    assert loaded.merge == 1e-4


def test_from_file_requires_a_json_object(tmp_path):
    path = tmp_path / "tol.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        Tolerances.from_file(path)


def test_from_file_reports_unreadable_file(tmp_path):
    with pytest.raises(ConfigError, match="Cannot read"):
        Tolerances.from_file(tmp_path / "missing.json")


def test_validate_accepts_sane_config():
    assert Config(threads=2, log_level="INFO").validate() == []


def test_validate_flags_bad_threads_level_and_ladder():
    cfg = Config(threads=0, log_level="LOUD", tolerances=Tolerances(ladder_ratio=1.5))
    issues = cfg.validate()
    assert any("EXITMAP_THREADS" in issue for issue in issues)
    assert any("LOUD" in issue for issue in issues)
    assert any("ladder_ratio" in issue for issue in issues)
