import json

import pytest

import main
from src import config as cfg
from src import pipeline, utils
from src.exact_homology import InvariantFactors

SMALL = {"p": 2, "m_max": 1, "n": 2, "r": 2, "K": 2, "suites": ["relations"]}


@pytest.mark.parametrize("changes,path", [
    ({"r": 3}, "config.r"),
    ({"foo": 1}, "config.foo"),
    ({"p": 4}, "config.p"),
    ({"suites": ["comparison"], "D": 1}, "config.D"),
    ({"suites": ["relations", "bogus"]}, "config.suites[1]"),
    ({"K": True}, "config.K"),
    ({"gauge_c_max": "x/y"}, "config.gauge_c_max"),
])
def test_invalid_configs_name_the_field(changes, path):
    with pytest.raises(cfg.ConfigError) as err:
        cfg.RunConfig.from_dict({**SMALL, **changes})
    assert err.value.path == path


def test_missing_field():
    data = dict(SMALL)
    del data["K"]
    with pytest.raises(cfg.ConfigError) as err:
        cfg.RunConfig.from_dict(data)
    assert err.value.path == "config.K"


def test_overrides_and_defaults():
    config = cfg.RunConfig.from_dict(SMALL, {"seed": 7, "suites": "exactness", "output": None})
    assert config.seed == 7
    assert config.suites == ("exactness",)
    assert config.degree_bound == config.K
    assert config.as_dict()["gauge_epsilon_floor"] == "1/64"
    full = cfg.RunConfig.from_dict({**SMALL, "suites": list(reversed(cfg.SUITES))})
    assert full.ordered_suites() == cfg.SUITES


def test_load_run_config_errors(tmp_path):
    with pytest.raises(cfg.ConfigError) as err:
        cfg.load_run_config(tmp_path / "absent.json")
    assert err.value.path == "config"
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(cfg.ConfigError):
        cfg.load_run_config(broken)


def test_versioned_paths(tmp_path):
    target = tmp_path / "drw_report.json"
    first = utils.get_next_version_path(target)
    assert first.name == "drw_report_v1.json"
    first.write_text("{}", encoding="utf-8")
    assert utils.get_next_version_path(first).name == "drw_report_v2.json"


def test_invariant_table():
    df = utils.invariant_table({"X": {0: InvariantFactors((2, 1)), 1: InvariantFactors()}}, 3)
    assert list(df.columns) == ["complex", "degree", "length", "generators", "factors"]
    assert df.loc[0, "factors"] == "Z/3^2 + Z/3^1"
    assert df.loc[1, "factors"] == "0"


def test_canonical_json_is_key_order_independent():
    assert utils.canonical_json({"b": 1, "a": [1, 2]}) == utils.canonical_json({"a": (1, 2), "b": 1})


@pytest.fixture(scope="module")
def relations_report():
    return pipeline.run(cfg.RunConfig.from_dict(SMALL))


def test_relations_run_passes(relations_report):
    assert relations_report.passed
    assert relations_report.exit_status == 0
    suite = relations_report.suite("relations")
    assert suite.checks
    assert {c["check"] for c in suite.checks} >= {"d_squared", "FV=p", "leibniz", "R(Fx)=FR(x)"}
    assert len(relations_report.slice_hashes) == 3


def test_report_is_deterministic(relations_report):
    again = pipeline.run(cfg.RunConfig.from_dict(SMALL))
    assert again.digest() == relations_report.digest()
    assert "timing" not in relations_report.as_dict(include_timing=False)


def test_save_and_render(relations_report, tmp_path):
    path = pipeline.save_report(relations_report, tmp_path / "report.json")
    doc = json.loads(path.read_text(encoding="utf-8"))
    assert doc["passed"] is True
    assert doc["schema_version"] == cfg.REPORT_SCHEMA_VERSION
    assert "relations" in doc["suites"]
    text = pipeline.render_tables(relations_report)
    assert "relations" in text
    assert "Z/2^1" in text


def test_saved_reports_are_byte_identical(relations_report, tmp_path):
    again = pipeline.run(cfg.RunConfig.from_dict(SMALL))
    first = pipeline.save_report(relations_report, tmp_path / "a.json")
    second = pipeline.save_report(again, tmp_path / "b.json")
    assert first.read_bytes() == second.read_bytes()
    assert "timing" not in json.loads(first.read_text(encoding="utf-8"))


def test_bounded_exponents():
    assert utils.bounded_exponents(2, 1) == [(0, 0), (0, 1), (1, 0)]
    assert utils.bounded_exponents(0, 3) == [()]
    grid = utils.bounded_exponents(3, 2)
    assert len(grid) == len(set(grid)) == 10


def test_main_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**SMALL, "p": 6}), encoding="utf-8")
    assert main.main(["run", "--config", str(bad)]) == 2

    good = tmp_path / "good.json"
    good.write_text(json.dumps(SMALL), encoding="utf-8")
    out = tmp_path / "out.json"
    assert main.main(["run", "--config", str(good), "--out", str(out), "--format", "table"]) == 0
    assert out.exists()
