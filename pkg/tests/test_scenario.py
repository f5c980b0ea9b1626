import json
from importlib import resources

import jsonschema
import pytest

from hamalg.scenario import (ScenarioError, bundled_names, bundled_path, load_scenario,
                             loads_scenario)

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

BASE = bundled_path("rotation_R2").read_text()


def schema(name):
    return json.loads(resources.files("hamalg").joinpath("schema", name).read_text())


def test_bundled_library():
    assert set(bundled_names()) == {"rotation_R2", "so3_coadjoint", "twisted_H_R3",
                                    "broken_pi_R3", "quasi_poisson_torus", "gdsm_cayley"}


def test_rotation_loads():
    sc = load_scenario("rotation_R2")
    assert (sc.dim, sc.rank) == (2, 1)
    assert sc.momentum_data() is not None


def test_load_by_path(tmp_path):
    p = tmp_path / "r.toml"
    p.write_text(BASE)
    assert load_scenario(str(p)).name == "rotation_R2"


def test_missing_file():
    with pytest.raises(ScenarioError, match="file not found"):
        load_scenario("/nonexistent/x.toml")


@pytest.mark.parametrize("name", ["rotation_R2", "so3_coadjoint", "twisted_H_R3",
                                  "broken_pi_R3", "quasi_poisson_torus", "gdsm_cayley"])
def test_bundled_files_match_schema(name):
    data = tomllib.loads(bundled_path(name).read_text())
    jsonschema.validate(data, schema("scenario.schema.json"))


@pytest.mark.parametrize("old,new,line,key,msg", [
    ('rho = [["-x2", "x1"]]', 'rho = [["-x2", "x3"]]', 21, "algebroid.rho", "dangling reference"),
    ('[checks]', '[checks]\nfoo = 1', 39, "checks.foo", "unknown option"),
    ('omega = "omega"', 'omega = "nope"', 33, "geometry.omega", "not declared"),
    ('rho = [["-x2", "x1"]]', 'rho = [["-x2", "x1", "0"]]', 21, "algebroid.rho",
     "dimension mismatch"),
    ('"1,2" = "1"', '"1,2" = "1 +"', 12, "fields.omega.components", "cannot parse expression"),
])
def test_loader_diagnostics(old, new, line, key, msg):
    with pytest.raises(ScenarioError) as ei:
        loads_scenario(BASE.replace(old, new), "s.toml")
    e = ei.value
    assert (e.line, e.key) == (line, key)
    assert str(e).startswith(f"s.toml:{line}: {key}:") and msg in str(e)


def test_toml_syntax_error_has_line():
    with pytest.raises(ScenarioError) as ei:
        loads_scenario(BASE.replace("rank = 1", "rank = = 1"), "s.toml")
    assert ei.value.line == 20 and "parse error" in str(ei.value)


def test_schema_rejects_unknown_table():
    data = tomllib.loads(BASE + "\n[extra]\nx = 1\n")
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(data, schema("scenario.schema.json"))
