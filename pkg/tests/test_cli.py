import json

import pytest
import yaml

from spectral_tunnel import cli
from spectral_tunnel.errors import ConfigError, SchemaMismatch


def _report(tmp_path):
    with open(tmp_path / "report.json") as fh:
        return json.load(fh)


def _write(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_defaults_and_presets_validate():
    for name in cli.PRESETS:
        cfg = cli.load_config(preset=name)
        assert cfg["experiment"] in cli.EXPERIMENTS


def test_unknown_key_is_rejected(tmp_path):
    with pytest.raises(ConfigError):
        cli.load_config(_write(tmp_path, {"numerics": {"gird": 10}}))
    with pytest.raises(ConfigError):
        cli.load_config(_write(tmp_path, {"bogus": 1}))
    with pytest.raises(ConfigError):
        cli.load_config(preset="no-such-preset")


def test_out_of_range_value_is_rejected(tmp_path):
    with pytest.raises(ConfigError):
        cli.load_config(_write(tmp_path, {"params": {"n": 2}}))
    with pytest.raises(ConfigError):
        cli.load_config(_write(tmp_path, {"numerics": {"profile": "spline"}}))


def test_subcommand_must_match_explicit_experiment(tmp_path):
    with pytest.raises(ConfigError):
        cli.load_config(preset="neck", experiment="lambda1")
    cfg = cli.load_config(_write(tmp_path, {"params": {"gamma": 4.0}}), experiment="lambda1")
    assert cfg["experiment"] == "lambda1" and cfg["params"]["gamma"] == 4.0


def test_bad_config_exit_code(tmp_path):
    path = _write(tmp_path, {"numerics": {"gird": 10}})
    assert cli.main(["neck-check", "--config", path, "--out", str(tmp_path), "--quiet"]) == 2


def test_neck_check_exit_codes(tmp_path):
    assert cli.main(["neck-check", "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert _report(tmp_path / "a")["passed"]
    path = _write(tmp_path, {"numerics": {"profile": "cosh"}})
    assert cli.main(["neck-check", "--config", path, "--out", str(tmp_path / "b"),
                     "--quiet"]) == 1
    report = _report(tmp_path / "b")
    assert not report["passed"]
    assert report["schema_version"] == cli.SCHEMA_VERSION


def test_toy_identity_report(tmp_path):
    assert cli.main(["toy-identity", "--preset", "toy", "--out", str(tmp_path), "--quiet"]) == 0
    names = {c["name"] for c in _report(tmp_path)["checks"]}
    assert any("3" in n for n in names) and any("5" in n for n in names)


def test_green_solve_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["green-solve", "--preset", "green-sphere", "--out", str(a), "--quiet"]) == 0
    assert cli.main(["green-solve", "--preset", "green-sphere", "--out", str(b), "--quiet"]) == 0
    assert cli.compare_baseline(_report(a), _report(b)) == []
    assert (a / "green.csv").exists() or any(p.suffix == ".csv" for p in a.iterdir())
    assert cli.main(["compare", str(a / "report.json"), str(b / "report.json"), "--quiet"]) == 0


def test_compare_baseline_tolerances():
    base = {"schema_version": 1, "scalars": {"x": 1.0, "flag": True, "name": "s"},
            "wall_clock": 3.0}
    near = {"schema_version": 1, "scalars": {"x": 1.0 + 1e-12, "flag": True, "name": "s"},
            "wall_clock": 9.0}
    far = {"schema_version": 1, "scalars": {"x": 1.001, "flag": True, "name": "s"}}
    assert cli.compare_baseline(near, base) == []
    diffs = cli.compare_baseline(far, base)
    assert [d["key"] for d in diffs] == ["scalars.x"]
    assert cli.compare_baseline(far, base, tolerances={"scalars.x": 1e-2}) == []
    with pytest.raises(SchemaMismatch):
        cli.compare_baseline({"schema_version": 2}, base)


def test_compare_exit_codes(tmp_path):
    base = {"schema_version": 1, "scalars": {"x": 1.0}}
    a = _write(tmp_path, base, "a.json")
    b = tmp_path / "b.json"
    b.write_text(json.dumps({"schema_version": 1, "scalars": {"x": 2.0}}))
    c = tmp_path / "c.json"
    c.write_text(json.dumps({"schema_version": 7, "scalars": {"x": 1.0}}))
    (tmp_path / "a.json").write_text(json.dumps(base))
    assert cli.main(["compare", a, a, "--quiet"]) == 0
    assert cli.main(["compare", str(b), a, "--quiet"]) == 1
    assert cli.main(["compare", str(c), a, "--quiet"]) == 2


@pytest.mark.parametrize("raw", ["zero", "0", "-2"])
def test_invalid_worker_count(monkeypatch, raw):
    monkeypatch.setenv(cli.WORKERS_ENV, raw)
    with pytest.raises(ConfigError):
        cli.worker_count()


def test_worker_count_default(monkeypatch):
    monkeypatch.delenv(cli.WORKERS_ENV, raising=False)
    assert cli.worker_count() == 1


def test_locate_flip():
    rows = [(1.5, False), (2.0, False), (2.2, True), (2.5, True)]
    assert cli.locate_flip(rows) == 2.2
    assert cli.locate_flip([(1.5, False)]) is None


def test_lambda1_rejects_open_model(tmp_path):
    path = _write(tmp_path, {"model": {"kind": "euclidean"}})
    assert cli.main(["lambda1", "--config", path, "--out", str(tmp_path), "--quiet"]) == 2


def test_random_test_functions_are_seeded():
    from spectral_tunnel import models
    from spectral_tunnel import warped_geometry as wg
    import numpy as np

    model = models.sphere_model(wg.Params(3, 3.0, 2.0, 0.2))
    r = np.linspace(0, 3, 7)
    a = [f(r) for f in cli.random_test_functions(model, 3, 5)]
    b = [f(r) for f in cli.random_test_functions(model, 3, 5)]
    np.testing.assert_array_equal(a, b)
