# PLATECELL
# This test module is used to test the generic helper modules (logging, config, generic helpers) used by platecell.py.

import json
import os

import mock
import pytest

import lib.config_helper as config_helper
import lib.generic_helper as generic_helper
import lib.logging_helper as logging_helper
from lib.class_helper import ConfigError, MacroMode, MaterialError, ValidationError

BASE_CONFIG = {
    "schema_version": 1,
    "materials": {"matrix": {"E": 2.0, "nu": 0.36}, "fiber": {"E": 170.0, "nu": 0.3}},
    "cell": {
        "kind": "fiber",
        "layers": 3,
        "radius": 0.45,
        "gap": 0.1,
        "cover": 0.1,
        "h1": 1.1,
        "h2": 3.0,
        "matrix_material": "matrix",
        "inclusion_material": "fiber",
    },
    "resolution": [4, 8, 16],
    "modes": ["11:0", {"mode": "22:1", "magnitude": 0.5}],
}


def write_config(directory, cfg=None, text=None):
    path = os.path.join(str(directory), "run.json")
    with open(path, "w") as config_file:
        config_file.write(text if text is not None else json.dumps(cfg if cfg is not None else BASE_CONFIG))
    return path


def test_logger():
    """Tests the logger helper and its process-wide defaults.

    Args:
        None

    Returns:
        None
    """
    try:
        mlog = logging_helper.Log("test_platecell_lib", log_level_stdout="INFO")
        mlog.info("Test message")
        mlog.set_level("DEBUG")
        mlog.debug("Test message")
    except Exception as e:
        pytest.fail("The logger could not be used: {}".format(e))

    previous = logging_helper.get_defaults()
    try:
        logging_helper.set_defaults(log_level_stdout="ERROR")
        assert logging_helper.get_defaults()["log_level_stdout"] == "ERROR", "Default level not set"
        follower = logging_helper.Log("test_platecell_lib_defaults")
        assert follower.uses_defaults, "Logger without levels does not follow the defaults"
        assert follower.logger.handlers[0].level == 40, "Default level not applied to the stream handler"
    finally:
        logging_helper.set_defaults(**previous)


def test_config_loading(tmp_path):
    """Tests the config loading, the defaults and the typed run config.

    Args:
        tmp_path (Path): pytest temporary directory

    Returns:
        None
    """
    try:
        config = config_helper.Config(write_config(tmp_path))
    except Exception as e:
        pytest.fail("The config could not be loaded: {}".format(e))

    cfg = config.cfg
    assert cfg["solver"]["method"] == "cg", "Solver defaults not filled in"
    assert cfg["analysis"]["threshold"] == 0.05, "Analysis defaults not filled in"
    assert cfg["modes"][0] == {"mode": "11:0", "magnitude": 1.0}, "Modes not normalized"

    run_config = config.run_config()
    assert run_config.modes == [MacroMode("11", 0), MacroMode("22", 1, 0.5)], f"Wrong modes: {run_config.modes}"
    assert run_config.resolution == (4, 8, 16), "Wrong resolution"
    assert len(run_config.cell.layer_centers()) == 3, "Wrong cell"
    assert run_config.analysis["tile"] == (1, 1), "Tile not converted"

    overridden = config_helper.load_config(write_config(tmp_path), {"resolution": [4, 8, 20], "analysis.tile": [2, 1]})
    assert overridden.resolution == (4, 8, 20), "Override not applied"
    assert overridden.analysis["tile"] == (2, 1), "Nested override not applied"


def test_config_validation(tmp_path):
    """Tests that invalid values are detected and reported together.

    Args:
        tmp_path (Path): pytest temporary directory

    Returns:
        None
    """
    mlog = logging_helper.Log("test_platecell_lib")
    cfg = config_helper.normalize_config(BASE_CONFIG)
    assert config_helper.check_config(cfg, mlog) == [], "The config is not valid"

    cfg["logging"]["log_level_file"] = "some_invalid_value"
    cfg["resolution"] = [4, 8, 1]
    problems = config_helper.check_config(cfg, mlog)
    assert len(problems) == 2, f"Not every problem was reported: {problems}"

    cfg = config_helper.normalize_config(BASE_CONFIG)
    cfg["modes"] = ["23:0"]
    assert any("modes" in problem for problem in config_helper.check_config(cfg, mlog)), "Invalid mode accepted"

    missing_modes = {key: value for key, value in BASE_CONFIG.items() if key != "modes"}
    with pytest.raises(ConfigError):
        config_helper.load_config(write_config(tmp_path, missing_modes))

    incompressible = json.loads(json.dumps(BASE_CONFIG))
    incompressible["materials"]["matrix"]["nu"] = 0.5
    with pytest.raises(MaterialError):
        config_helper.load_config(write_config(tmp_path, incompressible))


def test_config_errors(tmp_path):
    """Tests missing files, syntax errors and environment variables.

    Args:
        tmp_path (Path): pytest temporary directory

    Returns:
        None
    """
    with pytest.raises(ConfigError):
        config_helper.Config(str(tmp_path / "missing.json"))

    try:
        config_helper.Config(write_config(tmp_path, text='{"schema_version": 1,\n  "materials": {'))
        pytest.fail("A broken config was accepted")
    except ConfigError as e:
        assert "line" in str(e), f"Parse error without a position: {e}"

    with_env = json.loads(json.dumps(BASE_CONFIG))
    with_env["materials"]["matrix"]["E"] = "$PLATECELL_TEST_MATRIX_E"
    with mock.patch.dict(os.environ, {"PLATECELL_TEST_MATRIX_E": "3.5"}):
        run_config = config_helper.load_config(write_config(tmp_path, with_env))
    assert run_config.materials["matrix"].youngs_modulus == 3.5, "Environment variable not replaced"

    with mock.patch.dict(os.environ, {}, clear=True):
        with pytest.raises(ConfigError):
            config_helper.load_config(write_config(tmp_path, with_env))


def test_config_saving(tmp_path):
    """Tests the config saving function.

    Args:
        tmp_path (Path): pytest temporary directory

    Returns:
        None
    """
    cfg = config_helper.Config(write_config(tmp_path)).cfg
    path = config_helper.save_config(cfg, str(tmp_path / "saved" / "config.json"))
    with open(path, "r") as saved:
        text = saved.read()
    assert text == config_helper.dump_config(cfg), "Saved config differs from the dump"
    assert json.loads(text) == config_helper.normalize_config(cfg), "Saved config is not the normalized config"
    assert config_helper.Config(path).cfg == cfg, "Saved config does not load back"

    cfg["logging"]["log_level_file"] = "some_invalid_value"
    with pytest.raises(ConfigError):
        config_helper.save_config(cfg, str(tmp_path / "invalid.json"))


def test_generic_helper():
    """Tests the generic helper functions.

    Args:
        None

    Returns:
        None
    """
    nested = {"a": {"b": 1}}
    generic_helper.dict_set(nested, "x.y", 2)
    generic_helper.dict_set(nested, "a.b", 3)
    assert nested == {"a": {"b": 3}, "x": {"y": 2}}, "dict_set failed"
    assert generic_helper.del_none_from_dict({"a": None, "b": {"c": None, "d": 1}}) == {"b": {"d": 1}}, "del_none_from_dict failed"

    assert generic_helper.parse_pair("16x44x96") == (16, 44, 96), "parse_pair failed"
    with pytest.raises(ValueError):
        generic_helper.parse_pair("2xtwo")

    with mock.patch.dict(os.environ, {"PLATECELL_THREADS": "3"}):
        assert generic_helper.worker_count() == 3, "Thread cap ignored"
    with mock.patch.dict(os.environ, {"PLATECELL_THREADS": "0"}):
        assert generic_helper.worker_count() == 1, "Worker count below 1"
    assert generic_helper.parallel_map(lambda x: x * x, [1, 2, 3], workers=2) == [1, 4, 9], "parallel_map lost the order"


def test_validation_error():
    """Tests that validation errors keep every violation.

    Args:
        None

    Returns:
        None
    """
    error = ValidationError(["first", "second"])
    assert error.violations == ["first", "second"], "Violations lost"
    assert str(error) == "first; second", "Violations not joined in the message"
