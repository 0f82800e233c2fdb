# PLATECELL
# This helper module is used to provide a valid run config object. To do that it will load a JSON run config
# (JSON is read with the YAML loader, so syntax errors carry a line and column).
# It will also provide explicit functions to check if a config is valid, to fill in defaults and to dump/save
# the normalized config.

import copy
import json
import os
import re

import yaml

import lib.logging_helper as logging_helper
from lib.class_helper import ConfigError, IsotropicMaterial, MacroMode, RunConfig, ValidationError
from lib.generic_helper import dict_set
from lib.materials_helper import build_homogeneous_cell, build_laminate_cell, build_layered_cell

LOG_LEVEL = "CRITICAL"  # The log level of this config loader. Not set by the config, so a broken config still reports its problems.
SCHEMA_VERSION = 1
CELL_KINDS = ["fiber", "channel", "homogeneous", "laminate"]
FIELD_FORMATS = ["vtk", "csv"]
ALIGNMENTS = ["symmetric", "top", "bottom"]
SURFACES = ["top", "bottom"]
REQUIRED_SECTIONS = ["schema_version", "materials", "cell", "resolution", "modes"]

DEFAULTS = {
    "epsilon": 0.01,
    "cell": {
        "h1": 1.1,
        "h2": 3.0,
        "matrix_material": "matrix",
        "inclusion_material": None,
        "layers": None,
        "radius": None,
        "gap": None,
        "cover": None,
        "directions": None,
        "in_plane_pitch": None,
        "thickness": None,
        "stack": None,
    },
    "solver": {"method": "cg", "tolerance": 1e-9, "max_iterations": None, "element": "hex8"},
    "analysis": {
        "threshold": 0.05,
        "informative_threshold": 0.05,
        "pitch": None,
        "tile": [1, 1],
        "alignments": ["symmetric"],
        "surfaces": ["top", "bottom"],
        "strains": {},
        "curvatures": {},
    },
    "outputs": {"directory": "results", "formats": ["csv"], "displacement": False},
    "logging": {"log_level_stdout": "WARNING", "log_level_file": "none", "split_files_by_module": False},
}

mlog = logging_helper.Log("lib.config_helper", log_level=LOG_LEVEL)


class ConfigLoader(yaml.SafeLoader):
    """SafeLoader that also reads JSON floats without a decimal point (e.g. 1e-09) as floats."""


ConfigLoader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)[eE][-+]?[0-9]+$"),
    list("-+0123456789."),
)


class Config:
    """The Config() class is used to provide a valid run config object. It loads the given JSON file,
    replaces environment variables, fills in defaults and checks the result.

    Args:
        path (str): Path of the run config
        overrides (dict): Dot-separated keys -> values applied after loading (e.g. from CLI flags)

    Returns:
        A config object (normalized dict in .cfg)

    Raises:
        ConfigError: If the file is missing, unparsable or invalid
        ValidationError: If the materials or the cell are invalid
    """

    def __init__(self, path, overrides=None):
        self.path = path

        # Check if the config file exists
        if not os.path.isfile(path):
            raise ConfigError(f"config file {path} does not exist")

        # Load the config file
        with open(path, "r") as config_file:
            try:
                cfg = yaml.load(config_file, Loader=ConfigLoader)
            except yaml.YAMLError as e:
                mark = getattr(e, "problem_mark", None)
                where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
                problem = getattr(e, "problem", None) or str(e)
                raise ConfigError(f"{path}: cannot parse config{where}: {problem}")

        if cfg is None:
            raise ConfigError(f"{path}: the config file is empty")
        if not isinstance(cfg, dict):
            raise ConfigError(f"{path}: the config must be an object")

        # Check if an entry in the config file is supposed to be an environment variable
        replace_env_vars(cfg, mlog)

        for key, value in (overrides or {}).items():
            if value is not None:
                dict_set(cfg, key, value)

        self.cfg = normalize_config(cfg)

        problems = check_config(self.cfg, mlog)
        if problems:
            raise ConfigError(problems)

        logging_helper.set_defaults(
            log_level_stdout=self.cfg["logging"]["log_level_stdout"],
            log_level_file=self.cfg["logging"]["log_level_file"],
            split_files_by_module=self.cfg["logging"]["split_files_by_module"],
        )
        self._run_config = build_run_config(self.cfg)

    def run_config(self):
        """Returns the typed RunConfig of the loaded config."""
        return self._run_config


def load_config(path, overrides=None):
    """Loads, validates and returns the RunConfig of a JSON run config."""
    return Config(path, overrides).run_config()


def replace_env_vars(cfg, mlog):
    """Replaces string values of the form '$NAME' by the environment variable NAME (recursively, in place).

    Raises:
        ConfigError: If a referenced environment variable is not set
    """
    items = cfg.items() if isinstance(cfg, dict) else enumerate(cfg)
    for key, value in list(items):
        if isinstance(value, (dict, list)):
            replace_env_vars(value, mlog)
        elif isinstance(value, str) and value.startswith("$"):
            env_var_name = value[1:]
            env_var_value = os.environ.get(env_var_name)
            if env_var_value is None:
                mlog.critical(
                    f"The environment variable '{env_var_name}' used in the config '{key}' is not set. Export it (or remove the '$' before the value) and try again."
                )
                raise ConfigError(f"environment variable {env_var_name} (used by '{key}') is not set")
            try:
                cfg[key] = yaml.load(env_var_value, Loader=ConfigLoader)
            except yaml.YAMLError:
                cfg[key] = env_var_value


def _merge_defaults(cfg, defaults):
    for key, value in defaults.items():
        if key not in cfg:
            cfg[key] = copy.deepcopy(value)
        elif isinstance(value, dict) and value and isinstance(cfg[key], dict):
            _merge_defaults(cfg[key], value)


def _normalize_mode(entry):
    if isinstance(entry, str):
        return {"mode": entry, "magnitude": 1.0}
    if isinstance(entry, dict):
        normalized = dict(entry)
        normalized.setdefault("magnitude", 1.0)
        return normalized
    return entry


def normalize_config(cfg):
    """Returns a copy of the config with every default filled in and the modes in object form."""
    cfg = copy.deepcopy(cfg)
    _merge_defaults(cfg, DEFAULTS)
    if isinstance(cfg.get("modes"), list):
        cfg["modes"] = [_normalize_mode(entry) for entry in cfg["modes"]]
    return cfg


def check_config_log_level(log_level, mlog, name="log level"):
    """Checks if a log level is valid.

    Returns:
        True if the log level is valid, False if not
    """
    if not isinstance(log_level, str) or log_level.upper() not in logging_helper.LOG_LEVELS:
        mlog.critical(f"{name}: {log_level} not one of {logging_helper.LOG_LEVELS[:-1] + ['none']}.")
        return False
    return True


def check_config_bool(bool_var, mlog, name="setting"):
    """Checks if a variable is a valid boolean."""
    if not isinstance(bool_var, bool):
        mlog.critical(f"{name}: {bool_var} is not one of [true, false].")
        return False
    return True


def check_config_int(int_var, mlog, name="setting", minimum=0):
    """Checks if a variable is a valid integer >= minimum."""
    if isinstance(int_var, bool) or not isinstance(int_var, int) or int_var < minimum:
        mlog.critical(f"{name}: {int_var} is not an integer >= {minimum}.")
        return False
    return True


def check_config_float(float_var, mlog, name="setting", positive=True):
    """Checks if a variable is a number (and > 0 if positive)."""
    if isinstance(float_var, bool) or not isinstance(float_var, (int, float)) or (positive and not float_var > 0):
        mlog.critical(f"{name}: {float_var} is not a {'positive ' if positive else ''}number.")
        return False
    return True


def _check_cell(cell, materials, mlog, problems):
    def need(condition, message):
        if not condition:
            mlog.critical(message)
            problems.append(message)

    kind = cell.get("kind")
    need(kind in CELL_KINDS, f"cell.kind: {kind} not one of {CELL_KINDS}")
    for key in ("h1", "h2"):
        if not check_config_float(cell.get(key), mlog, f"cell.{key}"):
            problems.append(f"cell.{key} must be a positive number (got {cell.get(key)})")

    material_ids = set(materials) if isinstance(materials, dict) else set()
    if kind in ("fiber", "channel"):
        if not check_config_int(cell.get("layers"), mlog, "cell.layers", minimum=1):
            problems.append(f"cell.layers must be an integer >= 1 (got {cell.get('layers')})")
        for key in ("radius", "gap", "cover"):
            if not check_config_float(cell.get(key), mlog, f"cell.{key}", positive=(key == "radius")):
                problems.append(f"cell.{key} must be a number (got {cell.get(key)})")
        if cell.get("in_plane_pitch") is not None and not check_config_float(cell["in_plane_pitch"], mlog, "cell.in_plane_pitch"):
            problems.append(f"cell.in_plane_pitch must be a positive number (got {cell['in_plane_pitch']})")
        directions = cell.get("directions")
        if directions is not None:
            need(isinstance(directions, list), "cell.directions must be a list")
    if kind == "fiber":
        need(
            cell.get("inclusion_material") in material_ids,
            f"cell.inclusion_material: material '{cell.get('inclusion_material')}' is not defined",
        )
    if kind in ("fiber", "channel", "homogeneous"):
        need(cell.get("matrix_material") in material_ids, f"cell.matrix_material: material '{cell.get('matrix_material')}' is not defined")
    if kind == "homogeneous":
        if not check_config_float(cell.get("thickness"), mlog, "cell.thickness"):
            problems.append(f"cell.thickness must be a positive number (got {cell.get('thickness')})")
    if kind == "laminate":
        stack = cell.get("stack")
        if not isinstance(stack, list) or not stack:
            need(False, "cell.stack must be a non-empty list of {material, thickness}")
        else:
            for index, band in enumerate(stack):
                if not isinstance(band, dict):
                    need(False, f"cell.stack[{index}] must be an object")
                    continue
                need(band.get("material") in material_ids, f"cell.stack[{index}]: material '{band.get('material')}' is not defined")
                if not check_config_float(band.get("thickness"), mlog, f"cell.stack[{index}].thickness"):
                    problems.append(f"cell.stack[{index}].thickness must be a positive number (got {band.get('thickness')})")


def check_config(cfg, mlog):
    """Checks if a (normalized) run config is valid.

    Every problem is logged and collected; checking continues after a problem.

    Args:
        cfg (dict): The config object
        mlog (Log): The logger object

    Returns:
        list: The problems found (empty if the config is valid)
    """
    problems = []

    def need(condition, message):
        if not condition:
            mlog.critical(message)
            problems.append(message)

    for section in REQUIRED_SECTIONS:
        need(section in cfg, f"missing required setting '{section}'")
    for section in ("solver", "analysis", "outputs", "logging"):
        need(isinstance(cfg[section], dict), f"{section} must be an object")
    if problems:
        return problems

    need(cfg["schema_version"] == SCHEMA_VERSION, f"schema_version: {cfg['schema_version']} is not supported (expected {SCHEMA_VERSION})")

    # materials
    materials = cfg["materials"]
    if not isinstance(materials, dict) or not materials:
        need(False, "materials must be a non-empty object of {E, nu}")
    else:
        for name, material in materials.items():
            if not isinstance(material, dict) or "E" not in material or "nu" not in material:
                need(False, f"materials.{name} must have E and nu")
                continue
            if not check_config_float(material["E"], mlog, f"materials.{name}.E", positive=False):
                problems.append(f"materials.{name}.E must be a number (got {material['E']})")
            if not check_config_float(material["nu"], mlog, f"materials.{name}.nu", positive=False):
                problems.append(f"materials.{name}.nu must be a number (got {material['nu']})")

    # cell
    if not isinstance(cfg["cell"], dict):
        need(False, "cell must be an object")
    else:
        _check_cell(cfg["cell"], materials, mlog, problems)

    # resolution
    resolution = cfg["resolution"]
    if not isinstance(resolution, list) or len(resolution) != 3:
        need(False, f"resolution must be a list [n1, n2, n3] (got {resolution})")
    else:
        for axis, value in enumerate(resolution, start=1):
            if not check_config_int(value, mlog, f"resolution n{axis}", minimum=2):
                problems.append(f"resolution n{axis} must be an integer >= 2 (got {value})")

    # modes
    modes = cfg["modes"]
    if not isinstance(modes, list) or not modes:
        need(False, "modes must be a non-empty list of 'AB:NU' entries")
    else:
        for entry in modes:
            try:
                MacroMode.from_string(entry["mode"], entry["magnitude"])
            except (ValidationError, KeyError, TypeError) as e:
                need(False, f"modes: invalid entry {entry}: {e}")

    if not check_config_float(cfg["epsilon"], mlog, "epsilon"):
        problems.append(f"epsilon must be a positive number (got {cfg['epsilon']})")

    # solver
    solver = cfg["solver"]
    need(solver.get("method") in ("cg", "direct"), f"solver.method: {solver.get('method')} not one of ['cg', 'direct']")
    need(solver.get("element") in ("hex8", "hex8i"), f"solver.element: {solver.get('element')} not one of ['hex8', 'hex8i']")
    if not check_config_float(solver.get("tolerance"), mlog, "solver.tolerance"):
        problems.append(f"solver.tolerance must be a positive number (got {solver.get('tolerance')})")
    if solver.get("max_iterations") is not None and not check_config_int(solver["max_iterations"], mlog, "solver.max_iterations", minimum=1):
        problems.append(f"solver.max_iterations must be an integer >= 1 (got {solver['max_iterations']})")

    # analysis
    analysis = cfg["analysis"]
    for key in ("threshold", "informative_threshold"):
        if not check_config_float(analysis.get(key), mlog, f"analysis.{key}"):
            problems.append(f"analysis.{key} must be a positive number (got {analysis.get(key)})")
    if analysis.get("pitch") is not None and not check_config_float(analysis["pitch"], mlog, "analysis.pitch"):
        problems.append(f"analysis.pitch must be a positive number (got {analysis['pitch']})")
    tile = analysis.get("tile")
    if not isinstance(tile, list) or len(tile) != 2 or not all(check_config_int(value, mlog, "analysis.tile", minimum=1) for value in tile):
        need(False, f"analysis.tile must be [k1, k2] with integers >= 1 (got {tile})")
    alignments = analysis.get("alignments")
    need(
        isinstance(alignments, list) and alignments and all(value in ALIGNMENTS for value in alignments),
        f"analysis.alignments must be a non-empty list of {ALIGNMENTS} (got {alignments})",
    )
    surfaces = analysis.get("surfaces")
    need(
        isinstance(surfaces, list) and surfaces and all(value in SURFACES for value in surfaces),
        f"analysis.surfaces must be a non-empty list of {SURFACES} (got {surfaces})",
    )
    for key in ("strains", "curvatures"):
        entries = analysis.get(key)
        if not isinstance(entries, dict):
            need(False, f"analysis.{key} must be an object alpha_beta -> value")
            continue
        for alpha_beta, value in entries.items():
            need(alpha_beta in ("11", "22", "12"), f"analysis.{key}: '{alpha_beta}' not one of ['11', '22', '12']")
            if not check_config_float(value, mlog, f"analysis.{key}.{alpha_beta}", positive=False):
                problems.append(f"analysis.{key}.{alpha_beta} must be a number (got {value})")

    # outputs
    outputs = cfg["outputs"]
    need(isinstance(outputs.get("directory"), str) and outputs.get("directory") != "", "outputs.directory must be a non-empty string")
    formats = outputs.get("formats")
    need(
        isinstance(formats, list) and all(value in FIELD_FORMATS for value in formats),
        f"outputs.formats must be a list of {FIELD_FORMATS} (got {formats})",
    )
    if not check_config_bool(outputs.get("displacement"), mlog, "outputs.displacement"):
        problems.append(f"outputs.displacement must be true or false (got {outputs.get('displacement')})")

    # logging
    logging_cfg = cfg["logging"]
    for key in ("log_level_stdout", "log_level_file"):
        if not check_config_log_level(logging_cfg.get(key), mlog, f"logging.{key}"):
            problems.append(f"logging.{key}: {logging_cfg.get(key)} is not a log level")
    if not check_config_bool(logging_cfg.get("split_files_by_module"), mlog, "logging.split_files_by_module"):
        problems.append(f"logging.split_files_by_module must be true or false (got {logging_cfg.get('split_files_by_module')})")

    return problems


def build_cell(cell):
    """Builds the CellSpec described by the 'cell' section."""
    kind = cell["kind"]
    if kind == "homogeneous":
        return build_homogeneous_cell(cell["h1"], cell["h2"], cell["thickness"], cell["matrix_material"])
    if kind == "laminate":
        return build_laminate_cell(cell["h1"], cell["h2"], [(band["material"], band["thickness"]) for band in cell["stack"]])
    return build_layered_cell(
        kind=kind,
        layers=cell["layers"],
        radius=cell["radius"],
        gap=cell["gap"],
        cover=cell["cover"],
        h1=cell["h1"],
        h2=cell["h2"],
        matrix_material=cell["matrix_material"],
        inclusion_material=cell.get("inclusion_material") if kind == "fiber" else None,
        directions=cell.get("directions"),
        in_plane_pitch=cell.get("in_plane_pitch"),
    )


def build_run_config(cfg):
    """Builds the typed RunConfig of a checked, normalized config.

    Raises:
        ValidationError: If a material or the cell is invalid
    """
    materials = {name: IsotropicMaterial(name, values["E"], values["nu"]) for name, values in cfg["materials"].items()}
    cell = build_cell(cfg["cell"])
    modes = [MacroMode.from_string(entry["mode"], entry["magnitude"]) for entry in cfg["modes"]]
    analysis = dict(cfg["analysis"])
    analysis["tile"] = tuple(analysis["tile"])
    return RunConfig(
        cfg=cfg,
        materials=materials,
        cell=cell,
        resolution=tuple(cfg["resolution"]),
        modes=modes,
        epsilon=cfg["epsilon"],
        solver=dict(cfg["solver"]),
        analysis=analysis,
        outputs=dict(cfg["outputs"]),
    )


def dump_config(cfg):
    """Returns the normalized config as JSON text (sorted keys, indent 2)."""
    return json.dumps(normalize_config(cfg), sort_keys=True, indent=2) + "\n"


def save_config(cfg, path):
    """Saves the normalized config to a file after re-validating it.

    Returns:
        str: The path written

    Raises:
        ConfigError: If the config is invalid
    """
    normalized = normalize_config(cfg)
    problems = check_config(normalized, mlog)
    if problems:
        mlog.warning("Could not save the config, as the provided config was invalid!")
        raise ConfigError(problems)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w") as config_file:
        config_file.write(dump_config(normalized))
    return path
