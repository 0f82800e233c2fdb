# PLATECELL
# This test module is used to test the platecell.py module and the pipelines of platecell_worker.py.
# It will test if the provided arguments are working as expected and if every subcommand writes its results.

import json
import os

import mock
import numpy as np
import pandas as pd
import pytest

import lib.config_helper as config_helper
import platecell
import platecell_worker
from lib.class_helper import SolverError, ValidationError

HOMOGENEOUS_CONFIG = {
    "schema_version": 1,
    "materials": {"matrix": {"E": 2.0, "nu": 0.36}},
    "cell": {"kind": "homogeneous", "h1": 1.0, "h2": 1.0, "thickness": 1.0, "matrix_material": "matrix"},
    "resolution": [2, 2, 2],
    "modes": ["11:0", "12:0"],
    "solver": {"method": "direct"},
}

FIBER_CONFIG = {
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
    "modes": ["11:0"],
    "solver": {"method": "direct"},
}


def write_config(directory, cfg, **changes):
    cfg = json.loads(json.dumps(cfg))
    cfg.update(changes)
    cfg.setdefault("outputs", {})["directory"] = os.path.join(str(directory), "results")
    path = os.path.join(str(directory), "run.json")
    with open(path, "w") as config_file:
        json.dump(cfg, config_file, indent=2)
    return path


def test_import():
    """Tests if the modules can be imported.

    Args:
        None

    Returns:
        None
    """
    try:
        import platecell
        import platecell_worker
        from lib import logging_helper

        return
    except ImportError:
        pytest.fail("The module can not be imported.")


def test_arg_parsing():
    """Tests parsing of arguments.

    Args:
        None

    Returns:
        None
    """
    try:
        parser = platecell.add_arguments()
    except Exception as e:
        pytest.fail("The parser can not be initialized: {}".format(e))

    args = parser.parse_args(["solve", "--config", "run.json", "--mode", "11:0", "--mode", "22:1", "--tile", "2x1", "--threshold", "0.1"])
    overrides = platecell.build_overrides(args)
    assert overrides["modes"] == ["11:0", "22:1"], f"Wrong modes: {overrides}"
    assert overrides["analysis.tile"] == [2, 1], f"Wrong tile: {overrides}"
    assert overrides["analysis.threshold"] == 0.1 and overrides["analysis.informative_threshold"] == 0.1, "Threshold not applied"

    with pytest.raises(SystemExit) as exit_info:
        parser.parse_args(["--version"])
    assert exit_info.value.code == 0, "--version did not exit cleanly"

    with pytest.raises(ValidationError):
        parser.parse_args(["solve"])  # --config is required


def test_exit_codes(tmp_path, capsys):
    """Tests the exit codes for invalid input and solver failures.

    Args:
        tmp_path (Path): pytest temporary directory
        capsys: pytest output capture

    Returns:
        None
    """
    assert platecell.run_command(["solve", "--config", str(tmp_path / "missing.json")]) == platecell.EXIT_INVALID, "Missing config not rejected"
    assert capsys.readouterr().err.startswith("error:"), "Error not reported on stderr"

    path = write_config(tmp_path, HOMOGENEOUS_CONFIG)
    assert platecell.run_command(["solve", "--config", path, "--resolution", "2x2"]) == platecell.EXIT_INVALID, "Malformed resolution accepted"
    assert platecell.run_command(["solve", "--config", path, "--mode", "23:0"]) == platecell.EXIT_INVALID, "Invalid mode accepted"

    failure = SolverError("conjugate gradient did not converge", {"method": "cg", "iterations": 10})
    with mock.patch.object(platecell_worker, "main", side_effect=failure):
        assert platecell.run_command(["solve", "--config", path]) == platecell.EXIT_SOLVER, "Solver failure not reported with exit code 2"
    assert "did not converge" in capsys.readouterr().err, "Solver error not reported on stderr"


def test_argument_errors(capsys):
    """Tests that malformed command lines exit with code 1 and an error line, while --help and --version exit with 0.

    Args:
        capsys: pytest output capture

    Returns:
        None
    """
    bad_lines = [
        ["solve", "--config", "configs/homogeneous.json", "--format", "xml"],
        ["solve", "--config", "configs/homogeneous.json", "--threshold", "abc"],
        ["solve", "--config", "configs/homogeneous.json", "--unknown"],
        ["solve"],
        ["mesh", "--config", "configs/homogeneous.json"],
        [],
    ]
    for argv in bad_lines:
        assert platecell.run_command(argv) == platecell.EXIT_INVALID, f"{argv} not rejected with exit code 1"
        err = capsys.readouterr().err
        assert err.startswith("error: platecell"), f"{argv}: wrong error output {err!r}"

    for flag in ("--help", "--version"):
        with pytest.raises(SystemExit) as exit_info:
            platecell.run_command([flag])
        assert exit_info.value.code == 0, f"{flag} did not exit cleanly"
    assert "PLATECELL" in capsys.readouterr().out, "--version output missing"

    with pytest.raises(SystemExit) as exit_info:
        platecell.run_command(["solve", "--help"])
    assert exit_info.value.code == 0, "solve --help did not exit cleanly"


def test_solve_and_export(tmp_path, capsys):
    """Tests the solve subcommand and the conversion of its CSV fields into VTK.

    Args:
        tmp_path (Path): pytest temporary directory
        capsys: pytest output capture

    Returns:
        None
    """
    path = write_config(tmp_path, HOMOGENEOUS_CONFIG, analysis={"strains": {"11": 1.0, "12": 0.5}})
    assert platecell.run_command(["solve", "--config", path]) == platecell.EXIT_OK, "solve failed"
    assert capsys.readouterr().out.startswith("solve: wrote"), "Summary line missing"

    results = tmp_path / "results"
    for name in ("field_11_0.csv", "field_12_0.csv", "field_combined.csv", "config.json", "diagnostics.csv"):
        assert (results / name).is_file(), f"{name} not written"
    field = pd.read_csv(results / "field_11_0.csv")
    assert np.allclose(field["s11"], 2.0 / (1.0 - 0.36**2)), "Wrong tension stress"
    diagnostics = pd.read_csv(results / "diagnostics.csv")
    assert list(diagnostics["mode"]) == ["11:0", "12:0"], "Wrong diagnostics"

    assert platecell.run_command(["export", "--config", path, "--format", "vtk"]) == platecell.EXIT_OK, "export failed"
    assert (results / "field_11_0.vtk").is_file(), "VTK field not written"


def test_homogenize(tmp_path):
    """Tests the homogenize pipeline on a homogeneous plate (membrane rigidity E t / (1 - nu^2)).

    Args:
        tmp_path (Path): pytest temporary directory

    Returns:
        None
    """
    run_config = config_helper.load_config(write_config(tmp_path, HOMOGENEOUS_CONFIG))
    bundle = platecell_worker.main(run_config, "homogenize")

    table = bundle.rigidities
    assert table.entry(0, 0, "11", "11") == pytest.approx(2.0 / (1.0 - 0.36**2), rel=1e-6), "Wrong membrane rigidity"
    assert table.neutral_planes["11"] == pytest.approx(0.0, abs=1e-9), "Neutral plane of a symmetric plate is not the midplane"
    assert len(bundle.correctors) == 6, "Not every mode was solved"

    rows = pd.read_csv(tmp_path / "results" / "rigidities.csv", dtype={"gamma_delta": str, "alpha_beta": str})
    assert len(rows) == 36, "Wrong number of rigidity rows"
    for alpha_beta in ("11", "22", "12"):
        assert (tmp_path / "results" / f"rigidities_neutral_{alpha_beta}.csv").is_file(), f"Shifted table {alpha_beta} missing"


def test_wrinkle(tmp_path):
    """Tests the wrinkle pipeline on a tiled homogeneous plate (flat surfaces).

    Args:
        tmp_path (Path): pytest temporary directory

    Returns:
        None
    """
    path = write_config(tmp_path, HOMOGENEOUS_CONFIG, modes=["11:0"])
    run_config = config_helper.load_config(path, {"analysis.tile": [2, 1]})
    bundle = platecell_worker.main(run_config, "wrinkle")

    assert bundle.mesh.resolution[:2] == (4, 2), "Tiled mesh has the wrong resolution"
    assert len(bundle.wrinkles) == 2, "Not every surface was measured"
    for report in bundle.wrinkles:
        assert report.amplitude < 1e-8, f"Flat surface wrinkles: {report}"
        assert report.periodic, "Flat surface is not periodic"
    assert (tmp_path / "results" / "wrinkle.csv").is_file(), "wrinkle.csv not written"


@pytest.mark.slow
def test_profile_and_represent(tmp_path):
    """Tests the profile and represent pipelines on a 3-layer fiber plate.

    A 3-layer plate is its own symmetric representative, so every layer must be informative.

    Args:
        tmp_path (Path): pytest temporary directory

    Returns:
        None
    """
    run_config = config_helper.load_config(write_config(tmp_path, FIBER_CONFIG))

    bundle = platecell_worker.main(run_config, "profile")
    decomposition = bundle.decompositions["11:0"]
    assert decomposition.core_layers >= 1, "No core layer"
    low, high = decomposition.bottom_skin[0], decomposition.top_skin[1]
    assert low == pytest.approx(-1.55) and high == pytest.approx(1.55), "Zones do not span the plate"
    assert (tmp_path / "results" / "profile_11_0.csv").is_file(), "Profile not written"

    bundle = platecell_worker.main(run_config, "represent")
    assert bundle.verdicts["symmetric:11:0"] == ["informative"] * 3, f"Wrong verdicts: {bundle.verdicts}"
    assert all(report.rel_l2 < 1e-6 for report in bundle.similarity), "Identical cells differ"
    assert (tmp_path / "results" / "verdicts_symmetric.csv").is_file(), "Verdicts not written"


@pytest.mark.slow
def test_nine_layer_skin_core(tmp_path):
    """Tests that the boundary layers of a 9-layer orthogonal fiber plate stay within the outermost structural layers.

    Args:
        tmp_path (Path): pytest temporary directory

    Returns:
        None
    """
    cell = dict(FIBER_CONFIG["cell"], layers=9)
    path = write_config(tmp_path, FIBER_CONFIG, cell=cell, resolution=[8, 24, 72], modes=["11:0", "12:0"])
    bundle = platecell_worker.main(config_helper.load_config(path), "profile")

    for key in ("11:0", "12:0"):
        decomposition = bundle.decompositions[key]
        for surface in ("top", "bottom"):
            depth = decomposition.boundary_layer[surface]
            assert 0.0 < depth < decomposition.pitch, f"{key} {surface}: boundary layer {depth} is not within one pitch"
        assert decomposition.skin_layers == {"top": 1, "bottom": 1}, f"{key}: wrong skins {decomposition.skin_layers}"
        assert decomposition.core_layers == 7, f"{key}: wrong core {decomposition.core_layers}"

        profile = bundle.profiles[key]
        inner = (profile.slabs[:, 0] >= decomposition.core[0] - 1e-9) & (profile.slabs[:, 1] <= decomposition.core[1] + 1e-9)
        assert np.all(profile.deviation[inner] <= 0.05), f"{key}: the core is not periodic"


@pytest.mark.slow
def test_ten_layer_aligned_representatives(tmp_path):
    """Tests the informative layers of top- and bottom-aligned representatives of a 10-layer plate in bending.

    The representative layer that replicates an interior layer next to its own skin does not match.

    Args:
        tmp_path (Path): pytest temporary directory

    Returns:
        None
    """
    cell = dict(FIBER_CONFIG["cell"], layers=10)
    path = write_config(
        tmp_path,
        FIBER_CONFIG,
        cell=cell,
        resolution=[8, 24, 80],
        modes=["11:1"],
        solver={"method": "direct", "element": "hex8i"},
        analysis={"alignments": ["top", "bottom"]},
    )
    bundle = platecell_worker.main(config_helper.load_config(path), "represent")

    assert bundle.verdicts["top:11:1"] == ["informative", "informative", "non-informative"], f"Wrong top verdicts: {bundle.verdicts}"
    assert bundle.verdicts["bottom:11:1"] == ["non-informative", "informative", "informative"], f"Wrong bottom verdicts: {bundle.verdicts}"
    assert (tmp_path / "results" / "verdicts_top.csv").is_file(), "Top verdicts not written"
    assert (tmp_path / "results" / "verdicts_bottom.csv").is_file(), "Bottom verdicts not written"
