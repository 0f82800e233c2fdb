# PLATECELL
# This module is the worker that runs the pipelines behind the subcommands of platecell.py.
#
# Every run_<subcommand>() follows the same steps:
# - Build the cell and the mesh from the run config
# - Solve the cell problems of the requested modes (all modes share one assembled system)
# - Post-process (stresses, rigidities, profiles, comparisons, wrinkles)
# - Write the results into the output directory and return a ResultBundle

import os
import traceback

import numpy as np

import lib.logging_helper as logging_helper
from lib.analysis_helper import (
    best_report,
    build_representative,
    classify_informative,
    compare_sss,
    layer_profile,
    representative_layers,
    skin_core_decompose,
    surface_wrinkle,
)
from lib.class_helper import (
    ALPHA_BETA,
    IncongruentZonesError,
    MacroMode,
    PlateCellError,
    ResultBundle,
    ValidationError,
)
from lib.config_helper import save_config
from lib.export_helper import export_field, read_field_csv, write_table
from lib.fem_helper import solve_modes
from lib.homogenization_helper import (
    ALL_MODE_KEYS,
    compute_rigidities,
    local_stress,
    shift_rigidities,
    superpose_stress,
    von_mises,
)
from lib.materials_helper import structural_layers, tensors_for, tile_cell
from lib.mesh_helper import generate_mesh, structural_bounds

mlog = logging_helper.Log("platecell_worker")

DIAGNOSTIC_COLUMNS = ["mode", "magnitude", "method", "iterations", "residual", "dofs"]


def output_directory(run_config, out_dir=None):
    """Returns (and creates) the output directory of a run."""
    directory = out_dir or run_config.outputs["directory"]
    os.makedirs(directory, exist_ok=True)
    return directory


def field_label(key):
    """'11:0' -> '11_0' (file-name friendly mode key)."""
    return key.replace(":", "_")


def _solve(run_config, spec, resolution, modes, y3_spacing=None):
    """Meshes a cell and solves the modes. Returns (mesh, tensors, correctors, stress fields)."""
    mesh = generate_mesh(spec, resolution, y3_spacing)
    tensors = tensors_for(run_config.materials)
    correctors = solve_modes(mesh, tensors, modes, run_config.solver)
    stress_fields = {key: local_stress(corrector, tensors) for key, corrector in correctors.items()}
    return mesh, tensors, correctors, stress_fields


def _fill_bundle(bundle, correctors, stress_fields):
    bundle.correctors.update(correctors)
    bundle.stress_fields.update(stress_fields)
    bundle.von_mises.update({key: von_mises(field) for key, field in stress_fields.items()})
    bundle.diagnostics.extend(corrector.solver_report for corrector in correctors.values())


def _write_common(bundle, directory):
    bundle.files.append(save_config(bundle.run_config.cfg, os.path.join(directory, "config.json")))
    bundle.files.append(write_table(bundle.diagnostics, os.path.join(directory, "diagnostics.csv"), DIAGNOSTIC_COLUMNS))


def _with_partner_modes(modes, nu):
    """Adds the (alpha_beta, nu) partner of every mode that lacks one (unit magnitude)."""
    present = {mode.key for mode in modes}
    result = list(modes)
    for mode in modes:
        partner = MacroMode(mode.alpha_beta, nu)
        if partner.key not in present:
            mlog.info(f"Adding mode {partner.key} (needed alongside {mode.key})")
            result.append(partner)
            present.add(partner.key)
    return result


def run_solve(run_config, out_dir=None):
    """Solves all requested modes and writes the stress fields.

    Writes field_<mode>.<format> per mode (and field_combined.* if macroscopic strains or curvatures are configured),
    diagnostics.csv and the normalized config.

    Returns:
        ResultBundle: The results
    """
    directory = output_directory(run_config, out_dir)
    mesh, _, correctors, stress_fields = _solve(run_config, run_config.cell, run_config.resolution, run_config.modes)
    bundle = ResultBundle(run_config, mesh)
    _fill_bundle(bundle, correctors, stress_fields)

    fields = [(key, field, correctors[key]) for key, field in stress_fields.items()]
    strains = run_config.analysis["strains"]
    curvatures = run_config.analysis["curvatures"]
    if any(strains.values()) or any(curvatures.values()):
        combined = superpose_stress(stress_fields, strains, curvatures, run_config.epsilon)
        fields.append(("combined", combined, None))

    for key, field, corrector in fields:
        for fmt in run_config.outputs["formats"]:
            path = os.path.join(directory, f"field_{field_label(key)}.{fmt}")
            displacement = corrector if run_config.outputs["displacement"] else None
            bundle.files.append(export_field(field, mesh, fmt, path, corrector=displacement))
    _write_common(bundle, directory)
    mlog.info(f"Solved {len(correctors)} modes, wrote {len(bundle.files)} files to {directory}")
    return bundle


def run_homogenize(run_config, out_dir=None):
    """Computes the homogenized rigidities (all six modes are solved) and the neutral planes.

    Writes rigidities.csv, neutral_planes.csv and rigidities_neutral_<ab>.csv (table shifted to each neutral plane).
    """
    directory = output_directory(run_config, out_dir)
    modes = [MacroMode.from_string(key) for key in ALL_MODE_KEYS]
    mesh, tensors, correctors, stress_fields = _solve(run_config, run_config.cell, run_config.resolution, modes)
    bundle = ResultBundle(run_config, mesh)
    _fill_bundle(bundle, correctors, stress_fields)

    table = compute_rigidities(correctors, tensors, mesh)
    bundle.rigidities = table
    bundle.files.append(write_table(table.rows(), os.path.join(directory, "rigidities.csv")))
    planes = [{"alpha_beta": alpha_beta, "neutral_plane": table.neutral_planes.get(alpha_beta, np.nan)} for alpha_beta in ALPHA_BETA]
    bundle.files.append(write_table(planes, os.path.join(directory, "neutral_planes.csv")))
    for alpha_beta, h in table.neutral_planes.items():
        shifted = shift_rigidities(table, h)
        bundle.files.append(write_table(shifted.rows(), os.path.join(directory, f"rigidities_neutral_{alpha_beta}.csv")))
    _write_common(bundle, directory)
    return bundle


def run_profile(run_config, out_dir=None):
    """Computes the slab profiles and, for plates with >= 3 structural layers, the skin/core decomposition per mode.

    Writes profile_<mode>.csv and skin_core_<mode>.csv.
    """
    directory = output_directory(run_config, out_dir)
    mesh, _, correctors, stress_fields = _solve(run_config, run_config.cell, run_config.resolution, run_config.modes)
    bundle = ResultBundle(run_config, mesh)
    _fill_bundle(bundle, correctors, stress_fields)

    pitch = run_config.analysis["pitch"]
    threshold = run_config.analysis["threshold"]
    layered = len(run_config.cell.layer_centers()) >= 3
    for key, field in stress_fields.items():
        profile = layer_profile(field, mesh, pitch)
        bundle.profiles[key] = profile
        bundle.files.append(write_table(profile.rows(), os.path.join(directory, f"profile_{field_label(key)}.csv")))
        if not layered:
            mlog.info(f"Mode {key}: fewer than 3 structural layers, no skin/core decomposition")
            continue
        decomposition = skin_core_decompose(profile, threshold=threshold)
        bundle.decompositions[key] = decomposition
        bundle.files.append(write_table(decomposition.rows(), os.path.join(directory, f"skin_core_{field_label(key)}.csv")))
    _write_common(bundle, directory)
    return bundle


def _layer_zones(spec):
    """Returns [(center, (low, high)), ...] of the structural layers, top first."""
    bounds = structural_bounds(spec)
    centers = spec.layer_centers()
    return [(centers[index], (bounds[index], bounds[index + 1])) for index in range(len(centers) - 1, -1, -1)]


def _common_zones(center_a, zone_a, center_b, zone_b):
    """Trims two layer zones to the same extent below and above their layer centers."""
    below = min(center_a - zone_a[0], center_b - zone_b[0])
    above = min(zone_a[1] - center_a, zone_b[1] - center_b)
    return (center_a - below, center_a + above), (center_b - below, center_b + above)


def _unit_field(stress_fields, mode, shift=0.0):
    """Unit-magnitude field of a mode; bending fields are moved by the y3 offset between compared layers."""
    if mode.nu == 0:
        return superpose_stress(stress_fields, strains={mode.alpha_beta: 1.0})
    strains = {mode.alpha_beta: shift} if shift != 0.0 else {}
    return superpose_stress(stress_fields, strains=strains, curvatures={mode.alpha_beta: 1.0}, epsilon=1.0)


def _candidate_layers(spec, chosen, position):
    """Original layers a representative layer is compared with: the one it replicates, plus every interior layer
    with the same inclusion directions for the middle layer."""
    candidates = [chosen[position]]
    if position == 1:
        layers = structural_layers(spec)
        directions = sorted(inclusion.axis for inclusion in layers[chosen[1]][1])
        for index in range(1, len(layers) - 1):
            if index not in candidates and sorted(inclusion.axis for inclusion in layers[index][1]) == directions:
                candidates.append(index)
    return candidates


def run_represent(run_config, out_dir=None):
    """Builds the representative 3-layer cells, solves them next to the original plate and compares the stresses.

    Writes similarity_<align>.csv (one row per comparison) and verdicts_<align>.csv (one row per mode and layer).
    """
    directory = output_directory(run_config, out_dir)
    spec = run_config.cell
    modes = run_config.modes
    if any(mode.nu == 1 for mode in modes):
        modes = _with_partner_modes(modes, 0)

    resolution = run_config.resolution
    y3_spacing = spec.thickness / resolution[2]
    mesh, _, correctors, stress_fields = _solve(run_config, spec, resolution, modes, y3_spacing)
    bundle = ResultBundle(run_config, mesh)
    _fill_bundle(bundle, correctors, stress_fields)
    original_zones = _layer_zones(spec)
    threshold = run_config.analysis["informative_threshold"]

    for align in run_config.analysis["alignments"]:
        representative = build_representative(spec, align)
        chosen = representative_layers(spec, align)
        n3 = max(2, int(round(representative.thickness / y3_spacing)))
        _, _, rep_correctors, rep_fields = _solve(run_config, representative, (resolution[0], resolution[1], n3), modes, y3_spacing)
        bundle.diagnostics.extend(corrector.solver_report for corrector in rep_correctors.values())
        rep_zones = _layer_zones(representative)

        rows, verdict_rows = [], []
        for mode in run_config.modes:
            layer_reports = []
            for position, (rep_center, rep_zone) in enumerate(rep_zones):
                reports = []
                for index in _candidate_layers(spec, chosen, position):
                    center, zone = original_zones[index]
                    zone_rep, zone_orig = _common_zones(rep_center, rep_zone, center, zone)
                    label = f"{mode.key} {align} layer {position + 1} vs original layer {index + 1}"
                    try:
                        report = compare_sss(
                            _unit_field(rep_fields, mode, center - rep_center),
                            zone_rep,
                            _unit_field(stress_fields, mode),
                            zone_orig,
                            threshold,
                            label,
                        )
                    except IncongruentZonesError as e:
                        mlog.warning(f"Skipping {label}: {e}")
                        continue
                    reports.append(report)
                    rows.append(dict(report.to_dict(), mode=mode.key, layer=position + 1, original_layer=index + 1))
                layer_reports.append(reports)
                bundle.similarity.extend(reports)

            verdicts = classify_informative(layer_reports)
            bundle.verdicts[f"{align}:{mode.key}"] = verdicts
            for position, (verdict, reports) in enumerate(zip(verdicts, layer_reports)):
                best = best_report(reports)
                verdict_rows.append(
                    {
                        "mode": mode.key,
                        "layer": position + 1,
                        "verdict": verdict,
                        "best_match": best.label if best is not None else "",
                        "rel_l2": best.rel_l2 if best is not None else np.nan,
                    }
                )
            mlog.info(f"{align} representative, mode {mode.key}: {verdicts}")

        bundle.files.append(write_table(rows, os.path.join(directory, f"similarity_{align}.csv")))
        bundle.files.append(write_table(verdict_rows, os.path.join(directory, f"verdicts_{align}.csv")))
    _write_common(bundle, directory)
    return bundle


def run_wrinkle(run_config, out_dir=None):
    """Solves the tiled (twinned) cell and measures the surface wrinkling per mode and surface.

    Writes wrinkle.csv and deviation_<mode>_<surface>.csv (surface node grid).
    """
    directory = output_directory(run_config, out_dir)
    k1, k2 = run_config.analysis["tile"]
    spec = tile_cell(run_config.cell, k1, k2)
    n1, n2, n3 = run_config.resolution
    mesh, _, correctors, stress_fields = _solve(run_config, spec, (n1 * k1, n2 * k2, n3), run_config.modes)
    bundle = ResultBundle(run_config, mesh)
    _fill_bundle(bundle, correctors, stress_fields)

    for key, corrector in correctors.items():
        for surface in run_config.analysis["surfaces"]:
            report = surface_wrinkle(corrector, surface)
            bundle.wrinkles.append(report)
            ids = mesh.surface_nodes(surface).ravel()
            rows = {
                "y1": mesh.nodes[ids, 0],
                "y2": mesh.nodes[ids, 1],
                "deviation": report.deviation.ravel(),
            }
            grid = [dict(zip(rows, values)) for values in zip(*rows.values())]
            bundle.files.append(write_table(grid, os.path.join(directory, f"deviation_{field_label(key)}_{surface}.csv")))
    bundle.files.append(write_table([report.to_dict() for report in bundle.wrinkles], os.path.join(directory, "wrinkle.csv")))
    _write_common(bundle, directory)
    return bundle


def run_export(run_config, out_dir=None, fmt="vtk"):
    """Converts the field CSVs of a previous 'solve' run in the output directory into another format.

    Raises:
        ValidationError: If a field CSV of a requested mode is missing
    """
    directory = output_directory(run_config, out_dir)
    mesh = generate_mesh(run_config.cell, run_config.resolution)
    bundle = ResultBundle(run_config, mesh)
    for mode in run_config.modes:
        source = os.path.join(directory, f"field_{field_label(mode.key)}.csv")
        field = read_field_csv(source, mesh, mode)
        bundle.stress_fields[mode.key] = field
        bundle.von_mises[mode.key] = von_mises(field)
        target = os.path.join(directory, f"field_{field_label(mode.key)}.{fmt}")
        if os.path.abspath(target) == os.path.abspath(source):
            mlog.info(f"{source} is already in {fmt} format")
            continue
        bundle.files.append(export_field(field, mesh, fmt, target))
    return bundle


COMMANDS = {
    "solve": run_solve,
    "homogenize": run_homogenize,
    "profile": run_profile,
    "represent": run_represent,
    "wrinkle": run_wrinkle,
    "export": run_export,
}


def main(run_config, command, out_dir=None, fmt=None):
    """Runs one subcommand.

    Args:
        run_config (RunConfig): The loaded config
        command (str): One of COMMANDS
        out_dir (str): Output directory override
        fmt (str): Target format of 'export'

    Returns:
        ResultBundle: The results

    Raises:
        PlateCellError: On validation or solver failures (logged with traceback)
    """
    if command not in COMMANDS:
        raise ValidationError(f"unknown command '{command}' (expected one of {list(COMMANDS)})")
    mlog.info(f"Running '{command}' on a {run_config.resolution} mesh with modes {[mode.key for mode in run_config.modes]}")
    try:
        if command == "export":
            return run_export(run_config, out_dir, fmt or "vtk")
        return COMMANDS[command](run_config, out_dir)
    except PlateCellError:
        mlog.error(f"'{command}' failed: {traceback.format_exc()}")
        raise
