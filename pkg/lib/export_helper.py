# PLATECELL
# This helper module writes results to disk and reads exported fields back.
#
# Field files: ASCII legacy VTK (via meshio, void elements omitted) or CSV (one row per element, voids included).
# Tables (rigidities, profiles, reports, diagnostics) are CSV files written with pandas.
# All floats are written with 17 significant digits and in a fixed order, so identical inputs give identical bytes.

import os

import meshio
import numpy as np
import pandas as pd

import lib.logging_helper as logging_helper
from lib.class_helper import CorrectorField, HexMesh, StressField, ValidationError
from lib.generic_helper import FLOAT_FORMAT
from lib.homogenization_helper import von_mises

FIELD_FORMATS = ("vtk", "csv")
CSV_COLUMNS = ["x", "y", "z", "phase", "s11", "s22", "s33", "s12", "s23", "s13", "von_mises"]
CSV_STRESS_COLUMNS = ["s11", "s22", "s33", "s23", "s13", "s12"]  # Voigt order of StressField.stress

mlog = logging_helper.Log("lib.export_helper")


def _prepare_path(path):
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise ValidationError(f"cannot create output directory {directory}: {e}")


def field_frame(field: StressField, mesh: HexMesh = None):
    """Returns the per-element table of a stress field (CSV_COLUMNS, element order)."""
    mesh = mesh or field.mesh
    centroids = mesh.element_centroids()
    frame = pd.DataFrame(
        {
            "x": centroids[:, 0],
            "y": centroids[:, 1],
            "z": centroids[:, 2],
            "phase": mesh.phase_names(),
        }
    )
    for position, column in enumerate(CSV_STRESS_COLUMNS):
        frame[column] = field.stress[:, position]
    frame["von_mises"] = von_mises(field)
    return frame[CSV_COLUMNS]


def export_field(field: StressField, mesh: HexMesh, format: str, path: str, corrector: CorrectorField = None):
    """Writes a stress field as VTK or CSV.

    Args:
        field (StressField): The field
        mesh (HexMesh): The mesh the field lives on
        format (str): 'vtk' or 'csv'
        path (str): Output file
        corrector (CorrectorField): Adds the nodal displacement as VTK point data (optional)

    Returns:
        str: The path written

    Raises:
        ValidationError: On an unsupported format, a field/mesh mismatch or an unwritable path
    """
    if format not in FIELD_FORMATS:
        raise ValidationError(f"unsupported format '{format}' (expected one of {list(FIELD_FORMATS)})")
    if field.stress.shape[0] != mesh.n_elements:
        raise ValidationError(f"field has {field.stress.shape[0]} elements, mesh has {mesh.n_elements}")
    _prepare_path(path)

    try:
        if format == "csv":
            field_frame(field, mesh).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        else:
            active = mesh.active
            point_data = {}
            if corrector is not None:
                point_data["displacement"] = np.asarray(corrector.displacements, dtype=float)
            output = meshio.Mesh(
                np.asarray(mesh.nodes, dtype=float),
                [("hexahedron", np.asarray(mesh.elements[active], dtype=np.int64))],
                point_data=point_data,
                cell_data={
                    "von_mises": [von_mises(field)[active]],
                    "stress": [np.asarray(field.stress[active], dtype=float)],
                },
            )
            meshio.write(path, output, file_format="vtk", binary=False)
    except OSError as e:
        raise ValidationError(f"cannot write {path}: {e}")
    mlog.info(f"Wrote {format} field '{field.label}' to {path}")
    return path


def read_field_csv(path: str, mesh: HexMesh, mode=None, label: str = None):
    """Reads a field CSV written by export_field back into a StressField.

    Raises:
        ValidationError: If the file is missing, has another header or another element count
    """
    if not os.path.isfile(path):
        raise ValidationError(f"field file {path} does not exist")
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != CSV_COLUMNS:
        raise ValidationError(f"{path}: header {list(frame.columns)} is not {CSV_COLUMNS}")
    if len(frame) != mesh.n_elements:
        raise ValidationError(f"{path}: {len(frame)} rows, mesh has {mesh.n_elements} elements")
    stress = frame[CSV_STRESS_COLUMNS].to_numpy(dtype=float)
    label = label or os.path.splitext(os.path.basename(path))[0]
    return StressField(mode, mesh, stress, label=label)


def write_table(rows, path: str, columns=None):
    """Writes a list of dict rows as CSV (fixed column order, 17 significant digits).

    Returns:
        str: The path written
    """
    _prepare_path(path)
    frame = pd.DataFrame(list(rows), columns=columns)
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise ValidationError(f"cannot write {path}: {e}")
    mlog.info(f"Wrote {len(frame)} rows to {path}")
    return path
