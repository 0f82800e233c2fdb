# PLATECELL
# This helper module turns solved correctors into local stresses and homogenized plate rigidities.
#
# Stresses are evaluated at the 2x2x2 Gauss points of every solid element and averaged per element.
# Rigidities pair the stress of each solved mode with the strain of the interpolated unit field of each test mode,
# which is the discrete energy product of the two fields (symmetric, hence reciprocal).

import numpy as np

import lib.logging_helper as logging_helper
from lib.class_helper import (
    ALPHA_BETA,
    CorrectorField,
    HexMesh,
    MacroMode,
    MissingModeError,
    RigidityTable,
    StressField,
    ValidationError,
)
from lib.fem_helper import ElementTable, unit_strain_field

ALL_MODE_KEYS = tuple(f"{alpha_beta}:{nu}" for nu in (0, 1) for alpha_beta in ALPHA_BETA)
DEGENERATE_RIGIDITY = 1e-12  # Relative size below which an in-plane rigidity counts as zero

mlog = logging_helper.Log("lib.homogenization_helper")


def _element_values(mesh: HexMesh, nodal):
    """Gathers nodal vectors (N, 3) into element vectors (E, 24)."""
    return np.asarray(nodal)[mesh.elements].reshape(-1, 24)


def local_stress(corrector: CorrectorField, tensors: dict, table: ElementTable = None):
    """Returns the local stress sigma = a : e(Z) of a solved mode.

    Args:
        corrector (CorrectorField): The solved field (its magnitude is included in the stress)
        tensors (dict): Material id -> ElasticityTensor
        table (ElementTable): Precomputed element operators of the same mesh (optional)

    Returns:
        StressField: Gauss-averaged element stresses, zero in void elements

    Raises:
        ValidationError: If the corrector does not match the mesh of the table
    """
    mesh = corrector.mesh
    if corrector.displacements.shape[0] != mesh.n_nodes:
        raise ValidationError(
            f"corrector of mode {corrector.mode.key} has {corrector.displacements.shape[0]} nodes, mesh has {mesh.n_nodes}"
        )
    if table is None:
        table = ElementTable(mesh, tensors, corrector.element)
    elif table.key.shape[0] != mesh.n_elements or table.element != corrector.element:
        raise ValidationError(f"element operators do not belong to the mesh/element of mode {corrector.mode.key}")

    local = _element_values(mesh, corrector.displacements)
    gauss = np.zeros((mesh.n_elements, 8, 6))
    for key in range(len(table)):
        members = table.members(key)
        strains = np.einsum("gij,ej->egi", table.strain_operators[key], local[members])
        gauss[members] = strains @ table.components[key].T
    return StressField(corrector.mode, mesh, gauss.mean(axis=1), gauss_stress=gauss)


def von_mises(field):
    """Returns the per-element von Mises stress.

    Args:
        field (StressField | np.ndarray): A stress field or an (E, 6) Voigt array (11, 22, 33, 23, 13, 12)

    Returns:
        np.ndarray: (E,) values
    """
    stress = field.stress if isinstance(field, StressField) else np.asarray(field, dtype=float).reshape(-1, 6)
    s11, s22, s33, s23, s13, s12 = (stress[:, index] for index in range(6))
    value = 0.5 * ((s11 - s22) ** 2 + (s22 - s33) ** 2 + (s33 - s11) ** 2) + 3.0 * (s12**2 + s23**2 + s13**2)
    return np.sqrt(np.maximum(value, 0.0))


def superpose_stress(fields: dict, strains: dict = None, curvatures: dict = None, epsilon: float = 1.0):
    """Combines per-mode stresses: sum e_ab sigma^{ab0} + epsilon sum rho_ab sigma^{ab1}.

    Each field is normalised by its mode magnitude first, so fields solved at any magnitude can be combined.

    Args:
        fields (dict): Mode key ('AB:NU') -> StressField
        strains (dict): alpha_beta -> macroscopic in-plane strain e_ab
        curvatures (dict): alpha_beta -> macroscopic curvature rho_ab
        epsilon (float): Cell size scale

    Returns:
        StressField: The combined field (label 'combined')

    Raises:
        MissingModeError: If a non-zero entry has no field
    """
    terms = []
    for nu, entries, factor in ((0, strains or {}, 1.0), (1, curvatures or {}, epsilon)):
        for alpha_beta, value in entries.items():
            if value == 0.0:
                continue
            key = MacroMode(alpha_beta, nu).key
            terms.append((key, factor * value))
    missing = [key for key, _ in terms if key not in fields]
    if missing:
        raise MissingModeError([f"no stress field for mode {key}" for key in missing])
    if not fields:
        raise MissingModeError("no stress fields to superpose")

    mesh = next(iter(fields.values())).mesh
    stress = np.zeros((mesh.n_elements, 6))
    for key, weight in terms:
        field = fields[key]
        if field.mesh is not mesh:
            raise ValidationError(f"stress field of mode {key} lives on another mesh")
        if field.mode.magnitude == 0.0:
            raise ValidationError(f"stress field of mode {key} was solved with zero magnitude")
        stress += weight / field.mode.magnitude * field.stress
    return StressField(None, mesh, stress, label="combined")


def compute_rigidities(correctors: dict, tensors: dict, mesh: HexMesh, table: ElementTable = None):
    """Computes the homogenized rigidities A[nu][mu][gd][ab] per unit cell area.

    A[nu][mu][gd][ab] = (1/|P2|) sum_e sum_g w sigma(Z^{ab nu} / m) . e(I xi^{gd mu}), where I xi is the nodal interpolation
    of the unit field. For exact fields this is the integral of sigma^{ab nu}_{gd} y3^mu over the cell.

    Args:
        correctors (dict): Mode key -> CorrectorField, all six modes
        tensors (dict): Material id -> ElasticityTensor
        mesh (HexMesh): The mesh all correctors were solved on
        table (ElementTable): Precomputed element operators (optional)

    Returns:
        RigidityTable: Rigidities with neutral planes filled

    Raises:
        MissingModeError: If a mode is missing
        ValidationError: On a zero-magnitude mode or a mesh mismatch
    """
    missing = [key for key in ALL_MODE_KEYS if key not in correctors]
    if missing:
        raise MissingModeError([f"no corrector for mode {key}" for key in missing])
    element = correctors[ALL_MODE_KEYS[0]].element
    for key in ALL_MODE_KEYS:
        corrector = correctors[key]
        if corrector.mesh is not mesh:
            raise ValidationError(f"corrector of mode {key} was solved on another mesh")
        if corrector.mode.magnitude == 0.0:
            raise ValidationError(f"corrector of mode {key} has zero magnitude")
        if corrector.element != element:
            raise ValidationError(f"corrector of mode {key} uses element {corrector.element}, expected {element}")
    if table is None:
        table = ElementTable(mesh, tensors, element)

    area = mesh.spec.h1 * mesh.spec.h2
    unit_fields = {key: _element_values(mesh, unit_strain_field(MacroMode.from_string(key)).evaluate(mesh.nodes)) for key in ALL_MODE_KEYS}
    solved_fields = {key: _element_values(mesh, correctors[key].displacements) / correctors[key].mode.magnitude for key in ALL_MODE_KEYS}

    values = np.zeros((2, 2, 3, 3))
    for key in range(len(table)):
        members = table.members(key)
        D = table.components[key]
        stresses = {
            mode_key: np.einsum("gij,ej->egi", table.strain_operators[key], solved[members]) @ D.T
            for mode_key, solved in solved_fields.items()
        }
        tests = {mode_key: np.einsum("gij,ej->egi", table.compatible_operators[key], unit[members]) for mode_key, unit in unit_fields.items()}
        for nu in (0, 1):
            for a, alpha_beta in enumerate(ALPHA_BETA):
                stress = stresses[f"{alpha_beta}:{nu}"]
                for mu in (0, 1):
                    for g, gamma_delta in enumerate(ALPHA_BETA):
                        values[nu, mu, g, a] += table.weights[key] * np.sum(stress * tests[f"{gamma_delta}:{mu}"])
    values /= area

    rigidities = RigidityTable(values)
    rigidities = RigidityTable(values, neutral_planes=_neutral_planes(rigidities))
    mlog.info(f"Computed rigidities: A0_1111={values[0, 0, 0, 0]:.6g}, A2_1111={values[1, 1, 0, 0]:.6g}")
    return rigidities


def _neutral_planes(table: RigidityTable):
    planes = {}
    for alpha_beta in ALPHA_BETA:
        try:
            planes[alpha_beta] = neutral_plane(table, alpha_beta)
        except ValidationError as e:
            mlog.warning(f"No neutral plane for {alpha_beta}: {e}")
    return planes


def neutral_plane(table: RigidityTable, alpha_beta: str):
    """Returns the y3 offset h at which the coupling rigidity A[0][1][ab][ab] vanishes after shifting.

    Raises:
        ValidationError: If the in-plane rigidity A[0][0][ab][ab] is degenerate
    """
    if alpha_beta == "21":
        alpha_beta = "12"
    if alpha_beta not in ALPHA_BETA:
        raise ValidationError(f"alpha_beta must be one of {list(ALPHA_BETA)} (got {alpha_beta})")
    membrane = table.entry(0, 0, alpha_beta, alpha_beta)
    scale = max(abs(table.entry(0, 0, pair, pair)) for pair in ALPHA_BETA)
    if scale == 0.0 or abs(membrane) <= DEGENERATE_RIGIDITY * scale:
        raise ValidationError(f"in-plane rigidity A0_{alpha_beta}{alpha_beta} is degenerate ({membrane:.3e})")
    return table.entry(0, 1, alpha_beta, alpha_beta) / membrane


def shift_rigidities(table: RigidityTable, h: float):
    """Moves the y3 origin to y3 = h (parallel-axis transform, no re-solve).

    A01 -> A01 - h A00, A10 -> A10 - h A00, A11 -> A11 - h (A01 + A10) + h^2 A00.

    Returns:
        RigidityTable: The shifted table with neutral planes measured from the new origin
    """
    values = np.array(table.values)
    a00, a01, a10, a11 = values[0, 0], values[0, 1], values[1, 0], values[1, 1]
    shifted = np.empty_like(values)
    shifted[0, 0] = a00
    shifted[0, 1] = a01 - h * a00
    shifted[1, 0] = a10 - h * a00
    shifted[1, 1] = a11 - h * (a01 + a10) + h * h * a00
    planes = {alpha_beta: value - h for alpha_beta, value in table.neutral_planes.items()}
    return RigidityTable(shifted, neutral_planes=planes, origin_shift=table.origin_shift + h)
