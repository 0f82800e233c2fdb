# PLATECELL
# This module provides the classes that are passed around between the PLATECELL modules:
# materials, cell geometry, macroscopic modes, the mesh, solved fields, result tables and reports,
# plus the exception hierarchy used by every module.
#
# All objects are treated as immutable after construction. Numpy arrays stored on them are flagged read-only.

import json
import math

import numpy as np

from lib.generic_helper import del_none_from_dict

ALPHA_BETA = ("11", "22", "12")  # In-plane index pairs of the macroscopic modes
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))  # Voigt order 11, 22, 33, 23, 13, 12
VOIGT_LABELS = ("11", "22", "33", "23", "13", "12")
VOID = -1  # Phase code of void (channel) elements
INCLUSION_KINDS = ("fiber", "channel")
ELEMENT_CORNERS = (
    (0, 0, 0),
    (1, 0, 0),
    (1, 1, 0),
    (0, 1, 0),
    (0, 0, 1),
    (1, 0, 1),
    (1, 1, 1),
    (0, 1, 1),
)  # Local node ordering of the 8-node hexahedron (i, j, k offsets)


def voigt_index(i, j):
    """Returns the Voigt position (0..5) of the symmetric index pair (i, j), 0-based."""
    return VOIGT_PAIRS.index((min(i, j), max(i, j)))


def _frozen(array, dtype=float):
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


# -- Errors ---------------------------------------------------------------------------------------


class PlateCellError(Exception):
    """Base class of all PLATECELL errors."""


class ValidationError(PlateCellError, ValueError):
    """Invalid input. Carries the complete list of violations found.

    Attributes:
        violations (list): Human readable violation messages
    """

    def __init__(self, violations, message=None):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__(message or "; ".join(self.violations))


class MaterialError(ValidationError):
    """Invalid material parameters or elasticity tensor."""


class CellValidationError(ValidationError):
    """Invalid periodicity cell geometry."""


class MeshError(ValidationError):
    """The mesh cannot be generated or does not match a field."""


class ConfigError(ValidationError):
    """The run config cannot be parsed or is invalid."""


class IncongruentZonesError(ValidationError):
    """Two zones cannot be compared because their discretizations differ."""


class MissingModeError(ValidationError):
    """A corrector or field for a required mode is not available."""


class SolverError(PlateCellError, RuntimeError):
    """The cell problem could not be solved.

    Attributes:
        report (dict): Solver diagnostics (method, iterations, residual, dofs)
    """

    def __init__(self, message, report=None):
        self.report = dict(report or {})
        super().__init__(message)


# -- Materials and geometry -----------------------------------------------------------------------


class IsotropicMaterial:
    """Isotropic linear elastic material.

    Attributes:
        name (str): The material id
        youngs_modulus (float): Young's modulus (GPa)
        poisson_ratio (float): Poisson's ratio
    """

    def __init__(self, name: str, youngs_modulus: float, poisson_ratio: float):
        violations = []
        if not isinstance(youngs_modulus, (int, float)) or not youngs_modulus > 0:
            violations.append(f"material '{name}': youngs_modulus must be > 0 (got {youngs_modulus})")
        if not isinstance(poisson_ratio, (int, float)) or not -1.0 < poisson_ratio < 0.5:
            violations.append(f"material '{name}': poisson_ratio must be in (-1, 0.5) (got {poisson_ratio})")
        if violations:
            raise MaterialError(violations)

        self.name = str(name)
        self.youngs_modulus = float(youngs_modulus)
        self.poisson_ratio = float(poisson_ratio)

    def to_dict(self):
        """Returns the dictionary representation of the material."""
        return {"E": self.youngs_modulus, "nu": self.poisson_ratio}

    def __str__(self):
        return json.dumps({self.name: self.to_dict()}, indent=4)


class ElasticityTensor:
    """Rank-4 stiffness a_ijkl stored as a 6x6 matrix in Voigt order (11, 22, 33, 23, 13, 12).

    The matrix acts on engineering strains (shear entries 2e_ij), so each entry equals the tensor component a_ijkl directly.

    Attributes:
        components (np.ndarray): The 6x6 symmetric, positive definite matrix (GPa)
        name (str): Optional label
    """

    def __init__(self, components, name: str = None):
        matrix = np.array(components, dtype=float)
        if matrix.shape != (6, 6):
            raise MaterialError(f"elasticity tensor must be 6x6 (got shape {matrix.shape})")
        scale = max(np.abs(matrix).max(), 1e-300)
        if np.abs(matrix - matrix.T).max() > 1e-12 * scale:
            raise MaterialError("elasticity tensor is not symmetric (major symmetry violated)")
        matrix = 0.5 * (matrix + matrix.T)
        if np.linalg.eigvalsh(matrix).min() <= 0.0:
            raise MaterialError("elasticity tensor is not positive definite")

        self.components = _frozen(matrix)
        self.name = name

    def component(self, i, j, k, l):
        """Returns a_ijkl for 1-based indices."""
        return self.components[voigt_index(i - 1, j - 1), voigt_index(k - 1, l - 1)]

def parse_axis(axis):
    """Parses an in-plane axis given as 1, 2, 'y1' or 'y2' into 1 or 2."""
    text = str(axis).lower().lstrip("y")
    if text not in ("1", "2"):
        raise CellValidationError(f"axis must be y1 or y2 (got {axis})")
    return int(text)


class InclusionLayer:
    """One cylindrical inclusion (fiber or channel) running along an in-plane axis.

    The cross-section is a circle in the plane spanned by the transverse in-plane axis and y3.

    Attributes:
        kind (str): 'fiber' or 'channel' (void)
        axis (int): 1 or 2, the direction of the cylinder
        center_y3 (float): Offset of the cylinder axis from the midplane
        radius (float): Cylinder radius
        material (str): Material id (None for channels)
        in_plane_offset (float): Position of the cylinder axis along the transverse in-plane axis
        axial_span (tuple): (start, length) along the cylinder axis, None = the whole period
    """

    def __init__(
        self,
        kind: str,
        axis,
        center_y3: float,
        radius: float,
        material: str = None,
        in_plane_offset: float = 0.0,
        axial_span: tuple = None,
    ):
        violations = []
        if kind not in INCLUSION_KINDS:
            violations.append(f"inclusion kind must be one of {list(INCLUSION_KINDS)} (got {kind})")
        if kind == "fiber" and material is None:
            violations.append("fiber inclusion needs a material")
        if kind == "channel" and material is not None:
            violations.append("channel inclusion must not have a material")
        if violations:
            raise CellValidationError(violations)

        self.kind = kind
        self.axis = parse_axis(axis)
        self.center_y3 = float(center_y3)
        self.radius = float(radius)
        self.material = material
        self.in_plane_offset = float(in_plane_offset)
        self.axial_span = None if axial_span is None else (float(axial_span[0]), float(axial_span[1]))

    @property
    def transverse_axis(self):
        """The in-plane axis across the cylinder (2 for fibers along y1, 1 for fibers along y2)."""
        return 3 - self.axis

    def translated(self, shift_axial: float, shift_transverse: float, axial_period: float):
        """Returns a copy translated along and across its axis.

        Args:
            shift_axial (float): Translation along the cylinder axis
            shift_transverse (float): Translation along the transverse in-plane axis
            axial_period (float): Cell period along the axis (span length if the span was the whole period)

        Returns:
            InclusionLayer: The translated copy
        """
        start, length = self.axial_span if self.axial_span is not None else (0.0, axial_period)
        span = None
        if shift_axial != 0.0 or self.axial_span is not None:
            span = (start + shift_axial, length)
        return InclusionLayer(
            kind=self.kind,
            axis=self.axis,
            center_y3=self.center_y3,
            radius=self.radius,
            material=self.material,
            in_plane_offset=self.in_plane_offset + shift_transverse,
            axial_span=span,
        )

    def with_center(self, center_y3: float):
        """Returns a copy moved to another height."""
        return InclusionLayer(
            self.kind, self.axis, center_y3, self.radius, self.material, self.in_plane_offset, self.axial_span
        )

    def to_dict(self):
        """Returns the dictionary representation of the inclusion."""
        return del_none_from_dict(
            {
                "kind": self.kind,
                "axis": f"y{self.axis}",
                "center_y3": self.center_y3,
                "radius": self.radius,
                "material": self.material,
                "in_plane_offset": self.in_plane_offset,
                "axial_span": None if self.axial_span is None else list(self.axial_span),
            }
        )

    def __str__(self):
        return json.dumps(self.to_dict(), indent=4)


class Lamina:
    """A homogeneous band y3 in [y3_low, y3_high] made of one material (replaces the matrix there)."""

    def __init__(self, y3_low: float, y3_high: float, material: str):
        if not y3_high > y3_low:
            raise CellValidationError(f"lamina [{y3_low}, {y3_high}] has non-positive thickness")
        self.y3_low = float(y3_low)
        self.y3_high = float(y3_high)
        self.material = str(material)

    @property
    def thickness(self):
        return self.y3_high - self.y3_low

    def to_dict(self):
        return {"y3_low": self.y3_low, "y3_high": self.y3_high, "material": self.material}


class CellSpec:
    """Periodicity cell [0, h1] x [0, h2] x [-h, h].

    Attributes:
        h1 (float): Period along y1
        h2 (float): Period along y2
        half_thickness (float): h
        matrix_material (str): Material id of the matrix
        inclusions (tuple): InclusionLayer objects
        laminae (tuple): Lamina bands overriding the matrix material (empty for plain matrix cells)
        tiling (tuple): (k1, k2) if the cell was produced by tile_cell(), else (1, 1)
    """

    def __init__(
        self,
        h1: float,
        h2: float,
        half_thickness: float,
        matrix_material: str,
        inclusions=(),
        laminae=(),
        tiling=(1, 1),
    ):
        self.h1 = float(h1)
        self.h2 = float(h2)
        self.half_thickness = float(half_thickness)
        self.matrix_material = str(matrix_material)
        self.inclusions = tuple(inclusions)
        self.laminae = tuple(sorted(laminae, key=lambda lamina: lamina.y3_low))
        self.tiling = (int(tiling[0]), int(tiling[1]))

    def period(self, axis):
        """Returns the period along in-plane axis 1 or 2."""
        return self.h1 if axis == 1 else self.h2

    @property
    def thickness(self):
        return 2.0 * self.half_thickness

    def material_ids(self):
        """Returns the sorted list of all referenced (non-void) material ids."""
        ids = {self.matrix_material}
        ids.update(lamina.material for lamina in self.laminae)
        ids.update(inclusion.material for inclusion in self.inclusions if inclusion.material is not None)
        return sorted(ids)

    def layer_centers(self):
        """Returns the distinct inclusion-layer heights, ascending."""
        centers = []
        for center in sorted(inclusion.center_y3 for inclusion in self.inclusions):
            if not centers or center - centers[-1] > 1e-9 * max(1.0, self.half_thickness):
                centers.append(center)
        return centers

    def layer_pitch(self):
        """Returns the structural layer pitch S if there are >= 2 equally spaced inclusion layers, else None."""
        centers = self.layer_centers()
        if len(centers) < 2:
            return None
        gaps = np.diff(centers)
        if np.abs(gaps - gaps[0]).max() > 1e-9 * max(1.0, gaps[0]):
            return None
        return float(gaps[0])

    def stack_period(self):
        """Returns the shortest multiple of the layer pitch after which the inclusion arrangement repeats through the
        thickness (2 S for orthogonal layups), else None."""
        pitch = self.layer_pitch()
        if pitch is None:
            return None
        tolerance = 1e-9 * max(1.0, self.half_thickness)
        signatures = []
        for center in self.layer_centers():
            members = [inc for inc in self.inclusions if abs(inc.center_y3 - center) <= tolerance]
            signatures.append(
                sorted((inc.kind, inc.axis, round(inc.radius, 9), inc.material or "", round(inc.in_plane_offset, 9), inc.axial_span or ()) for inc in members)
            )
        count = len(signatures)
        for step in range(1, count):
            if all(signatures[index] == signatures[index + step] for index in range(count - step)):
                return step * pitch
        return None

    def matrix_material_at(self, y3):
        """Returns the matrix (or lamina) material id at the given heights (array)."""
        y3 = np.asarray(y3, dtype=float)
        result = np.full(y3.shape, self.matrix_material, dtype=object)
        for lamina in self.laminae:
            result[(y3 >= lamina.y3_low) & (y3 <= lamina.y3_high)] = lamina.material
        return result

    def to_dict(self):
        """Returns the dictionary representation of the cell."""
        dict_ = {
            "h1": self.h1,
            "h2": self.h2,
            "half_thickness": self.half_thickness,
            "matrix_material": self.matrix_material,
            "inclusions": [inclusion.to_dict() for inclusion in self.inclusions],
            "laminae": [lamina.to_dict() for lamina in self.laminae],
            "tiling": list(self.tiling),
        }
        return dict_

    def __str__(self):
        return json.dumps(self.to_dict(), indent=4)


class MacroMode:
    """A macroscopic mode: unit in-plane strain (nu=0) or curvature/torsion (nu=1) with a magnitude.

    Attributes:
        alpha_beta (str): '11', '22' or '12'
        nu (int): 0 (tension/shear) or 1 (bending/torsion)
        magnitude (float): Strain or curvature magnitude
    """

    def __init__(self, alpha_beta, nu: int, magnitude: float = 1.0):
        alpha_beta = str(alpha_beta)
        violations = []
        if alpha_beta == "21":
            alpha_beta = "12"
        if alpha_beta not in ALPHA_BETA:
            hint = " ('23' is not an in-plane pair, did you mean '12'?)" if alpha_beta == "23" else ""
            violations.append(f"mode alpha_beta must be one of {list(ALPHA_BETA)} (got '{alpha_beta}'){hint}")
        if nu not in (0, 1) or isinstance(nu, bool):
            violations.append(f"mode nu must be 0 or 1 (got {nu})")
        if not isinstance(magnitude, (int, float)) or not math.isfinite(magnitude):
            violations.append(f"mode magnitude must be a finite number (got {magnitude})")
        if violations:
            raise ValidationError(violations)

        self.alpha_beta = alpha_beta
        self.nu = int(nu)
        self.magnitude = float(magnitude)

    @classmethod
    def from_string(cls, text: str, magnitude: float = 1.0):
        """Parses 'AB:NU' (e.g. '11:1') into a mode."""
        parts = str(text).split(":")
        if len(parts) != 2:
            raise ValidationError(f"mode '{text}' is not of the form AB:NU")
        try:
            nu = int(parts[1])
        except ValueError:
            raise ValidationError(f"mode '{text}' has a non-integer nu")
        return cls(parts[0].strip(), nu, magnitude)

    @property
    def key(self):
        """'AB:NU' identifier (magnitude not included)."""
        return f"{self.alpha_beta}:{self.nu}"

    @property
    def indices(self):
        """0-based (alpha, beta)."""
        return int(self.alpha_beta[0]) - 1, int(self.alpha_beta[1]) - 1

    def unit(self):
        """Returns the same mode with magnitude 1."""
        return MacroMode(self.alpha_beta, self.nu, 1.0)

    def to_dict(self):
        return {"alpha_beta": self.alpha_beta, "nu": self.nu, "magnitude": self.magnitude}

    def __eq__(self, other):
        return isinstance(other, MacroMode) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.alpha_beta, self.nu, self.magnitude))

    def __repr__(self):
        return f"MacroMode({self.key}, magnitude={self.magnitude})"


# -- Mesh -----------------------------------------------------------------------------------------


class HexMesh:
    """Structured hexahedral mesh of a periodicity cell with per-element phase tags.

    Node (i, j, k) has id i + (n1+1) * (j + (n2+1) * k); element (i, j, k) has id i + n1 * (j + n2 * k).

    Attributes:
        spec (CellSpec): The meshed cell
        grid (tuple): Grid line coordinates (y1, y2, y3)
        resolution (tuple): (n1, n2, n3)
        nodes (np.ndarray): (N, 3) node coordinates
        node_grid_index (np.ndarray): (N, 3) lattice indices
        elements (np.ndarray): (E, 8) connectivity
        element_grid_index (np.ndarray): (E, 3) lattice indices
        phase (np.ndarray): (E,) index into phase_labels, VOID for channels
        phase_labels (tuple): Material ids
        inclusion (np.ndarray): (E,) index of the inclusion that tagged the element, -1 for matrix
    """

    def __init__(self, spec: CellSpec, grid, phase, phase_labels, inclusion):
        self.spec = spec
        self.grid = tuple(_frozen(axis) for axis in grid)
        self.resolution = tuple(len(axis) - 1 for axis in self.grid)
        n1, n2, n3 = self.resolution

        k, j, i = np.indices((n3 + 1, n2 + 1, n1 + 1))
        index = np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1)
        self.node_grid_index = _frozen(index, dtype=np.int64)
        self.nodes = _frozen(np.stack([self.grid[0][index[:, 0]], self.grid[1][index[:, 1]], self.grid[2][index[:, 2]]], axis=1))

        k, j, i = np.indices((n3, n2, n1))
        element_index = np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1)
        self.element_grid_index = _frozen(element_index, dtype=np.int64)
        corners = np.array(ELEMENT_CORNERS)
        corner_index = element_index[:, None, :] + corners[None, :, :]
        self.elements = _frozen(self.node_id(corner_index[..., 0], corner_index[..., 1], corner_index[..., 2]), dtype=np.int64)

        self.phase = _frozen(phase, dtype=np.int64)
        self.phase_labels = tuple(phase_labels)
        self.inclusion = _frozen(inclusion, dtype=np.int64)

        sizes = np.stack(
            [np.diff(self.grid[0])[element_index[:, 0]], np.diff(self.grid[1])[element_index[:, 1]], np.diff(self.grid[2])[element_index[:, 2]]],
            axis=1,
        )
        self.element_sizes = _frozen(sizes)

    def node_id(self, i, j, k):
        """Returns node ids for lattice indices (scalars or arrays)."""
        n1, n2, _ = self.resolution
        return i + (n1 + 1) * (j + (n2 + 1) * k)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def active(self):
        """Mask of non-void elements."""
        return self.phase != VOID

    @property
    def matrix(self):
        """Mask of matrix-phase (non-void, not inside an inclusion) elements."""
        return (self.phase != VOID) & (self.inclusion < 0)

    @property
    def inclusion_phase(self):
        """Mask of elements tagged by a fiber."""
        return (self.phase != VOID) & (self.inclusion >= 0)

    def element_volumes(self):
        return np.prod(self.element_sizes, axis=1)

    def element_centroids(self):
        n1, n2, n3 = self.resolution
        mids = [0.5 * (axis[1:] + axis[:-1]) for axis in self.grid]
        index = self.element_grid_index
        return np.stack([mids[0][index[:, 0]], mids[1][index[:, 1]], mids[2][index[:, 2]]], axis=1)

    def phase_names(self):
        """Returns the material id (or 'void') per element."""
        labels = np.array(list(self.phase_labels) + ["void"], dtype=object)
        return labels[self.phase]  # VOID == -1 picks the trailing 'void'

    def surface_nodes(self, surface):
        """Returns node ids of the top or bottom surface as an (n1+1, n2+1) array indexed [i, j]."""
        n1, n2, n3 = self.resolution
        k = n3 if surface == "top" else 0
        i, j = np.meshgrid(np.arange(n1 + 1), np.arange(n2 + 1), indexing="ij")
        return self.node_id(i, j, k)

    def __str__(self):
        counts = {label: int(np.sum(self.phase == index)) for index, label in enumerate(self.phase_labels)}
        counts["void"] = int(np.sum(self.phase == VOID))
        return json.dumps({"resolution": list(self.resolution), "elements": self.n_elements, "phases": counts}, indent=4)


class PeriodicPairs:
    """Node pairs on opposite faces of one in-plane axis.

    Attributes:
        axis (int): 1 or 2
        pairs (np.ndarray): (P, 2) array of (master_node, slave_node), slave = master + h_axis e_axis
    """

    def __init__(self, axis: int, pairs):
        self.axis = int(axis)
        self.pairs = _frozen(np.asarray(pairs).reshape(-1, 2), dtype=np.int64)

    def __len__(self):
        return self.pairs.shape[0]


# -- Fields ---------------------------------------------------------------------------------------


class AffineField:
    """The closed-form unit field xi of a mode.

    nu = 0: xi_k = (d_ka y_b + d_kb y_a) / 2
    nu = 1: xi_g = y3 (d_ga y_b + d_gb y_a) / 2 for g in {1, 2}, xi_3 = -y_a y_b / 2

    Attributes:
        mode (MacroMode): The mode (its magnitude is not applied by evaluate())
    """

    def __init__(self, mode: MacroMode):
        self.mode = mode

    def evaluate(self, points):
        """Evaluates xi at (N, 3) points, returns (N, 3)."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        a, b = self.mode.indices
        values = np.zeros_like(points)
        weight = points[:, 2] if self.mode.nu == 1 else 1.0
        values[:, a] += 0.5 * weight * points[:, b]
        values[:, b] += 0.5 * weight * points[:, a]
        if self.mode.nu == 1:
            values[:, 2] = -0.5 * points[:, a] * points[:, b]
        return values

    def jump(self, axis: int, period: float, points):
        """Returns xi(y + period e_axis) - xi(y) at the points (pointwise, valid for every mode)."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        shifted = points.copy()
        shifted[:, axis - 1] += period
        return self.evaluate(shifted) - self.evaluate(points)

    def jump_vectors(self, h1: float, h2: float):
        """Returns the constant jump vector per axis, or None for an axis where the jump varies over the face (bending)."""
        result = {}
        for axis, period in ((1, h1), (2, h2)):
            if self.mode.nu == 0:
                result[axis] = self.jump(axis, period, np.zeros((1, 3)))[0]
            else:
                result[axis] = None
        return result


class CorrectorField:
    """Solved nodal field Z of one cell problem.

    Attributes:
        mode (MacroMode): The mode, including its magnitude
        mesh (HexMesh): The mesh the field lives on
        displacements (np.ndarray): (N, 3) nodal Z (gauge: zero volume average)
        element (str): 'hex8' or 'hex8i'
        solver_report (dict): method, iterations, residual, dofs
        active_nodes (np.ndarray): (N,) mask of nodes attached to a non-void element
    """

    def __init__(self, mode: MacroMode, mesh: HexMesh, displacements, element: str, solver_report: dict, active_nodes=None):
        self.mode = mode
        self.mesh = mesh
        self.displacements = _frozen(np.asarray(displacements).reshape(-1, 3))
        self.element = element
        self.solver_report = dict(solver_report)
        if active_nodes is None:
            active_nodes = np.ones(mesh.n_nodes, dtype=bool)
        self.active_nodes = _frozen(active_nodes, dtype=bool)

    def shifted(self, vector):
        """Returns a copy with a constant vector added to every active node (gauge change)."""
        displacements = np.array(self.displacements)
        displacements[self.active_nodes] += np.asarray(vector, dtype=float)
        return CorrectorField(self.mode, self.mesh, displacements, self.element, self.solver_report, self.active_nodes)


class StressField:
    """Per-element stresses of one mode (or of a superposition of modes).

    Attributes:
        mode (MacroMode): The mode (None for superposed fields)
        mesh (HexMesh): The mesh
        stress (np.ndarray): (E, 6) Gauss-averaged stress in Voigt order 11, 22, 33, 23, 13, 12; zero for void elements
        gauss_stress (np.ndarray): (E, 8, 6) Gauss-point stresses (None if not kept)
        label (str): Name used in outputs
    """

    def __init__(self, mode, mesh: HexMesh, stress, gauss_stress=None, label: str = None):
        self.mode = mode
        self.mesh = mesh
        self.stress = _frozen(np.asarray(stress).reshape(-1, 6))
        self.gauss_stress = None if gauss_stress is None else _frozen(gauss_stress)
        self.label = label or (mode.key.replace(":", "_") if mode is not None else "combined")


class RigidityTable:
    """Homogenized plate rigidities A[nu][mu][gd][ab] per unit cell area, plus neutral planes.

    Attributes:
        values (np.ndarray): (2, 2, 3, 3) array, pair order ALPHA_BETA
        neutral_planes (dict): alpha_beta -> h (filled by the homogenization helper)
        origin_shift (float): Accumulated y3 shift applied by shift_rigidities()
    """

    def __init__(self, values, neutral_planes=None, origin_shift: float = 0.0):
        self.values = _frozen(np.asarray(values).reshape(2, 2, 3, 3))
        self.neutral_planes = dict(neutral_planes or {})
        self.origin_shift = float(origin_shift)

    def entry(self, nu: int, mu: int, gamma_delta: str, alpha_beta: str):
        """Returns A[nu][mu][gamma_delta][alpha_beta]."""
        return float(self.values[nu, mu, ALPHA_BETA.index(gamma_delta), ALPHA_BETA.index(alpha_beta)])

    def rows(self):
        """Returns the table as a list of dict rows (nu, mu, gamma_delta, alpha_beta, value) in fixed order."""
        rows = []
        for nu in (0, 1):
            for mu in (0, 1):
                for g, gamma_delta in enumerate(ALPHA_BETA):
                    for a, alpha_beta in enumerate(ALPHA_BETA):
                        rows.append(
                            {
                                "nu": nu,
                                "mu": mu,
                                "gamma_delta": gamma_delta,
                                "alpha_beta": alpha_beta,
                                "value": float(self.values[nu, mu, g, a]),
                            }
                        )
        return rows

    def abd(self):
        """Returns the 6x6 matrix [[A0, A1], [A1', A2]] (rows: test pair/moment, columns: mode pair/nu)."""
        return np.block([[self.values[0, 0], self.values[1, 0]], [self.values[0, 1], self.values[1, 1]]])


# -- Analysis reports -----------------------------------------------------------------------------


class LayerProfile:
    """Per-slab (element layer) von Mises statistics of one stress field.

    Attributes:
        label (str): Field label
        slabs (np.ndarray): (S, 2) y3 bounds per slab, ascending
        matrix_mean, matrix_max, inclusion_mean, inclusion_max (np.ndarray): (S,) statistics (0 where the phase is absent)
        deviation (np.ndarray): (S,) periodicity deviation d(slab)
        pitch (float): Distance between the slabs compared by d (None if not layered)
        half_thickness (float): h of the cell
        structural_bounds (np.ndarray): y3 bounds of the structural layers, ascending (None if not layered)
        layer_pitch (float): Structural layer pitch S (defaults to pitch)
    """

    def __init__(
        self, label, slabs, matrix_mean, matrix_max, inclusion_mean, inclusion_max, deviation, pitch, half_thickness, structural_bounds=None, layer_pitch=None
    ):
        self.label = label
        self.slabs = _frozen(slabs)
        self.matrix_mean = _frozen(matrix_mean)
        self.matrix_max = _frozen(matrix_max)
        self.inclusion_mean = _frozen(inclusion_mean)
        self.inclusion_max = _frozen(inclusion_max)
        self.deviation = _frozen(deviation)
        self.pitch = None if pitch is None else float(pitch)
        self.half_thickness = float(half_thickness)
        self.structural_bounds = None if structural_bounds is None else _frozen(structural_bounds)
        self.layer_pitch = self.pitch if layer_pitch is None else float(layer_pitch)

    def rows(self):
        return [
            {
                "slab": index,
                "y3_low": float(self.slabs[index, 0]),
                "y3_high": float(self.slabs[index, 1]),
                "matrix_mean": float(self.matrix_mean[index]),
                "matrix_max": float(self.matrix_max[index]),
                "inclusion_mean": float(self.inclusion_mean[index]),
                "inclusion_max": float(self.inclusion_max[index]),
                "deviation": float(self.deviation[index]),
            }
            for index in range(self.slabs.shape[0])
        ]


class SkinCoreDecomposition:
    """Top skin / core / bottom skin partition of [-h, h].

    Attributes:
        top_skin, core, bottom_skin (tuple): (y3_low, y3_high) intervals
        pitch (float): Structural pitch S
        skin_layers (dict): surface -> number of structural layers in the skin
        boundary_layer (dict): surface -> measured boundary-layer thickness (length)
    """

    def __init__(self, top_skin, core, bottom_skin, pitch, skin_layers, boundary_layer, core_layers):
        self.top_skin = (float(top_skin[0]), float(top_skin[1]))
        self.core = (float(core[0]), float(core[1]))
        self.bottom_skin = (float(bottom_skin[0]), float(bottom_skin[1]))
        self.pitch = float(pitch)
        self.skin_layers = dict(skin_layers)
        self.core_layers = int(core_layers)
        self.boundary_layer = dict(boundary_layer)

    def thickness(self, zone):
        """Thickness of 'top_skin', 'core' or 'bottom_skin' in length units."""
        low, high = getattr(self, zone)
        return high - low

    def rows(self):
        rows = []
        for zone in ("top_skin", "core", "bottom_skin"):
            low, high = getattr(self, zone)
            surface = zone.split("_")[0]
            rows.append(
                {
                    "zone": zone,
                    "y3_low": low,
                    "y3_high": high,
                    "thickness": high - low,
                    "thickness_in_pitch": (high - low) / self.pitch if self.pitch else None,
                    "structural_layers": self.core_layers if zone == "core" else self.skin_layers[surface],
                    "boundary_layer": self.boundary_layer.get(surface, 0.0) if zone != "core" else 0.0,
                }
            )
        return rows


class SimilarityReport:
    """Comparison of the matrix-phase von Mises stress of two zones.

    Attributes:
        zone_a, zone_b (tuple): Compared y3 intervals
        rel_l2 (float): ||a - b|| / max(||a||, ||b||)
        rel_max (float): |max a - max b| / max(max a, max b)
        per_slab (list): rel_l2 per registered slab pair
        threshold (float): Informative threshold on rel_l2
        label (str): Free-form label (e.g. 'layer 2 vs core layer 5')
    """

    def __init__(self, zone_a, zone_b, rel_l2, rel_max, per_slab, threshold, label=""):
        self.zone_a = (float(zone_a[0]), float(zone_a[1]))
        self.zone_b = (float(zone_b[0]), float(zone_b[1]))
        self.rel_l2 = float(rel_l2)
        self.rel_max = float(rel_max)
        self.per_slab = [float(value) for value in per_slab]
        self.threshold = float(threshold)
        self.label = label

    @property
    def informative(self):
        return self.rel_l2 <= self.threshold

    @property
    def verdict(self):
        return "informative" if self.informative else "non-informative"

    def to_dict(self):
        return {
            "label": self.label,
            "zone_a_low": self.zone_a[0],
            "zone_a_high": self.zone_a[1],
            "zone_b_low": self.zone_b[0],
            "zone_b_high": self.zone_b[1],
            "rel_l2": self.rel_l2,
            "rel_max": self.rel_max,
            "threshold": self.threshold,
            "verdict": self.verdict,
        }

    def __str__(self):
        return json.dumps(self.to_dict(), indent=4)


class WrinkleReport:
    """Deviation of a deformed plate surface from its macroscopic (flat or cylindrical) baseline.

    Attributes:
        surface (str): 'top' or 'bottom'
        mode (MacroMode): The mode
        baseline (dict): Baseline coefficients (offset, slope_1, slope_2, curvature)
        deviation (np.ndarray): (n1+1, n2+1) residual on the surface nodes
        amplitude (float): max |deviation|
        slope_rms (float): rms of |grad deviation|
        area_ratio (float): mean of sqrt(1 + |grad deviation|^2)
        periodic (bool): The deviation repeats across tiled cells within tolerance
        periodicity_error (float): Largest difference between corresponding tile values
    """

    def __init__(self, surface, mode, baseline, deviation, amplitude, slope_rms, area_ratio, periodic, periodicity_error):
        self.surface = surface
        self.mode = mode
        self.baseline = dict(baseline)
        self.deviation = _frozen(deviation)
        self.amplitude = float(amplitude)
        self.slope_rms = float(slope_rms)
        self.area_ratio = float(area_ratio)
        self.periodic = bool(periodic)
        self.periodicity_error = float(periodicity_error)

    def to_dict(self):
        return {
            "mode": self.mode.key,
            "surface": self.surface,
            "amplitude": self.amplitude,
            "slope_rms": self.slope_rms,
            "area_ratio": self.area_ratio,
            "periodic": self.periodic,
            "periodicity_error": self.periodicity_error,
            "baseline_offset": self.baseline.get("offset", 0.0),
            "baseline_slope_1": self.baseline.get("slope_1", 0.0),
            "baseline_slope_2": self.baseline.get("slope_2", 0.0),
            "baseline_curvature": self.baseline.get("curvature", 0.0),
        }

    def __str__(self):
        return json.dumps(self.to_dict(), indent=4)


# -- Run config and results -----------------------------------------------------------------------


class RunConfig:
    """Typed view of a validated run config.

    Attributes:
        cfg (dict): The normalized config dict
        materials (dict): id -> IsotropicMaterial
        cell (CellSpec): The periodicity cell
        resolution (tuple): (n1, n2, n3)
        modes (list): MacroMode objects
        epsilon (float): Physical cell size scale
        solver (dict): method, tolerance, max_iterations, element
        analysis (dict): thresholds, pitch override, tile, representative alignment
        outputs (dict): directory, formats
    """

    def __init__(self, cfg, materials, cell, resolution, modes, epsilon, solver, analysis, outputs):
        self.cfg = cfg
        self.materials = dict(materials)
        self.cell = cell
        self.resolution = tuple(resolution)
        self.modes = list(modes)
        self.epsilon = float(epsilon)
        self.solver = dict(solver)
        self.analysis = dict(analysis)
        self.outputs = dict(outputs)

    def __str__(self):
        return json.dumps(self.cfg, indent=2, sort_keys=True)


class ResultBundle:
    """Everything a pipeline run produced.

    Attributes:
        run_config (RunConfig): The config the run used
        mesh (HexMesh): The mesh of the main cell
        correctors (dict): mode key -> CorrectorField
        stress_fields (dict): mode key -> StressField
        von_mises (dict): mode key -> (E,) array
        rigidities (RigidityTable): None unless homogenized
        profiles (dict): mode key -> LayerProfile
        decompositions (dict): mode key -> SkinCoreDecomposition
        similarity (list): SimilarityReport objects
        verdicts (dict): representative label -> list of per-layer verdicts
        wrinkles (list): WrinkleReport objects
        diagnostics (list): Solver reports (dicts)
        files (list): Paths written
    """

    def __init__(self, run_config, mesh=None):
        self.run_config = run_config
        self.mesh = mesh
        self.correctors = {}
        self.stress_fields = {}
        self.von_mises = {}
        self.rigidities = None
        self.profiles = {}
        self.decompositions = {}
        self.similarity = []
        self.verdicts = {}
        self.wrinkles = []
        self.diagnostics = []
        self.files = []

    def missing_fields(self):
        """Returns the requested mode keys without a stress field."""
        return [mode.key for mode in self.run_config.modes if mode.key not in self.stress_fields]
