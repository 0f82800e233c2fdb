# PLATECELL
# This helper module assembles and solves the periodicity cell problem for the macroscopic modes.
#
# For each mode the total field Z (corrector plus unit field) is sought on the structured mesh:
# - elasticity with trilinear hexahedra (optionally enriched with condensed incompatible modes),
# - Z(node) = Z(image) + m (xi(node) - xi(image)) for every node on a periodic face, where image is the
#   node with in-plane grid indices reduced modulo (n1, n2); slave dofs are eliminated through a prolongation map,
# - traction-free top and bottom faces (natural condition),
# - zero volume-average displacement (the rigid translations are projected out).
# The reduced stiffness does not depend on the mode, so a CellSystem is assembled once and reused for all modes.

from functools import reduce

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

import lib.logging_helper as logging_helper
from lib.class_helper import (
    ELEMENT_CORNERS,
    AffineField,
    CorrectorField,
    HexMesh,
    MacroMode,
    MissingModeError,
    SolverError,
    ValidationError,
)
from lib.generic_helper import parallel_map
from lib.mesh_helper import periodic_images

SOLVER_DEFAULTS = {
    "method": "cg",  # 'cg' (Jacobi preconditioned) or 'direct'
    "tolerance": 1e-9,  # Relative residual
    "max_iterations": None,  # None = 50 * sqrt(dofs)
    "element": "hex8",  # 'hex8' or 'hex8i' (incompatible modes)
}
SOLVER_METHODS = ("cg", "direct")
ELEMENT_TYPES = ("hex8", "hex8i")
ITERATION_CAP_FACTOR = 50
ASSEMBLY_BATCH = 4096  # Elements per assembly batch

GAUSS = 1.0 / np.sqrt(3.0)
_SIGNS = 2.0 * np.array(ELEMENT_CORNERS, dtype=float) - 1.0  # Natural coordinates of the 8 nodes
_GAUSS_POINTS = GAUSS * _SIGNS  # 2x2x2 Gauss points, same ordering as the nodes

mlog = logging_helper.Log("lib.fem_helper")


def _reference_gradients():
    """dN_a/dxi at the Gauss points, shape (8 points, 8 nodes, 3)."""
    factors = 1.0 + _GAUSS_POINTS[:, None, :] * _SIGNS[None, :, :]  # (g, a, d)
    gradients = np.empty((8, 8, 3))
    for d in range(3):
        others = [e for e in range(3) if e != d]
        gradients[:, :, d] = 0.125 * _SIGNS[None, :, d] * factors[:, :, others[0]] * factors[:, :, others[1]]
    return gradients


_REFERENCE_GRADIENTS = _reference_gradients()


def _strain_matrix(gradients):
    """Builds the small-strain operators (G, 6, 3n) from shape gradients (G, n, 3). Rows: 11, 22, 33, 23, 13, 12."""
    points, count, _ = gradients.shape
    gx, gy, gz = gradients[:, :, 0], gradients[:, :, 1], gradients[:, :, 2]
    B = np.zeros((points, 6, 3 * count))
    B[:, 0, 0::3] = gx
    B[:, 1, 1::3] = gy
    B[:, 2, 2::3] = gz
    B[:, 3, 1::3] = gz
    B[:, 3, 2::3] = gy
    B[:, 4, 0::3] = gz
    B[:, 4, 2::3] = gx
    B[:, 5, 0::3] = gy
    B[:, 5, 1::3] = gx
    return B


def element_matrices(dims, components, element="hex8"):
    """Returns the stiffness and Gauss-point strain operators of a box element.

    Args:
        dims (tuple): Element edge lengths (dx, dy, dz)
        components (np.ndarray): 6x6 Voigt stiffness
        element (str): 'hex8' or 'hex8i'

    Returns:
        tuple: (K (24, 24), B (8, 6, 24), weight) where weight is the Gauss weight times the Jacobian determinant
    """
    dims = np.asarray(dims, dtype=float)
    weight = np.prod(dims) / 8.0
    B = _strain_matrix(_REFERENCE_GRADIENTS * (2.0 / dims)[None, None, :])
    K = weight * np.einsum("gji,jk,gkl->il", B, components, B)
    if element == "hex8":
        return 0.5 * (K + K.T), B, weight

    # Bubbles P_m = 1 - xi_m^2 per axis and component, condensed per element
    bubble_gradients = np.zeros((8, 3, 3))
    for m in range(3):
        bubble_gradients[:, m, m] = -2.0 * _GAUSS_POINTS[:, m] * 2.0 / dims[m]
    Ba = _strain_matrix(bubble_gradients)
    Kau = weight * np.einsum("gji,jk,gkl->il", Ba, components, B)
    Kaa = weight * np.einsum("gji,jk,gkl->il", Ba, components, Ba)
    condensation = -np.linalg.solve(Kaa, Kau)
    K = K + Kau.T @ condensation
    B_effective = B + np.einsum("gij,jk->gik", Ba, condensation)
    return 0.5 * (K + K.T), B_effective, weight


def unit_strain_field(mode: MacroMode):
    """Returns the closed-form unit field xi of a mode (see AffineField)."""
    return AffineField(mode)


def solver_options(solver_opts=None):
    """Fills solver defaults and validates the options."""
    options = dict(SOLVER_DEFAULTS)
    options.update({key: value for key, value in (solver_opts or {}).items() if value is not None})
    violations = []
    if options["method"] not in SOLVER_METHODS:
        violations.append(f"solver method must be one of {list(SOLVER_METHODS)} (got {options['method']})")
    if options["element"] not in ELEMENT_TYPES:
        violations.append(f"element must be one of {list(ELEMENT_TYPES)} (got {options['element']})")
    if not isinstance(options["tolerance"], (int, float)) or not options["tolerance"] > 0:
        violations.append(f"solver tolerance must be > 0 (got {options['tolerance']})")
    if options["max_iterations"] is not None and (not isinstance(options["max_iterations"], int) or options["max_iterations"] < 1):
        violations.append(f"max_iterations must be a positive integer (got {options['max_iterations']})")
    if violations:
        raise ValidationError(violations)
    return options


class ElementTable:
    """Per element-type matrices of a mesh. A type is a (y3 element layer, phase) pair; void elements have none.

    Attributes:
        element (str): Element type
        key (np.ndarray): (E,) index into the per-type arrays, -1 for void elements
        stiffness (np.ndarray): (T, 24, 24) element stiffness
        strain_operators (np.ndarray): (T, 8, 6, 24) Gauss-point strain operators (incompatible modes re-expanded)
        compatible_operators (np.ndarray): (T, 8, 6, 24) Gauss-point operators of the trilinear interpolation alone
        components (np.ndarray): (T, 6, 6) Voigt stiffness
        weights (np.ndarray): (T,) Gauss weight times Jacobian
    """

    def __init__(self, mesh: HexMesh, tensors: dict, element: str = "hex8"):
        if element not in ELEMENT_TYPES:
            raise ValidationError(f"element must be one of {list(ELEMENT_TYPES)} (got {element})")
        missing = sorted({mesh.phase_labels[code] for code in np.unique(mesh.phase[mesh.active])} - set(tensors))
        if missing:
            raise MissingModeError([f"no elasticity tensor for material '{name}'" for name in missing])

        self.element = element
        active = mesh.active
        pairs = np.stack([mesh.element_grid_index[:, 2], mesh.phase], axis=1)
        self.key = np.full(mesh.n_elements, -1, dtype=np.int64)
        if not np.any(active):
            unique = np.zeros((0, 2), dtype=np.int64)
        else:
            unique, inverse = np.unique(pairs[active], axis=0, return_inverse=True)
            self.key[active] = inverse.ravel()

        dx = mesh.grid[0][1] - mesh.grid[0][0]
        dy = mesh.grid[1][1] - mesh.grid[1][0]
        stiffness, operators, compatible, components, weights = [], [], [], [], []
        for k, code in unique:
            dims = np.array([dx, dy, mesh.grid[2][k + 1] - mesh.grid[2][k]])
            D = tensors[mesh.phase_labels[code]].components
            K, B, weight = element_matrices(dims, D, element)
            stiffness.append(K)
            operators.append(B)
            compatible.append(_strain_matrix(_REFERENCE_GRADIENTS * (2.0 / dims)[None, None, :]))
            components.append(D)
            weights.append(weight)
        self.stiffness = np.array(stiffness).reshape(-1, 24, 24)
        self.strain_operators = np.array(operators).reshape(-1, 8, 6, 24)
        self.compatible_operators = np.array(compatible).reshape(-1, 8, 6, 24)
        self.components = np.array(components).reshape(-1, 6, 6)
        self.weights = np.array(weights)
        mlog.debug(f"{len(unique)} element types ({element})")

    def __len__(self):
        return self.stiffness.shape[0]

    def members(self, key):
        """Returns the element ids of one type."""
        return np.flatnonzero(self.key == key)


class CellSystem:
    """The reduced (periodic, slave-eliminated) stiffness system of one mesh and material set.

    Attributes:
        mesh (HexMesh): The mesh
        element (str): Element type
        table (ElementTable): Per element-type matrices
        images (np.ndarray): (N,) independent image node per node
        reduced_index (np.ndarray): (N,) reduced node index (via the image), -1 for detached nodes
        prolongation (scipy.sparse.csr_matrix): (3N, 3R) map from reduced to full dofs
        matrix (scipy.sparse.csr_matrix): (3R, 3R) reduced stiffness
        active_nodes (np.ndarray): (N,) nodes attached to a non-void element
        node_weights (np.ndarray): (N,) lumped nodal volumes (zero-average gauge)
    """

    def __init__(self, mesh: HexMesh, tensors: dict, element: str = "hex8"):
        self.mesh = mesh
        self.element = element
        self.table = ElementTable(mesh, tensors, element)
        if not np.any(mesh.active):
            raise SolverError("singular system: the cell has no solid element", {"dofs": 0})

        self._build_reduction()
        self._check_connectivity()
        self._assemble()

    def _build_reduction(self):
        mesh = self.mesh
        active_elements = mesh.elements[mesh.active]
        self.active_nodes = np.zeros(mesh.n_nodes, dtype=bool)
        self.active_nodes[active_elements.ravel()] = True

        self.images = periodic_images(mesh)
        active_images = np.zeros(mesh.n_nodes, dtype=bool)
        active_images[self.images[self.active_nodes]] = True
        image_number = np.full(mesh.n_nodes, -1, dtype=np.int64)
        image_number[active_images] = np.arange(int(active_images.sum()))
        self.n_reduced = int(active_images.sum())
        self.reduced_index = np.where(self.active_nodes, image_number[self.images], -1)

        rows = np.flatnonzero(np.repeat(self.active_nodes, 3))
        nodes = rows // 3
        cols = 3 * self.reduced_index[nodes] + rows % 3
        self.prolongation = sp.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(3 * mesh.n_nodes, 3 * self.n_reduced)
        )

        volumes = mesh.element_volumes()
        self.node_weights = np.bincount(
            mesh.elements[mesh.active].ravel(),
            weights=np.repeat(volumes[mesh.active] / 8.0, 8),
            minlength=mesh.n_nodes,
        )

        reduced_nodes = self.reduced_index[mesh.elements]  # (E, 8)
        self.element_dofs = (3 * reduced_nodes[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 24)

    def _check_connectivity(self):
        reduced_nodes = self.reduced_index[self.mesh.elements[self.mesh.active]]
        rows = np.repeat(reduced_nodes[:, 0], 7)
        cols = reduced_nodes[:, 1:].ravel()
        graph = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(self.n_reduced, self.n_reduced))
        parts, _ = connected_components(graph, directed=False)
        if parts > 1:
            raise SolverError(
                f"singular system: void elements split the cell into {parts} disconnected parts",
                {"dofs": 3 * self.n_reduced},
            )

    def _assemble_batch(self, batch):
        dofs = self.element_dofs[batch]
        data = self.table.stiffness[self.table.key[batch]]
        rows = np.broadcast_to(dofs[:, :, None], data.shape).ravel()
        cols = np.broadcast_to(dofs[:, None, :], data.shape).ravel()
        size = 3 * self.n_reduced
        return sp.coo_matrix((data.ravel(), (rows, cols)), shape=(size, size)).tocsr()

    def _assemble(self):
        active = np.flatnonzero(self.mesh.active)
        batches = [active[start : start + ASSEMBLY_BATCH] for start in range(0, active.size, ASSEMBLY_BATCH)]
        parts = parallel_map(self._assemble_batch, batches)
        matrix = reduce(lambda a, b: a + b, parts)
        self.matrix = ((matrix + matrix.T) * 0.5).tocsr()
        mlog.info(f"Assembled reduced system: {3 * self.n_reduced} dofs, {self.matrix.nnz} non-zeros")

    @property
    def dofs(self):
        return 3 * self.n_reduced

    def jump_offsets(self, mode: MacroMode):
        """Returns g (N, 3) = m (xi(node) - xi(image)) for every node."""
        xi = AffineField(mode)
        nodes = self.mesh.nodes
        return mode.magnitude * (xi.evaluate(nodes) - xi.evaluate(nodes[self.images]))

    def rhs(self, mode: MacroMode):
        """Returns (f, g): the reduced load f = -P^T K g carried by the affine jumps, and the offsets g."""
        g = self.jump_offsets(mode)
        f = np.zeros(self.dofs)
        if not np.any(g):
            return f, g
        elements = self.mesh.elements
        for key in range(len(self.table)):
            members = self.table.members(key)
            local = g[elements[members]].reshape(-1, 24)
            if not np.any(local):
                continue
            forces = local @ self.table.stiffness[key].T
            f -= np.bincount(self.element_dofs[members].ravel(), weights=forces.ravel(), minlength=self.dofs)
        return f, g

    def _project(self, vector):
        projected = vector.reshape(-1, 3)
        return (projected - projected.mean(axis=0)).ravel()

    def _solve_cg(self, f, options):
        cap = options["max_iterations"] or int(ITERATION_CAP_FACTOR * np.sqrt(self.dofs)) + 1
        diagonal = self.matrix.diagonal()
        preconditioner = sp.diags(1.0 / diagonal)
        iterations = [0]

        def count(_):
            iterations[0] += 1

        solution, info = spla.cg(self.matrix, f, rtol=options["tolerance"], atol=0.0, maxiter=cap, M=preconditioner, callback=count)
        residual = np.linalg.norm(f - self.matrix @ solution) / np.linalg.norm(f)
        report = {"method": "cg", "iterations": iterations[0], "residual": float(residual), "dofs": self.dofs}
        if info != 0 or not np.isfinite(residual):
            raise SolverError(
                f"conjugate gradient did not converge within {cap} iterations (relative residual {residual:.3e})",
                report,
            )
        return solution, report

    def _solve_direct(self, f, options):
        free = np.arange(3, self.dofs)
        reduced = self.matrix[free][:, free].tocsc()
        solution = np.zeros(self.dofs)
        try:
            solution[free] = spla.spsolve(reduced, f[free])
        except RuntimeError as e:
            raise SolverError(f"singular system: {e}", {"method": "direct", "dofs": self.dofs})
        residual = np.linalg.norm(f - self.matrix @ solution) / np.linalg.norm(f)
        report = {"method": "direct", "iterations": 1, "residual": float(residual), "dofs": self.dofs}
        if not np.isfinite(residual) or residual > max(1e3 * options["tolerance"], 1e-6):
            raise SolverError(f"singular system: direct solve left relative residual {residual:.3e}", report)
        return solution, report

    def solve(self, mode: MacroMode, solver_opts=None):
        """Solves the cell problem of one mode.

        Args:
            mode (MacroMode): The mode (its magnitude scales the jumps)
            solver_opts (dict): method, tolerance, max_iterations

        Returns:
            CorrectorField: Z with zero volume-average displacement

        Raises:
            SolverError: On non-convergence or a singular system
        """
        options = solver_options(solver_opts)
        f, g = self.rhs(mode)
        f = self._project(f)
        norm = np.linalg.norm(f)
        if norm == 0.0:
            reduced = np.zeros(self.dofs)
            report = {"method": options["method"], "iterations": 0, "residual": 0.0, "dofs": self.dofs}
        elif options["method"] == "direct":
            reduced, report = self._solve_direct(f, options)
        else:
            reduced, report = self._solve_cg(f, options)

        displacements = (self.prolongation @ reduced).reshape(-1, 3) + np.where(self.active_nodes[:, None], g, 0.0)
        total = self.node_weights.sum()
        mean = (self.node_weights[:, None] * displacements).sum(axis=0) / total

        report["mode"] = mode.key
        report["magnitude"] = mode.magnitude
        mlog.info(
            f"Solved mode {mode.key} (m={mode.magnitude:g}): {report['method']}, {report['iterations']} iterations, residual {report['residual']:.2e}"
        )
        return CorrectorField(mode, self.mesh, displacements, self.element, report, self.active_nodes).shifted(-mean)


def assemble_system(mesh: HexMesh, tensors: dict, element: str = "hex8"):
    """Assembles the reduced cell system (reusable for every mode on this mesh)."""
    return CellSystem(mesh, tensors, element)


def solve_pcp(mesh: HexMesh, tensors: dict, mode: MacroMode, solver_opts=None, system: CellSystem = None):
    """Solves the periodicity cell problem of one mode.

    Args:
        mesh (HexMesh): The mesh
        tensors (dict): Material id -> ElasticityTensor
        mode (MacroMode): The mode
        solver_opts (dict): method, tolerance, max_iterations, element
        system (CellSystem): A previously assembled system to reuse

    Returns:
        CorrectorField: The solved field
    """
    options = solver_options(solver_opts)
    if system is None:
        system = CellSystem(mesh, tensors, options["element"])
    elif system.mesh is not mesh:
        raise ValidationError("the assembled system belongs to another mesh")
    return system.solve(mode, options)


def solve_modes(mesh: HexMesh, tensors: dict, modes, solver_opts=None):
    """Solves several modes on one mesh, sharing the assembled system. Modes run concurrently.

    Returns:
        dict: mode key -> CorrectorField (input order)
    """
    options = solver_options(solver_opts)
    system = CellSystem(mesh, tensors, options["element"])
    modes = list(modes)
    correctors = parallel_map(lambda mode: system.solve(mode, options), modes)
    return {mode.key: corrector for mode, corrector in zip(modes, correctors)}


def recover_N(corrector: CorrectorField, xi: AffineField):
    """Returns the periodic corrector N = Z / m - xi at the nodes.

    Raises:
        ValidationError: On a zero magnitude or mismatching modes
    """
    if corrector.mode.magnitude == 0.0:
        raise ValidationError(f"mode {corrector.mode.key} has zero magnitude, N is undefined")
    if xi.mode.key != corrector.mode.key:
        raise ValidationError(f"unit field of mode {xi.mode.key} does not match corrector mode {corrector.mode.key}")
    N = corrector.displacements / corrector.mode.magnitude - xi.evaluate(corrector.mesh.nodes)
    return np.where(corrector.active_nodes[:, None], N, 0.0)


def reconstruct_displacement(u0_gradients: dict, correctors: dict, epsilon: float):
    """Returns the corrector part eps * sum (strain entry) N of the displacement on the cell nodes.

    Args:
        u0_gradients (dict): mode key ('AB:NU') -> macroscopic strain or curvature entry
        correctors (dict): mode key -> CorrectorField
        epsilon (float): Cell size scale

    Returns:
        np.ndarray: (N, 3) nodal displacements

    Raises:
        MissingModeError: If a non-zero entry has no corrector
    """
    missing = [key for key, value in u0_gradients.items() if value != 0.0 and key not in correctors]
    if missing:
        raise MissingModeError([f"no corrector for mode {key}" for key in missing])
    total = None
    for key, value in u0_gradients.items():
        if value == 0.0:
            continue
        corrector = correctors[key]
        term = value * recover_N(corrector, unit_strain_field(corrector.mode))
        total = term if total is None else total + term
    if total is None:
        any_corrector = next(iter(correctors.values()), None)
        count = any_corrector.mesh.n_nodes if any_corrector is not None else 0
        return np.zeros((count, 3))
    return epsilon * total
