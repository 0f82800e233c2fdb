# PLATECELL
# This helper module generates the structured hexahedral mesh of a periodicity cell, tags every element with its phase
# (matrix/lamina material, fiber material or void) and provides the periodic node pairing on opposite in-plane faces.

import numpy as np

import lib.logging_helper as logging_helper
from lib.class_helper import VOID, CellSpec, HexMesh, MeshError, PeriodicPairs
from lib.materials_helper import inclusion_contains

SUBSAMPLE_OFFSETS = (0.25, 0.75)  # Relative positions of the 2x2x2 phase-vote samples within an element
SURFACE_CLEARANCE = 0.25  # Grid planes closer than this fraction of a spacing to a surface are dropped

mlog = logging_helper.Log("lib.mesh_helper")


def _snap(planes, targets):
    """Moves the nearest interior grid plane onto each target if it lies within half a spacing.

    Args:
        planes (np.ndarray): Ascending plane coordinates, the first and last plane stay fixed
        targets (list): Coordinates to honour

    Returns:
        np.ndarray: The snapped planes (a copy)
    """
    planes = np.array(planes, dtype=float)
    count = len(planes)
    snapped = set()
    candidates = np.arange(1, count - 1)
    for target in sorted(targets):
        if len(candidates) == 0:
            break
        index = int(candidates[np.argmin(np.abs(planes[candidates] - target))])
        previous = planes[index - 1]
        following = planes[index + 1]
        spacing = min(planes[index] - previous, following - planes[index])
        if abs(planes[index] - target) > 0.5 * spacing + 1e-12:
            continue
        if index in snapped or not previous < target < following:
            mlog.warning(f"Grid plane near y3={target:.6g} already used, keeping it unsnapped.")
            continue
        planes[index] = target
        snapped.add(index)
    return planes


def build_y3_grid(spec: CellSpec, n3: int, spacing: float = None):
    """Returns the y3 grid planes of a cell.

    Cells with >= 2 equally spaced inclusion layers get the same plane pattern in every structural pitch
    (so slabs one pitch apart are congruent) with planes at the structural bounds and the inclusion extremal heights;
    the element count then approximates n3. Other cells get uniform planes snapped to extremal heights and lamina interfaces.

    Args:
        spec (CellSpec): The cell
        n3 (int): Requested element count through the thickness
        spacing (float): Target plane spacing of layered cells (default 2h / n3), lets two cells share one pattern

    Returns:
        np.ndarray: Ascending planes from -h to h
    """
    h = spec.half_thickness
    extremal = sorted({inc.center_y3 + sign * inc.radius for inc in spec.inclusions for sign in (-1.0, 1.0)})
    interfaces = sorted({value for lamina in spec.laminae for value in (lamina.y3_low, lamina.y3_high) if -h < value < h})
    pitch = spec.layer_pitch()

    if pitch is None:
        planes = np.linspace(-h, h, n3 + 1)
        planes = _snap(planes, [t for t in extremal + interfaces if -h < t < h])
        return planes

    centers = spec.layer_centers()
    spacing = spacing or 2.0 * h / n3
    anchor = centers[0]

    # One pitch [-S/2, S/2) around a layer center, split at the inclusion extremal heights
    breakpoints = {-0.5 * pitch}
    for inclusion in spec.inclusions:
        layer_center = min(centers, key=lambda c: abs(c - inclusion.center_y3))
        for sign in (-1.0, 1.0):
            offset = round(inclusion.center_y3 - layer_center + sign * inclusion.radius, 12)
            if -0.5 * pitch < offset < 0.5 * pitch:
                breakpoints.add(offset)
    breakpoints = sorted(breakpoints) + [0.5 * pitch]
    local = []
    for low, high in zip(breakpoints[:-1], breakpoints[1:]):
        count = max(1, int(round((high - low) / spacing)))
        local.extend(low + (high - low) * np.arange(count) / count)
    local = anchor + np.array(local)
    per_pitch = len(local)

    k_low = int(np.floor((-h - local[0]) / pitch)) - 1
    k_high = int(np.ceil((h - local[0]) / pitch)) + 1
    lattice = np.concatenate([local + k * pitch for k in range(k_low, k_high + 1)])
    clearance = SURFACE_CLEARANCE * spacing
    interior = lattice[(lattice > -h + clearance) & (lattice < h - clearance)]
    planes = np.concatenate([[-h], np.sort(interior), [h]])
    if interfaces:
        planes = _snap(planes, interfaces)
    mlog.debug(f"Layered y3 grid: pitch {pitch}, {per_pitch} elements per pitch, {len(planes) - 1} elements in total")
    return planes


def _sample_axis(grid):
    """Returns the two subsample coordinates of every interval of a grid axis, shape (n, 2)."""
    low = grid[:-1]
    size = np.diff(grid)
    return np.stack([low + fraction * size for fraction in SUBSAMPLE_OFFSETS], axis=1)


def thin_matrix_gaps(spec: CellSpec, grid):
    """Finds matrix gaps between neighbouring parallel inclusions of a layer that are thinner than one element.

    Neighbours are taken across the periodic boundary too, so a single inclusion per period is checked against its image.

    Args:
        spec (CellSpec): The cell
        grid (tuple): (y1, y2, y3) grid planes

    Returns:
        list: (center_y3, axis, gap, element size) per thin gap
    """
    groups = {}
    for inclusion in spec.inclusions:
        key = (round(inclusion.center_y3, 9), inclusion.axis, inclusion.axial_span)
        groups.setdefault(key, []).append(inclusion)

    thin = []
    for (center, axis, _), members in groups.items():
        transverse = members[0].transverse_axis
        period = spec.period(transverse)
        size = float(np.max(np.diff(grid[transverse - 1])))
        members = sorted(members, key=lambda inc: inc.in_plane_offset)
        for position, inclusion in enumerate(members):
            neighbour = members[(position + 1) % len(members)]
            spacing = (neighbour.in_plane_offset - inclusion.in_plane_offset) % period or period
            gap = spacing - inclusion.radius - neighbour.radius
            if gap < size:
                thin.append((center, axis, gap, size))
    return thin


def generate_mesh(spec: CellSpec, resolution, y3_spacing: float = None):
    """Generates the structured hexahedral mesh of a cell.

    Phases are assigned per element by majority vote over a 2x2x2 subsample (ties go to the centroid test).
    Channel elements are tagged VOID and kept in the arrays.

    Args:
        spec (CellSpec): A validated cell
        resolution (tuple): (n1, n2, n3) element counts (n3 is approximate for layered cells)
        y3_spacing (float): Target y3 plane spacing of layered cells (see build_y3_grid)

    Returns:
        HexMesh: The mesh

    Raises:
        MeshError: If the resolution is invalid or an inclusion receives no element
    """
    try:
        n1, n2, n3 = (int(value) for value in resolution)
    except (TypeError, ValueError):
        raise MeshError(f"resolution must be three integers (got {resolution})")
    if min(n1, n2, n3) < 2:
        raise MeshError(f"resolution must be >= 2 per axis (got {n1}x{n2}x{n3})")

    y1 = np.linspace(0.0, spec.h1, n1 + 1)
    y2 = np.linspace(0.0, spec.h2, n2 + 1)
    y3 = build_y3_grid(spec, n3, y3_spacing)
    if np.any(np.diff(y3) <= 0.0):
        raise MeshError("y3 grid is not strictly increasing")
    grid = (y1, y2, y3)
    n3 = len(y3) - 1
    for center, axis, gap, size in thin_matrix_gaps(spec, grid):
        mlog.warning(
            f"Matrix gap {gap:.4g} between y{axis} inclusions at y3={center:.6g} is thinner than one element ({size:.4g}). Refine the in-plane resolution."
        )

    # Element (i, j, k) id = i + n1 * (j + n2 * k)
    k, j, i = np.indices((n3, n2, n1))
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    n_elements = i.size

    samples = [_sample_axis(axis) for axis in grid]
    points = np.empty((n_elements, 8, 3))
    position = 0
    for a in range(2):
        for b in range(2):
            for c in range(2):
                points[:, position, 0] = samples[0][i, a]
                points[:, position, 1] = samples[1][j, b]
                points[:, position, 2] = samples[2][k, c]
                position += 1
    centroids = np.stack([0.5 * (y1[i] + y1[i + 1]), 0.5 * (y2[j] + y2[j + 1]), 0.5 * (y3[k] + y3[k + 1])], axis=1)

    best_count = np.zeros(n_elements, dtype=np.int64)
    best_inclusion = np.full(n_elements, -1, dtype=np.int64)
    tagged_total = np.zeros(n_elements, dtype=np.int64)
    centroid_inside = np.full(n_elements, -1, dtype=np.int64)
    flat_points = points.reshape(-1, 3)
    for index, inclusion in enumerate(spec.inclusions):
        count = inclusion_contains(inclusion, spec, flat_points).reshape(n_elements, 8).sum(axis=1)
        better = count > best_count
        best_count[better] = count[better]
        best_inclusion[better] = index
        tagged_total += count
        centroid_inside[inclusion_contains(inclusion, spec, centroids)] = index

    matrix_count = 8 - tagged_total
    inclusion = np.where(best_count > matrix_count, best_inclusion, -1)
    tie = (best_count == matrix_count) & (best_count > 0)
    inclusion[tie] = np.where(centroid_inside[tie] == best_inclusion[tie], best_inclusion[tie], -1)

    labels = spec.material_ids()
    code = {label: position for position, label in enumerate(labels)}
    matrix_at = spec.matrix_material_at(centroids[:, 2])
    phase = np.array([code[material] for material in matrix_at], dtype=np.int64)
    for index, inc in enumerate(spec.inclusions):
        members = inclusion == index
        phase[members] = VOID if inc.kind == "channel" else code[inc.material]

    missing = [index for index in range(len(spec.inclusions)) if not np.any(inclusion == index)]
    if missing:
        messages = [
            f"inclusion {index} ({spec.inclusions[index].kind} at y3={spec.inclusions[index].center_y3:.6g}) has no element: resolution too coarse"
            for index in missing
        ]
        raise MeshError(messages)

    mesh = HexMesh(spec, grid, phase, labels, inclusion)
    mlog.info(
        f"Generated mesh {n1}x{n2}x{n3}: {mesh.n_elements} elements, {int(np.sum(~mesh.active))} void, {int(np.sum(mesh.inclusion_phase))} in fibers"
    )
    return mesh


def periodic_pairs(mesh: HexMesh, axis: int):
    """Returns all node pairs (grid index 0, grid index n_axis) on the two faces normal to an in-plane axis.

    Args:
        mesh (HexMesh): The mesh
        axis (int): 1 or 2

    Returns:
        PeriodicPairs: (n_other + 1) * (n3 + 1) pairs
    """
    if axis not in (1, 2):
        raise MeshError(f"periodic axis must be 1 or 2 (got {axis})")
    n1, n2, n3 = mesh.resolution
    if axis == 1:
        j, k = np.meshgrid(np.arange(n2 + 1), np.arange(n3 + 1), indexing="ij")
        masters = mesh.node_id(0, j.ravel(), k.ravel())
        slaves = mesh.node_id(n1, j.ravel(), k.ravel())
    else:
        i, k = np.meshgrid(np.arange(n1 + 1), np.arange(n3 + 1), indexing="ij")
        masters = mesh.node_id(i.ravel(), 0, k.ravel())
        slaves = mesh.node_id(i.ravel(), n2, k.ravel())
    return PeriodicPairs(axis, np.stack([masters, slaves], axis=1))


def periodic_images(mesh: HexMesh):
    """Returns, per node, the node with in-plane grid indices reduced modulo (n1, n2) (the independent image)."""
    n1, n2, _ = mesh.resolution
    index = mesh.node_grid_index
    return mesh.node_id(index[:, 0] % n1, index[:, 1] % n2, index[:, 2])


def structural_bounds(spec: CellSpec):
    """Returns the y3 bounds of the structural layers (ascending), or None for cells without >= 2 inclusion layers.

    Interior bounds are the midpoints between neighbouring layer centers; the outer bounds are the surfaces.
    """
    centers = spec.layer_centers()
    if len(centers) < 2:
        return None
    middles = [0.5 * (low + high) for low, high in zip(centers[:-1], centers[1:])]
    return np.array([-spec.half_thickness] + middles + [spec.half_thickness])
