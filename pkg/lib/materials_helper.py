# PLATECELL
# This helper module provides the materials and the parametric geometry of a periodicity cell:
# isotropic stiffness tensors, cell validation, tiling (twinning) of cells and builders for the
# layered plates (fiber layers, channel layers, homogeneous laminates) used by the run configs.

import itertools
import math

import numpy as np

import lib.logging_helper as logging_helper
from lib.class_helper import (
    CellSpec,
    CellValidationError,
    ElasticityTensor,
    InclusionLayer,
    IsotropicMaterial,
    Lamina,
    MaterialError,
)

GEOMETRY_TOLERANCE = 1e-12  # Relative tolerance for touching surfaces
DEFAULT_FIBER_DIRECTIONS = ("y2", "y1")  # Alternating layup, top layer first
DEFAULT_CHANNEL_DIRECTION = "y1"

mlog = logging_helper.Log("lib.materials_helper")


def lame_parameters(material: IsotropicMaterial):
    """Returns (lambda, mu) of a material.

    lambda = E nu / ((1 + nu)(1 - 2 nu)), mu = E / (2 (1 + nu)).

    Raises:
        MaterialError: If nu >= 0.5 (incompressible limit) or nu <= -1 or E <= 0
    """
    E = material.youngs_modulus
    nu = material.poisson_ratio
    if nu >= 0.5 or nu <= -1.0 or E <= 0.0:
        raise MaterialError(f"material '{material.name}': no finite isotropic stiffness for E={E}, nu={nu}")
    return E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), E / (2.0 * (1.0 + nu))


def iso_to_tensor(material: IsotropicMaterial):
    """Returns the isotropic stiffness of a material: a_1111 = lambda + 2 mu, a_1122 = lambda, a_1212 = mu.

    Args:
        material (IsotropicMaterial): The material

    Returns:
        ElasticityTensor: The 6x6 Voigt stiffness

    Raises:
        MaterialError: If the material has no finite isotropic stiffness (see lame_parameters)
    """
    lam, mu = lame_parameters(material)

    components = np.zeros((6, 6))
    components[:3, :3] = lam
    components[np.arange(3), np.arange(3)] = lam + 2.0 * mu
    components[np.arange(3, 6), np.arange(3, 6)] = mu
    return ElasticityTensor(components, name=material.name)


def tensors_for(materials: dict):
    """Returns material id -> ElasticityTensor for a dict of IsotropicMaterial objects."""
    return {name: iso_to_tensor(material) for name, material in materials.items()}


# -- Geometry predicates --------------------------------------------------------------------------


def periodic_delta(delta, period):
    """Returns the signed shortest periodic difference (array or scalar)."""
    return delta - period * np.round(np.asarray(delta) / period)


def _axial_extent(inclusion: InclusionLayer, spec: CellSpec):
    period = spec.period(inclusion.axis)
    if inclusion.axial_span is None:
        return 0.0, period
    return inclusion.axial_span


def _intervals_overlap(span_a, span_b, period):
    """True if two periodic intervals (start, length) share a segment of positive length."""
    if span_a[1] >= period or span_b[1] >= period:
        return True
    tolerance = GEOMETRY_TOLERANCE * period
    for shift in (-period, 0.0, period):
        low = max(span_a[0], span_b[0] + shift)
        high = min(span_a[0] + span_a[1], span_b[0] + span_b[1] + shift)
        if high - low > tolerance:
            return True
    return False


def _point_in_interval(value, span, period, margin):
    start, length = span
    if length >= period:
        return True
    offset = np.mod(value - start + margin, period)
    return offset <= length + 2.0 * margin


def inclusion_contains(inclusion: InclusionLayer, spec: CellSpec, points):
    """Returns a mask of the (N, 3) points lying inside the inclusion (periodic in-plane).

    Args:
        inclusion (InclusionLayer): The inclusion
        spec (CellSpec): The cell (provides the periods)
        points (np.ndarray): (N, 3) points

    Returns:
        np.ndarray: Boolean mask
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    transverse = inclusion.transverse_axis - 1
    dt = periodic_delta(points[:, transverse] - inclusion.in_plane_offset, spec.period(transverse + 1))
    dz = points[:, 2] - inclusion.center_y3
    inside = dt * dt + dz * dz <= inclusion.radius * inclusion.radius

    if inclusion.axial_span is not None:
        start, length = inclusion.axial_span
        period = spec.period(inclusion.axis)
        if length < period:
            along = np.mod(points[:, inclusion.axis - 1] - start, period)
            inside &= along < length
    return inside


def inclusion_volume(inclusion: InclusionLayer, spec: CellSpec):
    """Analytic volume of the inclusion inside the cell."""
    _, length = _axial_extent(inclusion, spec)
    return math.pi * inclusion.radius**2 * min(length, spec.period(inclusion.axis))


def volume_fraction(spec: CellSpec, kind=None):
    """Analytic inclusion volume fraction (optionally only 'fiber' or 'channel')."""
    volume = sum(inclusion_volume(inc, spec) for inc in spec.inclusions if kind is None or inc.kind == kind)
    return volume / (spec.h1 * spec.h2 * spec.thickness)


def check_cell(spec: CellSpec):
    """Returns the complete list of violated cell invariants (empty if the cell is valid).

    Args:
        spec (CellSpec): The cell

    Returns:
        list: Violation messages, each naming the offending inclusion index where applicable
    """
    violations = []
    for name, value in (("h1", spec.h1), ("h2", spec.h2), ("half_thickness", spec.half_thickness)):
        if not value > 0:
            violations.append(f"non-positive dimension: {name} = {value}")
    if violations:
        return violations  # Nothing else can be checked sensibly

    h = spec.half_thickness
    tolerance = GEOMETRY_TOLERANCE * max(1.0, h)
    for index, inclusion in enumerate(spec.inclusions):
        if not inclusion.radius > 0:
            violations.append(f"inclusion {index}: non-positive dimension: radius = {inclusion.radius}")
            continue
        if abs(inclusion.center_y3) + inclusion.radius >= h - tolerance:
            violations.append(
                f"inclusion {index}: surface breach (|center_y3| + radius = {abs(inclusion.center_y3) + inclusion.radius} >= half_thickness = {h})"
            )
        if 2.0 * inclusion.radius > spec.period(inclusion.transverse_axis) + tolerance:
            violations.append(f"inclusion {index}: overlap with its own periodic image (diameter exceeds period y{inclusion.transverse_axis})")
        if inclusion.axial_span is not None and not inclusion.axial_span[1] > 0:
            violations.append(f"inclusion {index}: non-positive dimension: axial length = {inclusion.axial_span[1]}")

    for (i, a), (j, b) in itertools.combinations(enumerate(spec.inclusions), 2):
        if not (a.radius > 0 and b.radius > 0):
            continue
        dz = abs(a.center_y3 - b.center_y3)
        rsum = a.radius + b.radius
        if dz >= rsum - tolerance:
            continue
        if a.axis == b.axis:
            period = spec.period(a.transverse_axis)
            dt = abs(periodic_delta(a.in_plane_offset - b.in_plane_offset, period))
            touching = dt * dt + dz * dz >= (rsum - tolerance) ** 2
            if not touching and _intervals_overlap(_axial_extent(a, spec), _axial_extent(b, spec), spec.period(a.axis)):
                violations.append(f"inclusion {i} and inclusion {j}: overlap")
        else:
            # Perpendicular cylinders cross at (offset of b, offset of a) in the plane
            if _point_in_interval(b.in_plane_offset, _axial_extent(a, spec), spec.period(a.axis), b.radius) and _point_in_interval(
                a.in_plane_offset, _axial_extent(b, spec), spec.period(b.axis), a.radius
            ):
                violations.append(f"inclusion {i} and inclusion {j}: overlap")

    for index, lamina in enumerate(spec.laminae):
        if lamina.y3_low < -h - tolerance or lamina.y3_high > h + tolerance:
            violations.append(f"lamina {index}: outside [-h, h]")
        if index > 0 and lamina.y3_low < spec.laminae[index - 1].y3_high - tolerance:
            violations.append(f"lamina {index - 1} and lamina {index}: overlap")

    if spec.inclusions and volume_fraction(spec) >= 1.0:
        violations.append(f"inclusion volume fraction {volume_fraction(spec):.4f} >= 1")
    return violations


def validate_cell(spec: CellSpec):
    """Returns the spec if every cell invariant holds.

    Args:
        spec (CellSpec): The cell

    Returns:
        CellSpec: The same spec

    Raises:
        CellValidationError: With the complete list of violations
    """
    violations = check_cell(spec)
    if violations:
        for violation in violations:
            mlog.error(f"Cell validation: {violation}")
        raise CellValidationError(violations)
    return spec


def tile_cell(spec: CellSpec, k1: int, k2: int):
    """Joins k1 x k2 copies of a cell side by side (twinned cell).

    Copies translated along a cylinder's own axis become consecutive segments of the same cylinder.

    Args:
        spec (CellSpec): The cell
        k1 (int): Copies along y1
        k2 (int): Copies along y2

    Returns:
        CellSpec: The tiled (validated) cell
    """
    if not isinstance(k1, (int, np.integer)) or not isinstance(k2, (int, np.integer)) or k1 < 1 or k2 < 1:
        raise CellValidationError(f"tile factors must be integers >= 1 (got {k1}x{k2})")
    if k1 == 1 and k2 == 1:
        return spec

    inclusions = []
    for b in range(k2):
        for a in range(k1):
            for inclusion in spec.inclusions:
                shifts = {1: a * spec.h1, 2: b * spec.h2}
                axial_period = spec.period(inclusion.axis)
                tiled_along_axis = (k1 if inclusion.axis == 1 else k2) > 1
                copy = inclusion.translated(
                    shift_axial=shifts[inclusion.axis],
                    shift_transverse=shifts[inclusion.transverse_axis],
                    axial_period=axial_period,
                )
                if tiled_along_axis and copy.axial_span is None:
                    copy = InclusionLayer(
                        copy.kind, copy.axis, copy.center_y3, copy.radius, copy.material, copy.in_plane_offset, (0.0, axial_period)
                    )
                inclusions.append(copy)

    tiled = CellSpec(
        h1=k1 * spec.h1,
        h2=k2 * spec.h2,
        half_thickness=spec.half_thickness,
        matrix_material=spec.matrix_material,
        inclusions=inclusions,
        laminae=spec.laminae,
        tiling=(spec.tiling[0] * k1, spec.tiling[1] * k2),
    )
    mlog.debug(f"Tiled cell {k1}x{k2}: {len(spec.inclusions)} -> {len(inclusions)} inclusions")
    return validate_cell(tiled)


def structural_layers(spec: CellSpec):
    """Groups the inclusions by height, top layer first.

    Returns:
        list: (center_y3, [InclusionLayer, ...]) per structural layer, descending center_y3
    """
    layers = []
    for center in reversed(spec.layer_centers()):
        members = [inc for inc in spec.inclusions if abs(inc.center_y3 - center) <= 1e-9 * max(1.0, spec.half_thickness)]
        layers.append((center, members))
    return layers


# -- Builders -------------------------------------------------------------------------------------


def _fiber_offsets(period, in_plane_pitch):
    count = max(1, int(period / in_plane_pitch + 1e-9))
    return [period * (m + 0.5) / count for m in range(count)]


def build_layered_cell(
    kind: str,
    layers: int,
    radius: float,
    gap: float,
    cover: float,
    h1: float,
    h2: float,
    matrix_material: str,
    inclusion_material: str = None,
    directions=None,
    in_plane_pitch: float = None,
):
    """Builds an N-layer plate of fiber or channel layers.

    Each structural layer has through-thickness extent 2R + gap; the matrix cover above the top and below the bottom layer is 'cover'.

    Args:
        kind (str): 'fiber' or 'channel'
        layers (int): Number of structural layers N
        radius (float): Inclusion radius R
        gap (float): Matrix gap between adjacent layers
        cover (float): Matrix cover at both surfaces
        h1 (float): Cell period along y1
        h2 (float): Cell period along y2
        matrix_material (str): Matrix material id
        inclusion_material (str): Fiber material id (None for channels)
        directions (list): Axis per layer, top first (default alternating y2/y1 for fibers, y1 for channels)
        in_plane_pitch (float): Spacing of parallel inclusions within a layer (default h1)

    Returns:
        CellSpec: The validated cell
    """
    if layers < 1:
        raise CellValidationError(f"layer count must be >= 1 (got {layers})")
    if directions is None or len(directions) == 0:
        if kind == "fiber":
            directions = [DEFAULT_FIBER_DIRECTIONS[index % 2] for index in range(layers)]
        else:
            directions = [DEFAULT_CHANNEL_DIRECTION] * layers
    if len(directions) != layers:
        raise CellValidationError(f"{len(directions)} layer directions given for {layers} layers")
    in_plane_pitch = h1 if in_plane_pitch is None else in_plane_pitch
    if not in_plane_pitch > 0:
        raise CellValidationError(f"non-positive dimension: in_plane_pitch = {in_plane_pitch}")

    half_thickness = 0.5 * (layers * 2.0 * radius + (layers - 1) * gap + 2.0 * cover)
    pitch = 2.0 * radius + gap
    inclusions = []
    for index, direction in enumerate(directions):
        center = half_thickness - cover - radius - index * pitch
        axis = int(str(direction).lower().lstrip("y"))
        transverse_period = h2 if axis == 1 else h1
        for offset in _fiber_offsets(transverse_period, in_plane_pitch):
            inclusions.append(
                InclusionLayer(
                    kind=kind,
                    axis=axis,
                    center_y3=center,
                    radius=radius,
                    material=inclusion_material if kind == "fiber" else None,
                    in_plane_offset=offset,
                )
            )

    spec = CellSpec(h1=h1, h2=h2, half_thickness=half_thickness, matrix_material=matrix_material, inclusions=inclusions)
    mlog.debug(f"Built {layers}-layer {kind} cell: half_thickness={half_thickness}, {len(inclusions)} inclusions")
    return validate_cell(spec)


def build_laminate_cell(h1: float, h2: float, stack):
    """Builds a plate of homogeneous layers.

    Args:
        h1 (float): Cell period along y1
        h2 (float): Cell period along y2
        stack (list): (material, thickness) per layer, bottom first

    Returns:
        CellSpec: The validated cell (matrix_material = bottom layer material)
    """
    if len(stack) == 0:
        raise CellValidationError("laminate stack is empty")
    total = sum(float(thickness) for _, thickness in stack)
    laminae = []
    low = -0.5 * total
    for material, thickness in stack:
        laminae.append(Lamina(low, low + float(thickness), material))
        low += float(thickness)
    laminae[-1] = Lamina(laminae[-1].y3_low, 0.5 * total, laminae[-1].material)  # Exact top surface
    spec = CellSpec(h1=h1, h2=h2, half_thickness=0.5 * total, matrix_material=stack[0][0], laminae=laminae)
    return validate_cell(spec)


def build_homogeneous_cell(h1: float, h2: float, thickness: float, material: str):
    """Builds a homogeneous plate cell of the given total thickness."""
    return validate_cell(CellSpec(h1=h1, h2=h2, half_thickness=0.5 * thickness, matrix_material=material))
