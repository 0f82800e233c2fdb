# PLATECELL
# This helper module analyses solved fields of layered plates:
# - slab (element layer) von Mises profiles and the periodicity deviation d(slab) between slabs one stack period apart,
# - boundary-layer thickness and the top skin / core / bottom skin decomposition,
# - representative 3-layer cells and zone-by-zone stress comparisons,
# - wrinkling of the deformed top and bottom surfaces.

import numpy as np

import lib.logging_helper as logging_helper
from lib.class_helper import (
    CellSpec,
    CellValidationError,
    CorrectorField,
    HexMesh,
    IncongruentZonesError,
    LayerProfile,
    SimilarityReport,
    SkinCoreDecomposition,
    StressField,
    ValidationError,
    WrinkleReport,
)
from lib.homogenization_helper import von_mises
from lib.materials_helper import structural_layers, validate_cell
from lib.mesh_helper import structural_bounds

DEFAULT_THRESHOLD = 0.05  # For both d(slab) and informativeness
ALIGNMENTS = ("symmetric", "top", "bottom")
SURFACES = ("top", "bottom")
ZONE_TOLERANCE = 1e-9  # Relative to the half-thickness
PERIODICITY_TOLERANCE = 1e-6

mlog = logging_helper.Log("lib.analysis_helper")


# -- Layer profiles -------------------------------------------------------------------------------


def _normalized_fluctuation(values):
    """(v - mean) / rms(v); zero for an all-zero sample."""
    if values.size == 0:
        return values
    rms = np.sqrt(np.mean(values**2))
    if rms == 0.0:
        return np.zeros_like(values)
    return (values - values.mean()) / rms


def slab_deviation(values_a, values_b, mask):
    """Returns rms(f_a - f_b) of the normalized in-plane fluctuations of two slabs over the masked positions."""
    if not np.any(mask):
        return 0.0
    difference = _normalized_fluctuation(values_a[mask]) - _normalized_fluctuation(values_b[mask])
    return float(np.sqrt(np.mean(difference**2)))


def _partner_slab(centers, thicknesses, k, pitch):
    """Returns the slab one comparison distance toward the midplane of slab k, or None."""
    if centers[k] == 0.0:
        return None
    target = centers[k] - np.sign(centers[k]) * pitch
    candidate = int(np.argmin(np.abs(centers - target)))
    if abs(centers[candidate] - target) > 0.5 * thicknesses[k] or candidate == k:
        return None
    return candidate


def layer_profile(field: StressField, mesh: HexMesh = None, pitch: float = None):
    """Computes per-slab von Mises statistics and the periodicity deviation.

    d(slab) compares the matrix-phase von Mises pattern of a slab with the slab one stack period deeper into the plate
    (0 where no such slab exists or the cell is not layered). The stack period is the layer pitch S, or 2 S when the
    fiber directions alternate.

    Args:
        field (StressField): The stress field
        mesh (HexMesh): The mesh (default: the field's mesh)
        pitch (float): Comparison distance override (default: the stack period of the cell)

    Returns:
        LayerProfile: The profile
    """
    mesh = mesh or field.mesh
    if field.mesh is not mesh:
        raise ValidationError("stress field and mesh do not match")
    spec = mesh.spec
    pitch = pitch if pitch is not None else spec.stack_period()
    values = von_mises(field)
    n1, n2, n3 = mesh.resolution
    planes = mesh.grid[2]
    slabs = np.stack([planes[:-1], planes[1:]], axis=1)
    centers = slabs.mean(axis=1)
    thicknesses = np.diff(planes)

    matrix_mask = mesh.matrix.reshape(n3, n1 * n2)
    inclusion_mask = mesh.inclusion_phase.reshape(n3, n1 * n2)
    per_slab = values.reshape(n3, n1 * n2)

    def statistic(mask, reducer):
        return np.array([reducer(per_slab[k][mask[k]]) if np.any(mask[k]) else 0.0 for k in range(n3)])

    deviation = np.zeros(n3)
    if pitch is not None:
        for k in range(n3):
            partner = _partner_slab(centers, thicknesses, k, pitch)
            if partner is None:
                continue
            deviation[k] = slab_deviation(per_slab[k], per_slab[partner], matrix_mask[k] & matrix_mask[partner])

    profile = LayerProfile(
        label=field.label,
        slabs=slabs,
        matrix_mean=statistic(matrix_mask, np.mean),
        matrix_max=statistic(matrix_mask, np.max),
        inclusion_mean=statistic(inclusion_mask, np.mean),
        inclusion_max=statistic(inclusion_mask, np.max),
        deviation=deviation,
        pitch=pitch,
        half_thickness=spec.half_thickness,
        structural_bounds=structural_bounds(spec),
        layer_pitch=spec.layer_pitch(),
    )
    mlog.debug(f"Profile {field.label}: max d = {deviation.max() if n3 else 0.0:.3e}")
    return profile


def boundary_layer_thickness(profile: LayerProfile, pitch: float = None, threshold: float = DEFAULT_THRESHOLD):
    """Measures the depth of the outermost contiguous run of slabs with d(slab) > threshold, per surface.

    Returns:
        dict: surface -> {'thickness': length, 'pitches': thickness / S (None without a pitch)}
    """
    if not threshold > 0.0:
        raise ValidationError(f"threshold must be > 0 (got {threshold})")
    pitch = pitch if pitch is not None else profile.layer_pitch
    thicknesses = profile.slabs[:, 1] - profile.slabs[:, 0]
    result = {}
    for surface, order in (("top", range(len(thicknesses) - 1, -1, -1)), ("bottom", range(len(thicknesses)))):
        depth = 0.0
        for k in order:
            if profile.deviation[k] <= threshold:
                break
            depth += thicknesses[k]
        result[surface] = {"thickness": float(depth), "pitches": None if not pitch else float(depth / pitch)}
    return result


def skin_core_decompose(profile: LayerProfile, pitch: float = None, threshold: float = DEFAULT_THRESHOLD):
    """Splits [-h, h] into top skin, core and bottom skin along structural layer bounds.

    Each skin is the measured boundary layer snapped up to whole structural layers (at least one).

    Raises:
        CellValidationError: If the plate has fewer than 3 structural layers
    """
    bounds = profile.structural_bounds
    count = 0 if bounds is None else len(bounds) - 1
    if count < 3:
        raise CellValidationError(f"a skin/core decomposition needs >= 3 structural layers (got {count})")
    pitch = pitch if pitch is not None else profile.layer_pitch
    boundary = boundary_layer_thickness(profile, pitch, threshold)
    h = profile.half_thickness
    tolerance = ZONE_TOLERANCE * h

    def layers_needed(depths, measured):
        for n, depth in enumerate(depths, start=1):
            if depth >= measured - tolerance:
                return n
        return len(depths)

    top_depths = [h - bound for bound in bounds[-2::-1]]
    bottom_depths = [bound + h for bound in bounds[1:]]
    top_layers = layers_needed(top_depths, boundary["top"]["thickness"])
    bottom_layers = layers_needed(bottom_depths, boundary["bottom"]["thickness"])
    if top_layers + bottom_layers > count - 1:
        mlog.warning(
            f"Boundary layers ({top_layers} + {bottom_layers} structural layers) leave no core. Clipping to keep one core layer."
        )
        while top_layers + bottom_layers > count - 1:
            if top_layers >= bottom_layers and top_layers > 1:
                top_layers -= 1
            else:
                bottom_layers -= 1

    top_low = bounds[count - top_layers]
    bottom_high = bounds[bottom_layers]
    return SkinCoreDecomposition(
        top_skin=(top_low, h),
        core=(bottom_high, top_low),
        bottom_skin=(-h, bottom_high),
        pitch=pitch if pitch else 0.0,
        skin_layers={"top": top_layers, "bottom": bottom_layers},
        boundary_layer={"top": boundary["top"]["thickness"], "bottom": boundary["bottom"]["thickness"]},
        core_layers=count - top_layers - bottom_layers,
    )


# -- Representative plates ------------------------------------------------------------------------


def representative_layers(spec: CellSpec, align: str = "symmetric"):
    """Returns the indices (top layer = 0) of the original structural layers a representative cell replicates, top first."""
    if align not in ALIGNMENTS:
        raise ValidationError(f"align must be one of {list(ALIGNMENTS)} (got {align})")
    count = len(spec.layer_centers())
    if count < 3:
        raise CellValidationError(f"a representative cell needs >= 3 structural layers (got {count})")
    if align == "top":
        return (0, 1, 2)
    if align == "bottom":
        return (count - 3, count - 2, count - 1)
    return (0, 1, count - 1)


def build_representative(spec: CellSpec, align: str = "symmetric"):
    """Builds a 3-layer cell replicating chosen structural layers of a plate.

    symmetric: (top, first interior, bottom); top: the three top layers; bottom: the three bottom layers.
    The covers above the top and below the bottom layer and the pitch between layers are kept.

    Args:
        spec (CellSpec): A cell with >= 3 equally spaced inclusion layers
        align (str): 'symmetric', 'top' or 'bottom'

    Returns:
        CellSpec: The 3-layer cell

    Raises:
        CellValidationError: If the cell has fewer than 3 layers or unequal spacing
    """
    chosen = representative_layers(spec, align)
    pitch = spec.layer_pitch()
    if pitch is None:
        raise CellValidationError("a representative cell needs equally spaced inclusion layers")
    if spec.laminae:
        raise CellValidationError("representative cells of laminated matrices are not supported")

    layers = structural_layers(spec)
    h = spec.half_thickness
    top_center, top_members = layers[0]
    bottom_center, bottom_members = layers[-1]
    top_cover = h - top_center - max(inc.radius for inc in top_members)
    bottom_cover = bottom_center + h - max(inc.radius for inc in bottom_members)

    picked = [layers[index] for index in chosen]
    top_radius = max(inc.radius for inc in picked[0][1])
    bottom_radius = max(inc.radius for inc in picked[2][1])
    new_h = 0.5 * (top_cover + top_radius + 2.0 * pitch + bottom_radius + bottom_cover)
    first_center = new_h - top_cover - top_radius

    inclusions = []
    for position, (_, members) in enumerate(picked):
        center = first_center - position * pitch
        inclusions.extend(inclusion.with_center(center) for inclusion in members)
    representative = CellSpec(spec.h1, spec.h2, new_h, spec.matrix_material, inclusions, tiling=spec.tiling)
    validate_cell(representative)
    mlog.info(f"Built {align} representative of layers {list(chosen)}: half-thickness {new_h:.6g}")
    return representative


# -- Stress comparisons ---------------------------------------------------------------------------


def zone_slabs(mesh: HexMesh, zone):
    """Returns the element-layer indices filling a y3 zone.

    Raises:
        IncongruentZonesError: If the zone bounds do not lie on grid planes
    """
    low, high = float(zone[0]), float(zone[1])
    planes = mesh.grid[2]
    tolerance = ZONE_TOLERANCE * max(1.0, mesh.spec.half_thickness)
    start = int(np.argmin(np.abs(planes - low)))
    stop = int(np.argmin(np.abs(planes - high)))
    if abs(planes[start] - low) > tolerance or abs(planes[stop] - high) > tolerance or stop <= start:
        raise IncongruentZonesError(f"zone [{low:.6g}, {high:.6g}] does not consist of whole element layers")
    return np.arange(start, stop)


def _relative_difference(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0.0 else float(np.linalg.norm(a - b) / scale)


def compare_sss(field_a: StressField, zone_a, field_b: StressField, zone_b, threshold: float = DEFAULT_THRESHOLD, label: str = ""):
    """Compares the matrix-phase von Mises stress of two zones slab by slab.

    The zones are registered by the y3 translation aligning their lower bounds.

    Returns:
        SimilarityReport: rel_l2, rel_max and per-slab rel_l2

    Raises:
        IncongruentZonesError: If the zones do not have the same in-plane grid, slab count and slab thicknesses
    """
    if not threshold > 0.0:
        raise ValidationError(f"threshold must be > 0 (got {threshold})")
    mesh_a, mesh_b = field_a.mesh, field_b.mesh
    slabs_a = zone_slabs(mesh_a, zone_a)
    slabs_b = zone_slabs(mesh_b, zone_b)

    problems = []
    if mesh_a.resolution[:2] != mesh_b.resolution[:2]:
        problems.append(f"in-plane resolutions differ ({mesh_a.resolution[:2]} vs {mesh_b.resolution[:2]})")
    if abs(mesh_a.spec.h1 - mesh_b.spec.h1) > ZONE_TOLERANCE or abs(mesh_a.spec.h2 - mesh_b.spec.h2) > ZONE_TOLERANCE:
        problems.append("in-plane cell sizes differ")
    if len(slabs_a) != len(slabs_b):
        problems.append(f"zones have {len(slabs_a)} and {len(slabs_b)} element layers")
    else:
        thickness_a = np.diff(mesh_a.grid[2])[slabs_a]
        thickness_b = np.diff(mesh_b.grid[2])[slabs_b]
        if np.abs(thickness_a - thickness_b).max() > 1e-6 * thickness_a.max():
            problems.append("element layer thicknesses of the zones differ")
    if problems:
        raise IncongruentZonesError(problems)

    n1, n2, _ = mesh_a.resolution
    values_a = von_mises(field_a).reshape(-1, n1 * n2)
    values_b = von_mises(field_b).reshape(-1, n1 * n2)
    matrix_a = mesh_a.matrix.reshape(-1, n1 * n2)
    matrix_b = mesh_b.matrix.reshape(-1, n1 * n2)

    collected_a, collected_b, per_slab = [], [], []
    for k_a, k_b in zip(slabs_a, slabs_b):
        mask = matrix_a[k_a] & matrix_b[k_b]
        a, b = values_a[k_a][mask], values_b[k_b][mask]
        collected_a.append(a)
        collected_b.append(b)
        per_slab.append(_relative_difference(a, b))
    a = np.concatenate(collected_a)
    b = np.concatenate(collected_b)

    rel_l2 = _relative_difference(a, b)
    max_a = float(a.max()) if a.size else 0.0
    max_b = float(b.max()) if b.size else 0.0
    peak = max(max_a, max_b)
    rel_max = 0.0 if peak == 0.0 else abs(max_a - max_b) / peak
    report = SimilarityReport(zone_a, zone_b, rel_l2, rel_max, per_slab, threshold, label)
    mlog.debug(f"compare_sss {label}: rel_l2={rel_l2:.4g}, rel_max={rel_max:.4g}")
    return report


def best_report(reports):
    """Returns the report with the smallest rel_l2 (None for no reports)."""
    reports = list(reports)
    return min(reports, key=lambda report: report.rel_l2) if reports else None


def classify_informative(layer_reports):
    """Classifies each representative layer from its comparison reports.

    Args:
        layer_reports (list): Per representative layer (top first), the SimilarityReports against its candidate zones

    Returns:
        list: 'informative' or 'non-informative' per layer
    """
    verdicts = []
    for reports in layer_reports:
        best = best_report(reports)
        verdicts.append(best.verdict if best is not None else "non-informative")
    return verdicts


# -- Surface wrinkling ----------------------------------------------------------------------------


def _face_gradients(values, dx, dy):
    """Gradients of a nodal (n1+1, n2+1) field at the face centers, each (n1, n2)."""
    d1 = 0.5 * ((values[1:, :-1] - values[:-1, :-1]) + (values[1:, 1:] - values[:-1, 1:])) / dx
    d2 = 0.5 * ((values[:-1, 1:] - values[:-1, :-1]) + (values[1:, 1:] - values[1:, :-1])) / dy
    return d1, d2


def _tile_error(deviation, tiling):
    """Largest difference between corresponding nodes of the tiles (0 for a single cell)."""
    n1, n2 = deviation.shape[0] - 1, deviation.shape[1] - 1
    k1, k2 = tiling
    error = 0.0
    for k, n, axis in ((k1, n1, 0), (k2, n2, 1)):
        if k <= 1:
            continue
        if n % k:
            mlog.warning(f"Resolution {n} along y{axis + 1} is not a multiple of the tiling {k}. Skipping that axis.")
            continue
        step = n // k
        reference = np.take(deviation, np.arange(step + 1), axis=axis)
        for tile in range(1, k):
            other = np.take(deviation, np.arange(tile * step, tile * step + step + 1), axis=axis)
            error = max(error, float(np.abs(other - reference).max()))
    return error


def surface_wrinkle(corrector: CorrectorField, surface: str = "top", tolerance: float = PERIODICITY_TOLERANCE):
    """Measures how the deformed top or bottom surface deviates from its macroscopic shape.

    The height is Z3 on the surface nodes. The baseline is the macroscopic surface (m xi3, a cylinder for bending modes)
    plus the slopes carried by the mean face jumps and an offset; the deviation is the residual.
    The offset is the unweighted mean over the independent surface nodes: the last row and column repeat the
    first across the period and are left out, so every tiling of a cell gives the same deviation.

    Args:
        corrector (CorrectorField): The solved field
        surface (str): 'top' or 'bottom'
        tolerance (float): Relative tolerance of the tile periodicity check

    Returns:
        WrinkleReport: The metrics
    """
    if surface not in SURFACES:
        raise ValidationError(f"surface must be one of {list(SURFACES)} (got {surface})")
    mesh = corrector.mesh
    mode = corrector.mode
    spec = mesh.spec
    ids = mesh.surface_nodes(surface)
    points = mesh.nodes[ids.ravel()]
    height = corrector.displacements[ids.ravel(), 2].reshape(ids.shape)

    if mode.nu == 1:
        a, b = mode.indices
        macroscopic = -0.5 * mode.magnitude * points[:, a] * points[:, b]
    else:
        macroscopic = np.zeros(points.shape[0])
    residual = height - macroscopic.reshape(ids.shape)

    slope_1 = float(np.mean(residual[-1, :] - residual[0, :]) / spec.h1)
    slope_2 = float(np.mean(residual[:, -1] - residual[:, 0]) / spec.h2)
    y1 = points[:, 0].reshape(ids.shape)
    y2 = points[:, 1].reshape(ids.shape)
    tilted = residual - slope_1 * y1 - slope_2 * y2
    offset = float(tilted[:-1, :-1].mean())
    deviation = tilted - offset

    dx = mesh.grid[0][1] - mesh.grid[0][0]
    dy = mesh.grid[1][1] - mesh.grid[1][0]
    d1, d2 = _face_gradients(deviation, dx, dy)
    squared = d1**2 + d2**2
    amplitude = float(np.abs(deviation).max())
    error = _tile_error(deviation, spec.tiling)

    report = WrinkleReport(
        surface=surface,
        mode=mode,
        baseline={"offset": offset, "slope_1": slope_1, "slope_2": slope_2, "curvature": mode.magnitude if mode.nu == 1 else 0.0},
        deviation=deviation,
        amplitude=amplitude,
        slope_rms=float(np.sqrt(squared.mean())),
        area_ratio=float(np.mean(np.sqrt(1.0 + squared))),
        periodic=error <= tolerance * amplitude + 1e-14,
        periodicity_error=error,
    )
    mlog.info(f"Wrinkle {mode.key} {surface}: amplitude {report.amplitude:.3e}, area ratio {report.area_ratio:.6f}")
    return report
