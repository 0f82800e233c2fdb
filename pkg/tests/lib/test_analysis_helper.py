# PLATECELL
# This test module is used to test the lib/analysis_helper.py module.
# Most checks use synthetic stress fields on small homogeneous meshes, so the expected values are known exactly.

import numpy as np
import pytest

from lib.analysis_helper import (
    _tile_error,
    boundary_layer_thickness,
    build_representative,
    classify_informative,
    compare_sss,
    layer_profile,
    representative_layers,
    skin_core_decompose,
    slab_deviation,
    surface_wrinkle,
)
from lib.class_helper import (
    CellValidationError,
    IncongruentZonesError,
    IsotropicMaterial,
    LayerProfile,
    MacroMode,
    StressField,
    ValidationError,
)
from lib.fem_helper import solve_pcp
from lib.materials_helper import build_homogeneous_cell, build_layered_cell, tensors_for, tile_cell
from lib.mesh_helper import generate_mesh


def uniaxial_field(mesh, values, label="synthetic"):
    stress = np.zeros((mesh.n_elements, 6))
    stress[:, 0] = values
    return StressField(None, mesh, stress, label=label)


def synthetic_profile(deviation):
    slabs = np.linspace(-2.5, 2.5, len(deviation) + 1)
    zeros = np.zeros(len(deviation))
    return LayerProfile(
        label="synthetic",
        slabs=np.stack([slabs[:-1], slabs[1:]], axis=1),
        matrix_mean=zeros,
        matrix_max=zeros,
        inclusion_mean=zeros,
        inclusion_max=zeros,
        deviation=np.asarray(deviation, dtype=float),
        pitch=1.0,
        half_thickness=2.5,
        structural_bounds=np.array([-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]),
    )


def test_slab_deviation():
    """Tests the normalized fluctuation distance of two slabs.

    Args:
        None

    Returns:
        None
    """
    values = np.array([1.0, 2.0, 3.0, 4.0])
    mask = np.ones(4, dtype=bool)

    assert slab_deviation(values, values, mask) == 0.0, "Identical slabs deviate"
    assert slab_deviation(values, 5.0 * values, mask) == pytest.approx(0.0, abs=1e-12), "Scaling changed the pattern"
    assert slab_deviation(values, values[::-1], mask) > 0.5, "Mirrored pattern not detected"
    assert slab_deviation(values, values[::-1], np.zeros(4, dtype=bool)) == 0.0, "Empty mask did not give 0"


def test_layer_profile():
    """Tests slab statistics and the periodicity deviation with a pitch override.

    Args:
        None

    Returns:
        None
    """
    mesh = generate_mesh(build_homogeneous_cell(1.0, 1.0, 1.0, "matrix"), (4, 2, 4))
    centroids = mesh.element_centroids()
    values = 1.0 + centroids[:, 0]
    top = centroids[:, 2] > 0.25
    values[top] = 1.0 + (1.0 - centroids[top, 0])
    field = uniaxial_field(mesh, values)

    profile = layer_profile(field, pitch=0.25)
    assert profile.slabs.shape == (4, 2), "Wrong slab count"
    assert profile.matrix_mean == pytest.approx([1.5, 1.5, 1.5, 1.5]), "Wrong slab means"
    assert profile.matrix_max == pytest.approx([1.875] * 4), "Wrong slab maxima"
    assert profile.inclusion_mean == pytest.approx([0.0] * 4), "Inclusion statistics without inclusions"
    assert profile.deviation[3] > 0.05, "Mirrored top slab not detected"
    assert profile.deviation[:3] == pytest.approx([0.0, 0.0, 0.0], abs=1e-12), "Periodic slabs deviate"
    assert len(profile.rows()) == 4, "Wrong number of rows"

    unlayered = layer_profile(field)
    assert np.all(unlayered.deviation == 0.0), "Deviation without a structural pitch"


def test_boundary_layer_and_skin_core():
    """Tests the skin/core decomposition of a 5-layer profile with a boundary layer at the top.

    Args:
        None

    Returns:
        None
    """
    deviation = np.zeros(10)
    deviation[7:] = 0.2
    profile = synthetic_profile(deviation)

    boundary = boundary_layer_thickness(profile, threshold=0.05)
    assert boundary["top"]["thickness"] == pytest.approx(1.5), "Wrong top boundary layer"
    assert boundary["top"]["pitches"] == pytest.approx(1.5), "Wrong boundary layer in pitches"
    assert boundary["bottom"]["thickness"] == 0.0, "Bottom boundary layer without deviation"

    decomposition = skin_core_decompose(profile, threshold=0.05)
    assert decomposition.skin_layers == {"top": 2, "bottom": 1}, f"Wrong skin layers: {decomposition.skin_layers}"
    assert decomposition.top_skin == pytest.approx((0.5, 2.5)), "Wrong top skin"
    assert decomposition.core == pytest.approx((-1.5, 0.5)), "Wrong core"
    assert decomposition.bottom_skin == pytest.approx((-2.5, -1.5)), "Wrong bottom skin"
    assert decomposition.core_layers == 2, "Wrong core layer count"
    thickness = sum(decomposition.thickness(zone) for zone in ("top_skin", "core", "bottom_skin"))
    assert thickness == pytest.approx(5.0), "Zones do not partition the thickness"

    with pytest.raises(ValidationError):
        boundary_layer_thickness(profile, threshold=0.0)


def test_skin_core_clipping():
    """Tests that skins are clipped so that one core layer is kept, and that thin plates are rejected.

    Args:
        None

    Returns:
        None
    """
    profile = synthetic_profile(np.full(10, 0.2))
    decomposition = skin_core_decompose(profile, threshold=0.05)
    assert decomposition.core_layers == 1, f"Core not kept: {decomposition.core_layers}"
    assert decomposition.skin_layers["top"] + decomposition.skin_layers["bottom"] == 4, "Skins do not fill the rest"

    thin = synthetic_profile(np.zeros(10))
    thin.structural_bounds = np.array([-2.5, 0.0, 2.5])
    with pytest.raises(CellValidationError):
        skin_core_decompose(thin)


def test_build_representative():
    """Tests the representative 3-layer cells of a 9-layer plate.

    Args:
        None

    Returns:
        None
    """
    spec = build_layered_cell("fiber", 9, 0.45, 0.1, 0.1, 1.1, 3.0, "matrix", "fiber")
    assert representative_layers(spec, "symmetric") == (0, 1, 8), "Wrong symmetric layers"
    assert representative_layers(spec, "top") == (0, 1, 2), "Wrong top layers"
    assert representative_layers(spec, "bottom") == (6, 7, 8), "Wrong bottom layers"

    representative = build_representative(spec, "symmetric")
    assert len(representative.layer_centers()) == 3, "Representative does not have 3 layers"
    assert representative.half_thickness == pytest.approx(1.55), "Covers or pitch not kept"
    assert representative.layer_pitch() == pytest.approx(1.0), "Pitch not kept"
    assert len(representative.inclusions) == 1 + 2 + 1, "Wrong inclusions copied"

    with pytest.raises(ValidationError):
        build_representative(spec, "middle")
    with pytest.raises(CellValidationError):
        build_representative(build_layered_cell("fiber", 2, 0.45, 0.1, 0.1, 1.1, 3.0, "matrix", "fiber"))


def test_compare_sss():
    """Tests zone comparisons: identical fields, doubled fields and incongruent zones.

    Args:
        None

    Returns:
        None
    """
    mesh = generate_mesh(build_homogeneous_cell(1.0, 1.0, 1.0, "matrix"), (2, 2, 4))
    values = 1.0 + mesh.element_centroids()[:, 0]
    field = uniaxial_field(mesh, values)
    doubled = uniaxial_field(mesh, 2.0 * values)
    zone = (-0.5, 0.5)

    same = compare_sss(field, zone, field, zone, 0.05, "same")
    assert same.rel_l2 == 0.0 and same.rel_max == 0.0, "Identical fields differ"
    assert same.informative and same.verdict == "informative", "Identical fields are not informative"

    report = compare_sss(field, zone, doubled, zone, 0.05, "doubled")
    assert report.rel_l2 == pytest.approx(0.5), f"Wrong rel_l2: {report.rel_l2}"
    assert report.rel_max == pytest.approx(0.5), f"Wrong rel_max: {report.rel_max}"
    assert report.verdict == "non-informative", "Doubled field is informative"
    assert report.per_slab == pytest.approx([0.5] * 4), "Wrong per-slab differences"

    shifted = compare_sss(field, (-0.5, 0.0), doubled, (0.0, 0.5), 0.05)
    assert shifted.rel_l2 == pytest.approx(0.5), "Zones at different heights are not registered"

    with pytest.raises(IncongruentZonesError):
        compare_sss(field, (-0.5, 0.1), field, (-0.5, 0.1))
    with pytest.raises(IncongruentZonesError):
        compare_sss(field, (-0.5, 0.0), field, (-0.5, 0.25))

    assert classify_informative([[report, same], [report], []]) == ["informative", "non-informative", "non-informative"], "Wrong verdicts"


def test_surface_wrinkle():
    """Tests that a homogeneous plate does not wrinkle in tension or bending.

    Args:
        None

    Returns:
        None
    """
    mesh = generate_mesh(build_homogeneous_cell(1.0, 1.0, 1.0, "matrix"), (2, 2, 4))
    tensors = tensors_for({"matrix": IsotropicMaterial("matrix", 1.0, 0.0)})

    for key in ("11:0", "11:1"):
        corrector = solve_pcp(mesh, tensors, MacroMode.from_string(key), {"method": "direct", "element": "hex8i"})
        for surface in ("top", "bottom"):
            report = surface_wrinkle(corrector, surface)
            assert report.amplitude < 1e-8, f"{key} {surface}: flat surface wrinkles ({report.amplitude})"
            assert report.area_ratio == pytest.approx(1.0), f"{key} {surface}: wrong area ratio"
            assert report.periodic, f"{key} {surface}: single cell reported non-periodic"
            assert report.deviation.shape == (3, 3), "Wrong deviation grid"

    with pytest.raises(ValidationError):
        surface_wrinkle(corrector, "side")


def test_tile_error():
    """Tests the periodicity check of a deviation on a 2x1 tiled surface.

    Args:
        None

    Returns:
        None
    """
    pattern = np.array([0.0, 1.0, 0.0, 1.0, 0.0])[:, None] * np.ones((1, 3))
    assert _tile_error(pattern, (2, 1)) == 0.0, "Periodic deviation reported as non-periodic"

    broken = pattern.copy()
    broken[4, :] = 0.5
    assert _tile_error(broken, (2, 1)) == pytest.approx(0.5), "Non-periodic deviation not detected"
    assert _tile_error(broken, (1, 1)) == 0.0, "Single cell compared with itself"


def test_fiber_bending_wrinkle():
    """Tests that a fiber plate in bending wrinkles and that the measure does not depend on the tiling.

    The 2x1 tiled cell repeats the single-cell solution, so both give the same deviation per tile.

    Args:
        None

    Returns:
        None
    """
    spec = build_layered_cell("fiber", 3, 0.45, 0.1, 0.1, 1.1, 3.0, "matrix", "fiber")
    tensors = tensors_for({"matrix": IsotropicMaterial("matrix", 2.0, 0.36), "fiber": IsotropicMaterial("fiber", 170.0, 0.3)})
    solver = {"method": "direct", "element": "hex8i"}
    mode = MacroMode("11", 1)

    single = surface_wrinkle(solve_pcp(generate_mesh(spec, (4, 8, 16)), tensors, mode, solver), "top")
    twin = surface_wrinkle(solve_pcp(generate_mesh(tile_cell(spec, 2, 1), (8, 8, 16)), tensors, mode, solver), "top")

    assert twin.amplitude > 1e-6, f"Fiber plate in bending does not wrinkle ({twin.amplitude})"
    assert twin.periodic, f"Twin deviation is not periodic (error {twin.periodicity_error})"
    assert twin.periodicity_error < 1e-6 * twin.amplitude, "Tiles deviate from each other"
    assert twin.area_ratio - 1.0 > 1e-4, f"Wrinkled surface has no extra area ({twin.area_ratio})"
    assert twin.deviation.shape == (9, 9), "Wrong twin deviation grid"

    assert twin.amplitude == pytest.approx(single.amplitude, rel=1e-6), "Amplitude depends on the tiling"
    assert twin.slope_rms == pytest.approx(single.slope_rms, rel=1e-6), "Slope rms depends on the tiling"
    assert twin.area_ratio == pytest.approx(single.area_ratio, rel=1e-8), "Area ratio depends on the tiling"
    assert np.allclose(twin.deviation[:5, :], single.deviation, atol=1e-6 * single.amplitude), "Tile differs from the single cell"
    assert twin.deviation[:-1, :-1].mean() == pytest.approx(0.0, abs=1e-12), "Offset is not the mean of the independent nodes"


def test_channel_tension_wrinkle():
    """Tests that a channel plate stretched across its channels wrinkles on both surfaces.

    Args:
        None

    Returns:
        None
    """
    spec = build_layered_cell("channel", 3, 0.45, 0.1, 0.1, 1.1, 3.0, "matrix")
    tensors = tensors_for({"matrix": IsotropicMaterial("matrix", 2.0, 0.36)})
    corrector = solve_pcp(generate_mesh(spec, (2, 12, 16)), tensors, MacroMode("22", 0), {"method": "direct", "element": "hex8i"})

    for surface in ("top", "bottom"):
        report = surface_wrinkle(corrector, surface)
        assert report.amplitude > 1e-6, f"{surface}: channel plate in tension does not wrinkle ({report.amplitude})"
        assert report.baseline["curvature"] == 0.0, "Tension mode has a curvature baseline"
        assert report.periodic, f"{surface}: single cell reported non-periodic"
        assert np.allclose(report.deviation[0, :], report.deviation[1, :], atol=1e-9), f"{surface}: deviation varies along the channels"
