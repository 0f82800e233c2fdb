# PLATECELL
# This test module is used to test the lib/mesh_helper.py module.

import mock
import numpy as np
import pytest

import lib.mesh_helper as mesh_helper
from lib.class_helper import VOID, MeshError
from lib.materials_helper import build_homogeneous_cell, build_laminate_cell, build_layered_cell
from lib.mesh_helper import build_y3_grid, generate_mesh, periodic_images, periodic_pairs, structural_bounds, thin_matrix_gaps


def test_homogeneous_mesh():
    """Tests node and element counts and the periodic pairs of a small homogeneous cell.

    Args:
        None

    Returns:
        None
    """
    mesh = generate_mesh(build_homogeneous_cell(1.0, 2.0, 1.0, "matrix"), (2, 3, 4))

    assert mesh.n_nodes == 3 * 4 * 5, "Wrong node count"
    assert mesh.n_elements == 2 * 3 * 4, "Wrong element count"
    assert np.all(mesh.active), "A homogeneous cell has void elements"
    assert np.allclose(mesh.element_volumes().sum(), 2.0), "Element volumes do not add up to the cell volume"

    pairs_1 = periodic_pairs(mesh, 1)
    pairs_2 = periodic_pairs(mesh, 2)
    assert len(pairs_1) == (3 + 1) * (4 + 1), "Wrong number of y1 pairs"
    assert len(pairs_2) == (2 + 1) * (4 + 1), "Wrong number of y2 pairs"
    shift = mesh.nodes[pairs_1.pairs[:, 1]] - mesh.nodes[pairs_1.pairs[:, 0]]
    assert np.allclose(shift, [1.0, 0.0, 0.0]), "y1 pairs are not one period apart"
    shift = mesh.nodes[pairs_2.pairs[:, 1]] - mesh.nodes[pairs_2.pairs[:, 0]]
    assert np.allclose(shift, [0.0, 2.0, 0.0]), "y2 pairs are not one period apart"

    images = periodic_images(mesh)
    assert np.all(images[pairs_1.pairs[:, 1]] == images[pairs_1.pairs[:, 0]]), "Paired nodes have different images"
    assert np.all(mesh.node_grid_index[images, 0] < 2), "An image lies on the y1 = h1 face"

    with pytest.raises(MeshError):
        periodic_pairs(mesh, 3)


def test_invalid_resolution():
    """Tests that resolutions below 2 elements per axis are rejected.

    Args:
        None

    Returns:
        None
    """
    spec = build_homogeneous_cell(1.0, 1.0, 1.0, "matrix")
    with pytest.raises(MeshError):
        generate_mesh(spec, (1, 2, 2))
    with pytest.raises(MeshError):
        generate_mesh(spec, ("a", 2, 2))


def test_channel_mesh():
    """Tests that channel elements are tagged void and every channel receives elements.

    Args:
        None

    Returns:
        None
    """
    spec = build_layered_cell("channel", 3, 0.45, 0.1, 0.1, 1.1, 3.0, "matrix")
    mesh = generate_mesh(spec, (4, 8, 24))

    void = mesh.phase == VOID
    assert np.any(void), "No void elements"
    assert not np.any(mesh.matrix & void), "Void elements are counted as matrix"
    for index in range(len(spec.inclusions)):
        assert np.any(mesh.inclusion == index), f"Channel {index} has no element"
    assert set(mesh.phase_names()[void]) == {"void"}, "Void elements are not named 'void'"


def test_layered_y3_grid():
    """Tests that the layered grid contains the inclusion extremal heights and repeats per pitch.

    Args:
        None

    Returns:
        None
    """
    spec = build_layered_cell("fiber", 5, 0.45, 0.1, 0.1, 1.1, 3.0, "matrix", "fiber")
    planes = build_y3_grid(spec, 48)
    h = spec.half_thickness

    assert planes[0] == pytest.approx(-h) and planes[-1] == pytest.approx(h), "Grid does not span the thickness"
    assert np.all(np.diff(planes) > 0.0), "Grid is not strictly increasing"
    for center in spec.layer_centers():
        for extremal in (center - 0.45, center + 0.45):
            assert np.min(np.abs(planes - extremal)) < 1e-9, f"No grid plane at y3 = {extremal}"

    centers = spec.layer_centers()
    lower = planes[np.abs(planes - centers[1]) < 0.49]
    upper = planes[np.abs(planes - centers[2]) < 0.49]
    assert np.allclose(upper - 1.0, lower), "Structural layers one pitch apart are meshed differently"


def test_laminate_y3_grid():
    """Tests that lamina interfaces lie on grid planes.

    Args:
        None

    Returns:
        None
    """
    spec = build_laminate_cell(1.0, 1.0, [("soft", 0.3), ("stiff", 0.7)])
    planes = build_y3_grid(spec, 5)

    assert len(planes) == 6, "Uniform grid changed its element count"
    assert np.min(np.abs(planes - (-0.2))) < 1e-12, "Lamina interface is not a grid plane"


def test_structural_bounds():
    """Tests the structural layer bounds of a 3-layer plate.

    Args:
        None

    Returns:
        None
    """
    spec = build_layered_cell("fiber", 3, 0.45, 0.1, 0.1, 1.1, 3.0, "matrix", "fiber")
    bounds = structural_bounds(spec)

    assert len(bounds) == 4, "Wrong number of bounds"
    assert bounds[0] == pytest.approx(-spec.half_thickness) and bounds[-1] == pytest.approx(spec.half_thickness), "Outer bounds are not the surfaces"
    assert bounds[1] == pytest.approx(-0.5) and bounds[2] == pytest.approx(0.5), "Interior bounds are not halfway between layers"
    assert structural_bounds(build_homogeneous_cell(1.0, 1.0, 1.0, "matrix")) is None, "A homogeneous cell has structural layers"


def test_thin_matrix_gaps():
    """Tests the warning for matrix gaps between neighbouring fibers that are thinner than one element.

    One fiber per 1.1 period with radius 0.45 leaves a 0.2 gap to its periodic image.

    Args:
        None

    Returns:
        None
    """
    spec = build_layered_cell("fiber", 2, 0.45, 0.1, 0.1, 1.1, 3.0, "matrix", "fiber", directions=["y2", "y2"])

    coarse = (np.linspace(0.0, 1.1, 5), np.linspace(0.0, 3.0, 3), None)
    thin = thin_matrix_gaps(spec, coarse)
    assert len(thin) == 2, f"Thin gaps not found in both layers: {thin}"
    center, axis, gap, size = thin[0]
    assert axis == 2, "Wrong fiber axis"
    assert gap == pytest.approx(0.2), "Wrong gap to the periodic image"
    assert size == pytest.approx(0.275), "Wrong element size"

    fine = (np.linspace(0.0, 1.1, 9), np.linspace(0.0, 3.0, 3), None)
    assert thin_matrix_gaps(spec, fine) == [], "Resolved gap reported as thin"

    with mock.patch.object(mesh_helper.mlog, "warning") as warning:
        generate_mesh(spec, (4, 2, 12))
    assert warning.call_count == 2, "Thin gaps were not logged"
    assert "thinner than one element" in warning.call_args[0][0], "Wrong warning message"

    with mock.patch.object(mesh_helper.mlog, "warning") as warning:
        generate_mesh(spec, (8, 2, 12))
    assert warning.call_count == 0, "Warning for a resolved gap"
