import numpy as np
import pytest

from malin.errors import MeshResourceError
from malin.geometry import Polytope, SectionSpec, extract_section
from malin.meshing import (Mesh, conformity_report, refine, section_mesh, triangulate)


@pytest.fixture(scope="module")
def disk256(quadratic):
    return extract_section(SectionSpec(quadratic, (0.0, 0.0), 0.5), 256)


@pytest.fixture(scope="module")
def disk_mesh(disk256):
    return triangulate(disk256, 0.1)


def square_polytope(half=1.0):
    v = half * np.array([[-1.0, -1], [1, -1], [1, 1], [-1, 1]])
    return Polytope(v, "Transformed", np.zeros(2))


class TestTriangulate:
    def test_disk_invariants_and_node_count(self, disk256, disk_mesh):
        m = disk_mesh
        # count frozen from the reference run of this generator (it keeps
        # every polygon vertex, so the 256-gon meshes at its own density)
        assert 5500 <= len(m.nodes) <= 6500
        assert m.min_angle() >= 20.0
        assert m.max_edge() <= 0.2
        rep = conformity_report(m, disk256)
        assert rep["nonmanifold_edges"] == 0
        assert rep["boundary_flags_match_rim"]
        assert rep["min_area"] >= 1e-14
        assert rep["max_boundary_distance"] < 1e-9
        assert abs(rep["area_sum"] - disk256.volume()) <= 1e-6 * disk256.volume()

    def test_coarse_square(self):
        sq = square_polytope()
        m = triangulate(sq, 1.0)
        assert np.all(np.abs(m.nodes) <= 1.0 + 1e-12)
        assert np.all(m.areas() > 0)
        assert abs(m.areas().sum() - 4.0) < 1e-12

    def test_ellipse_quality(self, aniso):
        poly = extract_section(SectionSpec(aniso, (0.0, 0.0), 0.5), 512)
        m = triangulate(poly, 0.05)
        assert m.min_angle() >= 20.0
        rep = conformity_report(m, poly)
        assert rep["nonmanifold_edges"] == 0
        assert rep["area_matches_polytope"]

    def test_target_must_be_positive(self, disk256):
        with pytest.raises(ValueError):
            triangulate(disk256, 0.0)

    def test_resource_budget(self, disk256):
        with pytest.raises(MeshResourceError) as exc:
            triangulate(disk256, 1e-4)
        assert "nodes" in str(exc.value)

    def test_three_dimensional_not_supported(self, quadratic):
        from malin.potentials import make_potential

        q3 = make_potential("Quadratic", n=3)
        poly = extract_section(SectionSpec(q3, (0.0, 0.0, 0.0), 0.5), 256)
        with pytest.raises(NotImplementedError):
            triangulate(poly, 0.1)


class TestRefine:
    def test_h_halves(self, disk_mesh):
        child = refine(disk_mesh)
        assert 0.45 <= child.h_mesh / disk_mesh.h_mesh <= 0.55
        assert child.max_edge() == pytest.approx(disk_mesh.max_edge() / 2.0, rel=1e-12)

    def test_twice_quarters(self, disk_mesh):
        child = refine(refine(disk_mesh))
        assert child.h_mesh == pytest.approx(disk_mesh.h_mesh / 4.0, rel=1e-12)

    def test_nesting(self, disk_mesh):
        child = refine(disk_mesh)
        np.testing.assert_array_equal(child.nodes[: len(disk_mesh.nodes)],
                                      disk_mesh.nodes)

    def test_boundary_preserved(self, disk256, disk_mesh):
        child = refine(disk_mesh)
        dist = disk256.boundary_distance(child.nodes[child.boundary])
        assert dist.max() < 1e-9
        rep = conformity_report(child, disk256)
        assert rep["nonmanifold_edges"] == 0
        assert rep["boundary_flags_match_rim"]
        assert rep["area_matches_polytope"]

    def test_parent_points_covered(self, disk_mesh):
        child = refine(disk_mesh)
        # every parent node is a child node, and areas are preserved
        assert child.areas().sum() == pytest.approx(disk_mesh.areas().sum(), rel=1e-12)
        assert np.all(child.areas() > 0)


class TestSerialization:
    def test_round_trip(self, disk_mesh):
        d = Mesh.from_dict(disk_mesh.to_dict())
        np.testing.assert_array_equal(d.nodes, disk_mesh.nodes)
        np.testing.assert_array_equal(d.simplices, disk_mesh.simplices)
        np.testing.assert_array_equal(d.boundary, disk_mesh.boundary)
        assert d.mesh_hash() == disk_mesh.mesh_hash()


class TestSectionMesh:
    def test_matched_resolution(self, quadratic):
        poly, mesh = section_mesh(quadratic, (0.0, 0.0), 0.5, 0.1)
        # 64 boundary rays for a perimeter-2pi disk at target 0.1
        assert 60 <= len(poly.vertices) <= 70
        assert mesh.min_angle() >= 20.0
        assert mesh.max_edge() <= 0.2

    def test_anisotropic_case(self, aniso):
        poly, mesh = section_mesh(aniso, (0.0, 0.0), 0.5, 0.1)
        assert mesh.min_angle() >= 20.0
        rep = conformity_report(mesh, poly)
        assert rep["nonmanifold_edges"] == 0
