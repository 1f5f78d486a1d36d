"""Conforming triangular meshes of convex polygon interiors.

The generator keeps every polygon vertex as a boundary node (so simplex
areas tile the polygon exactly and refinement midpoints stay on the
boundary polyline), subdivides long polygon edges to the working spacing,
fills the interior with a hex lattice, and relaxes interior nodes by a few
Delaunay/Laplace sweeps. The working spacing is min(target, median
boundary spacing): a polygon sampled finer than the target is meshed at
its own density rather than coarsened, which preserves exact tiling.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json

import numpy as np
from scipy.spatial import Delaunay

from .errors import MeshQualityError, MeshResourceError
from .geometry import SectionSpec, extract_section

NODE_BUDGET = 500_000
MIN_ANGLE_DEG = 20.0


@dataclasses.dataclass
class Mesh:
    nodes: np.ndarray          # (N, 2)
    simplices: np.ndarray      # (M, 3), positively oriented
    boundary: np.ndarray       # (N,) bool
    h_mesh: float

    @property
    def n(self):
        return self.nodes.shape[1]

    def areas(self):
        p = self.nodes[self.simplices]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self):
        return self.nodes[self.simplices].mean(axis=1)

    def edge_counts(self):
        """Map from sorted node-pair edge to the number of incident triangles."""
        s = self.simplices
        edges = np.vstack([s[:, [0, 1]], s[:, [1, 2]], s[:, [2, 0]]])
        edges.sort(axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        return uniq, counts

    def max_edge(self):
        p = self.nodes[self.simplices]
        ls = [np.linalg.norm(p[:, i] - p[:, j], axis=1)
              for i, j in ((0, 1), (1, 2), (2, 0))]
        return float(np.max(ls))

    def min_angle(self):
        p = self.nodes[self.simplices]
        a, b, c = p[:, 0], p[:, 1], p[:, 2]
        la = np.linalg.norm(b - c, axis=1)
        lb = np.linalg.norm(a - c, axis=1)
        lc = np.linalg.norm(a - b, axis=1)
        worst = np.inf
        for l1, l2, l3 in ((la, lb, lc), (lb, lc, la), (lc, la, lb)):
            cosv = (l2 ** 2 + l3 ** 2 - l1 ** 2) / (2 * l2 * l3)
            ang = np.degrees(np.arccos(np.clip(cosv, -1.0, 1.0)))
            worst = min(worst, float(ang.min()))
        return worst

    def interior_mask(self):
        return ~self.boundary

    def mesh_hash(self):
        h = hashlib.sha256()
        h.update(np.round(self.nodes, 12).tobytes())
        h.update(self.simplices.astype(np.int64).tobytes())
        return h.hexdigest()[:16]

    def to_dict(self):
        return {"nodes": self.nodes.tolist(), "simplices": self.simplices.tolist(),
                "boundary": self.boundary.astype(int).tolist(), "h_mesh": self.h_mesh}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["nodes"], dtype=float),
                   np.asarray(d["simplices"], dtype=np.int64),
                   np.asarray(d["boundary"], dtype=bool), float(d["h_mesh"]))

    def to_json(self):
        return json.dumps(self.to_dict())


def _orient_ccw(nodes, simplices):
    p = nodes[simplices]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    flip = area2 < 0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    return simplices


def _boundary_points(verts, spacing):
    """Polygon vertices plus equal subdivisions of edges longer than the spacing."""
    pts = []
    nxt = np.roll(verts, -1, axis=0)
    for v, w in zip(verts, nxt):
        L = float(np.linalg.norm(w - v))
        k = max(1, int(np.ceil(L / (1.3 * spacing))))
        for j in range(k):
            pts.append(v + (w - v) * (j / k))
    return np.asarray(pts)


def triangulate(body, target_size, smoothing_sweeps=6):
    """Quality triangulation of a convex polygon with exact boundary fidelity.

    Postconditions: max edge <= 2 * target_size, min angle >= 20 degrees,
    boundary nodes on the polygon polyline, conforming connectivity, and
    simplex areas summing to the polygon area up to roundoff.
    """
    if body.n != 2:
        raise NotImplementedError(
            "volumetric meshing is 2D only; 3D integrability diagnostics use "
            "grid quadrature instead of a simplicial mesh")
    verts = body.vertices
    if target_size <= 0:
        raise ValueError("target_size must be positive")
    elens = np.linalg.norm(np.roll(verts, -1, axis=0) - verts, axis=1)
    s = float(min(target_size, np.median(elens)))
    area = body.volume()
    estimate = int(area / (0.866 * s * s) + elens.sum() / s)
    if estimate > NODE_BUDGET:
        raise MeshResourceError(f"estimated {estimate} nodes exceeds budget {NODE_BUDGET}")

    bpts = _boundary_points(verts, s)
    nb = len(bpts)
    nrm, boff = body.halfspaces()
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    rows = []
    ys = np.arange(lo[1] + 0.35 * s, hi[1], s * np.sqrt(3.0) / 2.0)
    for i, y in enumerate(ys):
        xs = np.arange(lo[0] + (0.5 * s if i % 2 else 0.15 * s), hi[0], s)
        rows.append(np.column_stack([xs, np.full(len(xs), y)]))
    lattice = np.vstack(rows) if rows else np.zeros((0, 2))
    if len(lattice):
        sd = lattice @ nrm.T - boff
        lattice = lattice[(sd < -0.75 * s).all(axis=1)]
    nodes = np.vstack([bpts, lattice])

    simplices = None
    for _ in range(max(smoothing_sweeps, 1)):
        tri = Delaunay(nodes)
        simplices = tri.simplices.astype(np.int64)
        acc = np.zeros_like(nodes)
        cnt = np.zeros(len(nodes))
        for i in range(3):
            for j in range(3):
                if i != j:
                    np.add.at(acc, simplices[:, i], nodes[simplices[:, j]])
                    np.add.at(cnt, simplices[:, i], 1.0)
        relaxed = acc / np.maximum(cnt, 1.0)[:, None]
        nodes[nb:] = relaxed[nb:]
    tri = Delaunay(nodes)
    simplices = _orient_ccw(nodes, tri.simplices.astype(np.int64))

    boundary = np.zeros(len(nodes), dtype=bool)
    boundary[:nb] = True
    mesh = Mesh(nodes, simplices, boundary, 0.0)
    mesh.h_mesh = mesh.max_edge()
    q = mesh.min_angle()
    if q < MIN_ANGLE_DEG:
        raise MeshQualityError(f"min angle {q:.2f} deg below {MIN_ANGLE_DEG}")
    if mesh.h_mesh > 2.0 * target_size + 1e-12:
        raise MeshQualityError(f"max edge {mesh.h_mesh:.3g} exceeds 2 * target_size")
    bd = body.boundary_distance(nodes[:nb])
    if bd.max() > 1e-9:
        raise MeshQualityError(f"boundary node off the polygon by {bd.max():.2e}")
    return mesh


def refine(mesh):
    """Uniform midpoint refinement: each triangle splits into four.

    Parent nodes are a prefix of child nodes; every child edge is half of a
    parent edge or a midline, so h_mesh halves exactly and boundary-edge
    midpoints stay on the boundary polyline.
    """
    nodes = mesh.nodes
    simp = mesh.simplices
    edges, counts = mesh.edge_counts()
    edge_index = {(int(a), int(b)): i for i, (a, b) in enumerate(edges)}
    mids = 0.5 * (nodes[edges[:, 0]] + nodes[edges[:, 1]])
    new_nodes = np.vstack([nodes, mids])
    offset = len(nodes)

    def mid(a, b):
        return offset + edge_index[(min(a, b), max(a, b))]

    children = []
    for a, b, c in simp:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        children.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    children = np.asarray(children, dtype=np.int64)
    children = _orient_ccw(new_nodes, children)

    boundary = np.zeros(len(new_nodes), dtype=bool)
    boundary[: len(nodes)] = mesh.boundary
    boundary_edges = counts == 1
    boundary[offset + np.nonzero(boundary_edges)[0]] = True
    return Mesh(new_nodes, children, boundary, mesh.h_mesh / 2.0)


def conformity_report(mesh, body=None):
    """Checks used by the mesh invariants: returns a dict of findings."""
    edges, counts = mesh.edge_counts()
    bad = np.sum((counts != 1) & (counts != 2))
    rim = edges[counts == 1]
    rim_nodes = np.unique(rim)
    report = {
        "nonmanifold_edges": int(bad),
        "boundary_flags_match_rim": bool(set(rim_nodes) ==
                                         set(np.nonzero(mesh.boundary)[0])),
        "min_area": float(mesh.areas().min()),
        "area_sum": float(mesh.areas().sum()),
    }
    if body is not None:
        report["max_boundary_distance"] = float(
            body.boundary_distance(mesh.nodes[mesh.boundary]).max())
        report["area_matches_polytope"] = bool(
            abs(report["area_sum"] - body.volume()) <= 1e-6 * body.volume())
    return report


def section_mesh(potential, x0, h, target_size, max_resolution=8192):
    """Extract a section and mesh it with boundary spacing matched to the target.

    A 64-ray probe estimates the perimeter so the boundary sampling density
    matches ``target_size``; this keeps the triangulation quasi-uniform.
    Returns (polytope, mesh).
    """
    probe = extract_section(SectionSpec(potential, x0, h), angular_resolution=64)
    perim = float(np.linalg.norm(
        np.roll(probe.vertices, -1, axis=0) - probe.vertices, axis=1).sum())
    res = int(np.clip(np.ceil(perim / target_size), 64, max_resolution))
    poly = extract_section(SectionSpec(potential, x0, h), angular_resolution=res)
    return poly, triangulate(poly, target_size)
