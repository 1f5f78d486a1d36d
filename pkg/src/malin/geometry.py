"""Section extraction, John-ellipsoid normalization, and convex-geometry checks.

Sections are sublevel sets of a potential minus its supporting affine
function; they play the role of balls for the degenerate geometry. All
bodies here are convex, represented by explicit boundary vertices
(ordered loop in 2D, hull-triangulated point cloud in 3D).
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.spatial import ConvexHull

from .errors import ConditioningError, ContainmentError

BISECTION_TOL = 1e-12  # on the height residual of the section equation


@dataclasses.dataclass(frozen=True)
class SectionSpec:
    """Section of ``potential`` centered at ``x0`` with height ``h``."""

    potential: object
    x0: tuple
    h: float

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)))
        if self.h <= 0:
            raise ValueError("section height must be positive")


@dataclasses.dataclass
class Polytope:
    """Convex body carried by boundary vertices.

    2D: ``vertices`` is a CCW loop. 3D: a boundary point cloud with hull
    triangulation in ``simplices``.
    """

    vertices: np.ndarray
    provenance: str
    interior_point: np.ndarray
    simplices: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.interior_point = np.asarray(self.interior_point, dtype=float)
        if self.n == 2 and _polygon_signed_area(self.vertices) < 0:
            self.vertices = self.vertices[::-1].copy()
        if self.n == 3 and self.simplices is None:
            self.simplices = ConvexHull(self.vertices).simplices.copy()

    @property
    def n(self):
        return self.vertices.shape[1]

    def volume(self):
        if self.n == 2:
            return abs(_polygon_signed_area(self.vertices))
        return float(ConvexHull(self.vertices).volume)

    def support(self, directions):
        """Support function h_K(d) = max_v v . d for unit directions."""
        return (np.asarray(directions, dtype=float) @ self.vertices.T).max(axis=1)

    def halfspaces(self):
        """Outward unit normals and offsets with K = {x : n_i . x <= b_i}."""
        if self.n == 2:
            e = np.roll(self.vertices, -1, axis=0) - self.vertices
            nrm = np.column_stack([e[:, 1], -e[:, 0]])
            ln = np.linalg.norm(nrm, axis=1)
            keep = ln > 1e-300
            nrm = nrm[keep] / ln[keep, None]
            return nrm, np.einsum("ij,ij->i", nrm, self.vertices[keep])
        hull = ConvexHull(self.vertices)
        return hull.equations[:, :3], -hull.equations[:, 3]

    def contains(self, points, tol=1e-9):
        nrm, b = self.halfspaces()
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return ((pts @ nrm.T) - b <= tol).all(axis=1)

    def inradius_about(self, point):
        """Distance from ``point`` to the boundary (min over face planes)."""
        nrm, b = self.halfspaces()
        return float(np.min(b - nrm @ np.asarray(point, dtype=float)))

    def boundary_distance(self, points):
        """Unsigned distance of points to the boundary surface."""
        nrm, b = self.halfspaces()
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.abs((pts @ nrm.T) - b).min(axis=1)

    def max_hull_depth(self):
        """How far any vertex sits off the hull of the vertex set (convexity defect)."""
        hull = ConvexHull(self.vertices)
        nrm = hull.equations[:, : self.n]
        off = hull.equations[:, self.n]
        # inside-distance to the nearest hull facet; 0 for hull vertices
        d = -(self.vertices @ nrm.T + off)
        return float(d.min(axis=1).max())

    def validate(self, tol=1e-9):
        if self.max_hull_depth() > tol:
            raise ConditioningError(f"polytope vertices deviate from their hull by "
                                    f"{self.max_hull_depth():.2e}")
        if not self.contains(self.interior_point[None], tol=tol)[0]:
            raise ConditioningError("declared interior point lies outside the polytope")
        return True

    def to_dict(self):
        return {"n": self.n, "vertices": self.vertices.tolist(), "provenance": self.provenance}

    @classmethod
    def from_dict(cls, d):
        verts = np.asarray(d["vertices"], dtype=float)
        return cls(verts, d["provenance"], verts.mean(axis=0))


def _polygon_signed_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclasses.dataclass
class AffineMap:
    """T x = A x + c with cached determinant and inverse."""

    A: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.det = float(np.linalg.det(self.A))
        if self.det == 0.0 or not np.isfinite(self.det):
            raise ConditioningError("affine map is singular")
        self.inv = np.linalg.inv(self.A)
        err = np.abs(self.inv @ self.A - np.eye(len(self.c))).max()
        if err > 1e-12:
            raise ConditioningError(f"affine map inversion residual {err:.2e} > 1e-12")

    @property
    def n(self):
        return len(self.c)

    def apply(self, x):
        return np.atleast_2d(np.asarray(x, dtype=float)) @ self.A.T + self.c

    def inverse_apply(self, x):
        return (np.atleast_2d(np.asarray(x, dtype=float)) - self.c) @ self.inv.T

    def compose(self, other):
        """self after other: (self.compose(other))(x) = self(other(x))."""
        return AffineMap(self.A @ other.A, self.A @ other.c + self.c)

    def inverse(self):
        return AffineMap(self.inv, -self.inv @ self.c)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n), np.zeros(n))

    def operator_norm(self):
        return float(np.linalg.norm(self.A, 2))


def unit_directions(count, n):
    """Deterministic well-spread unit directions (equiangular / Fibonacci)."""
    if n == 2:
        th = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return np.column_stack([np.cos(th), np.sin(th)])
    k = np.arange(count)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    z = 1.0 - 2.0 * (k + 0.5) / count
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.column_stack([r * np.cos(golden * k), r * np.sin(golden * k), z])


def _box_exit_distance(x0, dirs, box):
    """Distance along each ray from x0 to the domain box boundary."""
    lo, hi = box[:, 0], box[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (lo - x0) / dirs
        t_hi = (hi - x0) / dirs
    t = np.where(dirs > 0, t_hi, np.where(dirs < 0, t_lo, np.inf))
    return t.min(axis=1)


def _section_crossings(spec, dirs):
    """Bisection along rays for the height-residual root, vectorized."""
    pot = spec.potential
    x0 = np.asarray(spec.x0, dtype=float)
    if not pot.admissible(x0[None])[0]:
        raise ContainmentError(f"section center {x0.tolist()} outside admissible domain")
    phi0 = pot.value(x0[None])[0]
    g0 = pot.gradient(x0[None])[0]

    def residual(s):
        pts = x0 + s[:, None] * dirs
        return pot.value(pts) - phi0 - s * (dirs @ g0) - spec.h

    s_cap = _box_exit_distance(x0, dirs, pot.domain_box) * (1.0 - 1e-12)
    if np.any(s_cap <= 0):
        raise ContainmentError("section center on the domain box boundary")
    s_hi = np.minimum(np.sqrt(2.0 * spec.h) * 1e-2, s_cap)
    for _ in range(80):
        r = residual(s_hi)
        grow = (r < 0) & (s_hi < s_cap)
        if not grow.any():
            break
        s_hi = np.where(grow, np.minimum(2.0 * s_hi, s_cap), s_hi)
    if np.any(residual(s_hi) < 0):
        j = int(np.argmin(residual(s_hi)))
        raise ContainmentError(
            f"section not compactly contained: ray {dirs[j].tolist()} reaches the "
            f"domain box below height {spec.h}")
    s_lo = np.zeros_like(s_hi)
    for _ in range(100):
        mid = 0.5 * (s_lo + s_hi)
        r = residual(mid)
        s_lo = np.where(r < 0, mid, s_lo)
        s_hi = np.where(r < 0, s_hi, mid)
        if np.max(np.abs(r)) <= BISECTION_TOL and np.max(s_hi - s_lo) <= 1e-14 * np.max(s_hi):
            break
    s = 0.5 * (s_lo + s_hi)
    pts = x0 + s[:, None] * dirs
    if not pot.admissible(pts).all():
        raise ContainmentError("section boundary leaves the admissible domain")
    return pts


def section_boundary_along(spec, directions):
    """Exact boundary crossings of a section along caller-chosen ray directions."""
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    return _section_crossings(spec, dirs)


def extract_section(spec, angular_resolution=256, spacing="equal-arc"):
    """Boundary polytope of a section by ray bisection from its center.

    Each returned vertex solves the section equation to 1e-12 along its
    ray. For n = 2 the default picks ray angles so that boundary vertices
    are nearly equally spaced in arc length (a probe pass at higher angular
    resolution supplies the arc-length parametrization); ``spacing=
    "equiangular"`` keeps uniformly spread angles instead. n = 3 uses
    Fibonacci-sphere directions.
    """
    n = spec.potential.n
    min_res = 16 if n == 2 else 64
    if angular_resolution < min_res:
        raise ValueError(f"angular_resolution must be >= {min_res} for n={n}")
    x0 = np.asarray(spec.x0, dtype=float)
    if n == 3 or spacing == "equiangular":
        dirs = unit_directions(angular_resolution, n)
        pts = _section_crossings(spec, dirs)
        return Polytope(pts, "SectionLevelSet", x0)
    probe_res = min(max(4 * angular_resolution, 512), 16384)
    th = np.linspace(0.0, 2.0 * np.pi, probe_res, endpoint=False)
    probe = _section_crossings(spec, np.column_stack([np.cos(th), np.sin(th)]))
    seg = np.linalg.norm(np.roll(probe, -1, axis=0) - probe, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, cum[-1], angular_resolution, endpoint=False)
    idx = np.searchsorted(cum, targets, side="right") - 1
    frac = (targets - cum[idx]) / np.maximum(seg[idx], 1e-300)
    th_sel = th[idx] + frac * (2.0 * np.pi / probe_res)
    dirs = np.column_stack([np.cos(th_sel), np.sin(th_sel)])
    pts = _section_crossings(spec, dirs)
    return Polytope(pts, "SectionLevelSet", x0)


def _mvee(points, tol=1e-12, max_iter=100000):
    """Minimum-volume enclosing ellipsoid {x : (x-c)^T P (x-c) <= 1}.

    Barycentric-coordinate ascent with away steps (linear convergence),
    followed by an exact inflation so every input point is inside.
    """
    P = np.asarray(points, dtype=float)
    N, d = P.shape
    Q = np.column_stack([P, np.ones(N)])
    u = np.full(N, 1.0 / N)
    for _ in range(max_iter):
        V = Q.T @ (u[:, None] * Q)
        try:
            Vi = np.linalg.inv(V)
        except np.linalg.LinAlgError:
            raise ConditioningError("degenerate point set in ellipsoid fit")
        M = np.einsum("ij,jk,ik->i", Q, Vi, Q)
        j_add = int(np.argmax(M))
        kappa_add = M[j_add] - (d + 1)
        Ma = np.where(u > 1e-15, M, np.inf)
        j_drop = int(np.argmin(Ma))
        kappa_drop = (d + 1) - M[j_drop]
        if max(kappa_add, kappa_drop) <= tol * (d + 1):
            break
        if kappa_add >= kappa_drop:
            j = j_add
            step = kappa_add / ((d + 1) * (M[j] - 1.0))
            u *= 1.0 - step
            u[j] += step
        else:
            j = j_drop
            step = min(kappa_drop / ((d + 1) * (M[j] - 1.0)),
                       u[j] / max(1.0 - u[j], 1e-300))
            u *= 1.0 + step
            u[j] -= step
            np.maximum(u, 0.0, out=u)
            u /= u.sum()
    c = P.T @ u
    cov = P.T @ (u[:, None] * P) - np.outer(c, c)
    try:
        Pmat = np.linalg.inv(cov) / d
    except np.linalg.LinAlgError:
        raise ConditioningError("degenerate point set in ellipsoid fit")
    dev = P - c
    q = np.einsum("ij,jk,ik->i", dev, Pmat, dev)
    return c, Pmat / max(q.max(), 1e-300)


def john_normalize(body):
    """Affine map T with B_1 inside T^{-1}(body) inside B_n.

    Fits the minimum-volume enclosing ellipsoid E = c + M(B_1) of the
    boundary vertices, then shrinks M by the largest factor s that keeps
    c + s M(B_1) inside the body (computed exactly from the body's face
    halfspaces). John's lemma guarantees s >= 1/n, so T x = c + s M x
    satisfies both inclusions, and bodies that are already ellipsoids
    normalize to B_1 itself.
    """
    n = body.n
    c, Pmat = _mvee(body.vertices)
    w, V = np.linalg.eigh(Pmat)
    if w.min() <= 0 or not np.isfinite(w).all():
        raise ConditioningError("enclosing ellipsoid is degenerate")
    thinness = float(np.sqrt(w.min() / w.max()))  # semi-axis ratio of E
    if thinness < 1e-7:
        raise ConditioningError(f"body too thin to normalize: axis ratio {thinness:.2e}")
    M = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    nrm, b = body.halfspaces()
    s = float(np.min((b - nrm @ c) / np.linalg.norm(nrm @ M, axis=1)))
    s = min(s, 1.0)
    if s <= 0:
        raise ConditioningError("ellipsoid center outside the body")
    T = AffineMap(s * M, c)
    normalized = Polytope(T.inverse_apply(body.vertices), "Transformed",
                          T.inverse_apply(body.interior_point[None])[0])
    return T, normalized


@dataclasses.dataclass(frozen=True)
class NormalizationCheck:
    ok: bool
    min_support: float
    max_support: float
    worst_low_direction: tuple
    worst_high_direction: tuple


def verify_normalized(body, tolerance=1e-6, direction_count=720):
    """Check B_1 <= body <= B_n via support-function samples.

    Returns the verdict together with the directions of minimal and
    maximal support (the worst witnesses).
    """
    dirs = unit_directions(direction_count, body.n)
    sup = body.support(dirs)
    i_lo, i_hi = int(np.argmin(sup)), int(np.argmax(sup))
    ok = bool(sup[i_lo] >= 1.0 - tolerance and sup[i_hi] <= body.n + tolerance)
    return NormalizationCheck(ok, float(sup[i_lo]), float(sup[i_hi]),
                              tuple(dirs[i_lo]), tuple(dirs[i_hi]))


@dataclasses.dataclass
class GeometryReport:
    """Per-section measurements for the geometry experiment CSV."""

    family: str
    h: float
    volume: float
    ratio: float
    inner_r: float
    outer_r: float

    def csv_row(self):
        return [self.family, self.h, self.volume, self.ratio, self.inner_r, self.outer_r]


def section_volume_scaling(potential, x0, heights, angular_resolution=512):
    """Rows (h, |S|, |S| / h^{n/2}) across heights, plus the ratio band.

    The ratio column must stay inside one interval; ``band_ratio`` is its
    max/min and is asserted <= 10 for the built-in families by callers.
    """
    rows = []
    n = potential.n
    for h in heights:
        poly = extract_section(SectionSpec(potential, x0, float(h)), angular_resolution)
        vol = poly.volume()
        rows.append((float(h), vol, vol / float(h) ** (n / 2.0)))
    ratios = np.array([r[2] for r in rows])
    return rows, float(ratios.max() / ratios.min())


@dataclasses.dataclass(frozen=True)
class BallInclusionResult:
    required_radius: float
    measured_inradius: float
    passed: bool
    constant: float


def ball_inclusion_check(potential, x0, h, t, alpha, angular_resolution=1024):
    """Inscribed-ball check: inradius of S(x0, t) >= c t^{1/(1+alpha)}.

    The constant c is calibrated at the largest admissible inner height
    t_max = h/2 and held fixed for the given t <= h/2.
    """
    if t > h / 2.0 + 1e-15:
        raise ValueError("ball inclusion requires t <= h/2")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    alpha = min(alpha, 1e6)
    expo = 1.0 / (1.0 + alpha)
    t_max = h / 2.0
    cal = extract_section(SectionSpec(potential, x0, t_max), angular_resolution)
    c = cal.inradius_about(x0) / t_max ** expo
    poly = extract_section(SectionSpec(potential, x0, float(t)), angular_resolution)
    inr = poly.inradius_about(x0)
    req = c * float(t) ** expo
    return BallInclusionResult(req, inr, bool(inr >= req * (1.0 - 1e-9)), c)
