"""P1 finite-element solver for the divergence-form equation on sections.

Discretizes the weak form

    a(u, v) = int Phi Du . Dv + int u B . Dv + int (b . Du) v
    l(v)    = int F . Dv + int f v

with piecewise-linear elements and one-point (centroid) quadrature;
Dirichlet data enters through identity rows. Drift terms make the system
nonsymmetric; systems are solved by sparse LU below a size threshold and
by preconditioned GMRES above it.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from . import _kernels
from .errors import (AssemblyError, ConditioningError, ContractError, PecletWarning,
                     SolverConvergenceError)
from .fields import DivBCertificate

DIRECT_LIMIT = 200_000
CONDITION_LIMIT = 1e12
PECLET_THRESHOLD = 2.0


@dataclasses.dataclass
class ProblemData:
    """Coefficient bundle for one instance of the equation on a section."""

    cofactor: object                 # (m,) points -> (m, n, n) SPD matrices
    drift_b: object                  # points -> (m, n)
    drift_B: object                  # points -> (m, n)
    flux_F: object                   # points -> (m, n)
    source_f: object                 # points -> (m,)
    boundary_g: object               # points -> (m,)
    divB_certificate: DivBCertificate = DivBCertificate("unknown")
    div_B: object = None             # exact div B when available


@dataclasses.dataclass
class DiscreteField:
    mesh: object
    values: np.ndarray
    order: int = 1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) != len(self.mesh.nodes):
            raise ContractError("nodal value count must match node count")


@dataclasses.dataclass
class SolveResult:
    solution: DiscreteField
    residual: float
    weak_residual_sample: float
    iterations: int
    method: str
    peclet: float
    system: tuple  # (csr matrix, rhs) kept for residual diagnostics

    def to_snapshot(self, config_hash=""):
        return {"values": self.solution.values.tolist(),
                "mesh_hash": self.solution.mesh.mesh_hash(),
                "config_hash": config_hash,
                "residual": self.residual, "method": self.method}


def _eval_coefficients(mesh, data):
    cents = mesh.centroids()
    phi = np.asarray(data.cofactor(cents), dtype=float)
    b = np.asarray(data.drift_b(cents), dtype=float)
    B = np.asarray(data.drift_B(cents), dtype=float)
    F = np.asarray(data.flux_F(cents), dtype=float)
    f = np.asarray(data.source_f(cents), dtype=float)
    for name, arr in (("Phi", phi), ("b", b), ("B", B), ("F", F), ("f", f)):
        bad = ~np.isfinite(arr).reshape(len(cents), -1).all(axis=1)
        if bad.any():
            j = int(np.nonzero(bad)[0][0])
            raise AssemblyError(f"non-finite {name} sample on simplex {j} "
                                f"at centroid {cents[j].tolist()}")
    return cents, phi, b, B, F, f


def _element_peclet(mesh, phi, b, B):
    drift = np.linalg.norm(b - B, axis=1)
    tr = np.trace(phi, axis1=1, axis2=2)
    det = np.linalg.det(phi)
    disc = np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))
    lam_min = np.maximum(0.5 * (tr - disc), 1e-300)
    p = mesh.nodes[mesh.simplices]
    hel = np.maximum.reduce([np.linalg.norm(p[:, i] - p[:, j], axis=1)
                             for i, j in ((0, 1), (1, 2), (2, 0))])
    return float(np.max(drift * hel / (2.0 * lam_min)))


def assemble(mesh, data, form="divergence"):
    """System matrix and load vector; boundary rows are identity with load g.

    ``form="nondivergence"`` assembles the rewritten operator
    -Phi^{ij} D_ij u + (b - B) . Du - (div B) u instead, which must agree
    with the divergence form up to discretization error for smooth B.
    """
    cents, phi, b, B, F, f = _eval_coefficients(mesh, data)
    M = len(mesh.simplices)
    if form == "divergence":
        reaction = np.zeros(M)
        b_eff, B_eff = b, B
    elif form == "nondivergence":
        if data.div_B is None:
            raise ContractError("nondivergence form needs an exact div B field")
        reaction = -np.asarray(data.div_B(cents), dtype=float)
        b_eff, B_eff = b - B, np.zeros_like(B)
    else:
        raise ValueError(f"unknown form {form!r}")

    rows, cols, vals, load = _kernels.assemble_p1(
        mesh.nodes, mesh.simplices, phi, b_eff, B_eff, F, f, reaction)

    interior = ~mesh.boundary
    keep = interior[rows]
    bidx = np.nonzero(mesh.boundary)[0]
    rows = np.concatenate([rows[keep], bidx])
    cols = np.concatenate([cols[keep], bidx])
    vals = np.concatenate([vals[keep], np.ones(len(bidx))])
    N = len(mesh.nodes)
    A = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()

    rhs = np.where(interior, load, 0.0)
    rhs[bidx] = np.asarray(data.boundary_g(mesh.nodes[bidx]), dtype=float)
    peclet = _element_peclet(mesh, phi, b, B)
    if peclet > PECLET_THRESHOLD:
        warnings.warn(f"element Peclet {peclet:.2f} > {PECLET_THRESHOLD}; "
                      "drift may be under-resolved", PecletWarning, stacklevel=2)
    return A, rhs, peclet


def _condition_screen(A, lu=None):
    """Cheap conditioning proxy, escalating to a 1-norm estimate if suspicious."""
    diag = np.abs(A.diagonal())
    if diag.min() <= 0:
        return np.inf
    screen = diag.max() / diag.min()
    if screen <= 1e10 or lu is None:
        return screen
    n = A.shape[0]
    inv_op = spla.LinearOperator((n, n), matvec=lu.solve,
                                 rmatvec=lambda v: lu.solve(v, trans="T"))
    return spla.onenormest(A) * spla.onenormest(inv_op)


class DirichletSolver:
    """Factorized operator for one (mesh, data) pair, reusable across
    boundary seeds: the matrix does not depend on g."""

    def __init__(self, mesh, data, form="divergence", tolerance=1e-10):
        self.mesh = mesh
        self.data = data
        self.tolerance = tolerance
        self.A, self.rhs, self.peclet = assemble(mesh, data, form=form)
        self.direct = self.A.shape[0] <= DIRECT_LIMIT
        if self.direct:
            self.lu = spla.splu(self.A.tocsc())
            cond = _condition_screen(self.A, self.lu)
            if cond > CONDITION_LIMIT:
                raise ConditioningError(
                    f"stiffness condition estimate {cond:.2e} exceeds {CONDITION_LIMIT:.0e}; "
                    "constants from this solve would be unreliable")
        else:
            self.ilu = spla.spilu(self.A.tocsc(), drop_tol=1e-5, fill_factor=20.0)

    def solve(self, boundary_values=None):
        rhs = self.rhs.copy()
        if boundary_values is not None:
            bidx = np.nonzero(self.mesh.boundary)[0]
            rhs[bidx] = boundary_values
        if self.direct:
            x = self.lu.solve(rhs)
            method, iters = "sparse-lu", 1
        else:
            n = self.A.shape[0]
            M = spla.LinearOperator((n, n), matvec=self.ilu.solve)
            count = [0]

            def cb(_):
                count[0] += 1

            x, info = spla.gmres(self.A, rhs, M=M, rtol=self.tolerance / 10.0,
                                 maxiter=2000, callback=cb, callback_type="pr_norm")
            if info != 0:
                res = np.linalg.norm(self.A @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
                raise SolverConvergenceError(f"GMRES stagnated at residual {res:.2e}")
            method, iters = "gmres+ilu", count[0]
        scale = max(np.linalg.norm(rhs), 1e-300)
        residual = float(np.linalg.norm(self.A @ x - rhs) / scale)
        if residual > self.tolerance:
            raise SolverConvergenceError(f"algebraic residual {residual:.2e} above "
                                         f"tolerance {self.tolerance:.2e}")
        interior = ~self.mesh.boundary
        r_int = (self.A @ x - rhs)[interior]
        weak_sample = float(np.linalg.norm(r_int) / scale)
        return SolveResult(DiscreteField(self.mesh, x), residual, weak_sample,
                           iters, method, self.peclet, (self.A, rhs))


def solve_dirichlet(mesh, data, tolerance=1e-10, form="divergence"):
    """Assemble and solve one Dirichlet problem; see DirichletSolver for reuse."""
    return DirichletSolver(mesh, data, form=form, tolerance=tolerance).solve()


@dataclasses.dataclass(frozen=True)
class MaxPrincipleReport:
    ok: bool
    max_violation: float
    min_violation: float
    argmax: int
    argmin: int


def maximum_principle_check(result, data, rel_tol=1e-8):
    """Extrema of a homogeneous solution must sit on the boundary.

    Preconditions (checked): f and F vanish, div B certified nonpositive.
    """
    mesh = result.solution.mesh
    cents = mesh.centroids()
    if np.max(np.abs(data.source_f(cents))) > 1e-14 or \
       np.max(np.abs(data.flux_F(cents))) > 1e-14:
        raise ContractError("maximum principle check requires f = 0 and F = 0")
    if not data.divB_certificate.nonpositive:
        raise ContractError("maximum principle check requires a div B <= 0 certificate")
    u = result.solution.values
    rng = max(u.max() - u.min(), 1e-300)
    tol = rel_tol * rng
    bmax, bmin = u[mesh.boundary].max(), u[mesh.boundary].min()
    over = u.max() - bmax
    under = bmin - u.min()
    i_max, i_min = int(np.argmax(u)), int(np.argmin(u))
    return MaxPrincipleReport(bool(over <= tol and under <= tol),
                              float(max(over, 0.0)), float(max(under, 0.0)),
                              i_max, i_min)


def weak_residual(result, data, test_field):
    """a(u, v) - l(v) for a test field vanishing on the boundary."""
    mesh = result.solution.mesh
    v = np.asarray(test_field.values if isinstance(test_field, DiscreteField)
                   else test_field, dtype=float)
    vmax = max(np.abs(v).max(), 1e-300)
    if np.abs(v[mesh.boundary]).max() > 1e-12 * vmax:
        raise ContractError("test field must vanish on boundary nodes")
    A, rhs = result.system
    return float(v @ (A @ result.solution.values - rhs))


# ---------------------------------------------------------------------------
# quadrature and interpolation utilities shared by the estimate harness
# ---------------------------------------------------------------------------

def centroid_values(mesh, nodal):
    return np.asarray(nodal, dtype=float)[mesh.simplices].mean(axis=1)


def integrate(mesh, centroid_vals, triangle_mask=None):
    areas = mesh.areas()
    if triangle_mask is not None:
        return float(np.sum(areas[triangle_mask] * centroid_vals[triangle_mask]))
    return float(np.sum(areas * centroid_vals))


def lp_norm(mesh, nodal, p, triangle_mask=None):
    """L^p norm by centroid quadrature, max-normalized for large p stability."""
    vals = np.abs(centroid_values(mesh, nodal))
    areas = mesh.areas()
    if triangle_mask is not None:
        vals, areas = vals[triangle_mask], areas[triangle_mask]
    if len(vals) == 0:
        return 0.0
    m = vals.max()
    if m == 0.0:
        return 0.0
    return float(m * np.sum(areas * (vals / m) ** p) ** (1.0 / p))


def linf_quadrature(mesh, nodal, triangle_mask=None):
    """Max of centroid values: the L^infinity partner of lp_norm."""
    vals = np.abs(centroid_values(mesh, nodal))
    if triangle_mask is not None:
        vals = vals[triangle_mask]
    return float(vals.max()) if len(vals) else 0.0


def gradient_energy(mesh, phi_at_centroids, nodal):
    """int Phi Dv . Dv by centroid quadrature (the Sobolev energy)."""
    from ._kernels.assembly_numpy import element_gradients

    grads, vol = element_gradients(mesh.nodes, mesh.simplices)
    dv = np.einsum("mia,mi->ma", grads, np.asarray(nodal, dtype=float)[mesh.simplices])
    return float(np.sum(vol * np.einsum("ma,mab,mb->m", dv, phi_at_centroids, dv)))


def l2_error(mesh, nodal, exact):
    """L2 distance of a P1 field to a callable, edge-midpoint quadrature."""
    v = np.asarray(nodal, dtype=float)
    p = mesh.nodes[mesh.simplices]
    areas = np.abs(mesh.areas())
    total = 0.0
    for i, j in ((0, 1), (1, 2), (2, 0)):
        mid = 0.5 * (p[:, i] + p[:, j])
        uh = 0.5 * (v[mesh.simplices[:, i]] + v[mesh.simplices[:, j]])
        diff = uh - exact(mid)
        total += np.sum(areas / 3.0 * diff ** 2)
    return float(np.sqrt(total))


def h1_seminorm_error(mesh, nodal, exact_grad):
    from ._kernels.assembly_numpy import element_gradients

    grads, vol = element_gradients(mesh.nodes, mesh.simplices)
    dv = np.einsum("mia,mi->ma", grads, np.asarray(nodal, dtype=float)[mesh.simplices])
    diff = dv - exact_grad(mesh.centroids())
    return float(np.sqrt(np.sum(vol * np.einsum("ma,ma->m", diff, diff))))


class P1Interpolator:
    """Pointwise evaluation of P1 fields by triangle location.

    Candidate triangles come from a KD-tree over centroids; points that
    miss every candidate (boundary roundoff) fall back to the nearest
    triangle with clamped barycentric coordinates.
    """

    def __init__(self, mesh, k=16):
        self.mesh = mesh
        self.tree = cKDTree(mesh.centroids())
        self.k = min(k, len(mesh.simplices))
        verts = mesh.nodes[mesh.simplices]
        self.origin = verts[:, 0]
        E = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]], axis=2)
        self.Einv = np.linalg.inv(E)

    def barycentric(self, tri_idx, points):
        d = points - self.origin[tri_idx]
        lam12 = np.einsum("mij,mj->mi", self.Einv[tri_idx], d)
        lam0 = 1.0 - lam12.sum(axis=1)
        return np.column_stack([lam0, lam12])

    def __call__(self, nodal, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        _, cand = self.tree.query(pts, k=self.k)
        cand = np.atleast_2d(cand)
        best = cand[:, 0].copy()
        best_pen = np.full(len(pts), np.inf)
        for c in range(cand.shape[1]):
            tri = cand[:, c]
            lam = self.barycentric(tri, pts)
            pen = -lam.min(axis=1)
            better = pen < best_pen
            best[better] = tri[better]
            best_pen[better] = pen[better]
        lam = np.clip(self.barycentric(best, pts), 0.0, 1.0)
        lam /= lam.sum(axis=1, keepdims=True)
        vals = np.asarray(nodal, dtype=float)[self.mesh.simplices[best]]
        return np.einsum("mi,mi->m", lam, vals)
