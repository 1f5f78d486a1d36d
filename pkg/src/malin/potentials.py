"""Convex potential families with exact derivatives and pinch diagnostics.

Every family evaluates its value, gradient, and Hessian in closed form
(vectorized over point arrays of shape ``(m, n)``), so no derivative noise
enters downstream measurements. The Hessian-determinant pinch of each
family is declared at construction and can be re-checked empirically on a
sampling grid.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ConvexityError, DomainError, PinchViolation

FAMILIES = ("Quadratic", "AnisotropicQuadratic", "PerturbedQuadratic", "RadialPower")


@dataclasses.dataclass(frozen=True)
class PinchBounds:
    """Interval [lambda_, Lambda] containing det D2(potential) on the domain."""

    lambda_: float
    Lambda: float

    def __post_init__(self):
        if not (0.0 < self.lambda_ <= self.Lambda):
            raise ValueError(f"invalid pinch bounds ({self.lambda_}, {self.Lambda})")


def _as_points(x, n):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != n:
        raise ValueError(f"expected points of dimension {n}, got shape {x.shape}")
    return x


class Potential:
    """Base class: a convex function with closed-form derivatives.

    Subclasses fill in ``_value``, ``_gradient``, ``_hessian`` (vectorized)
    and the admissible domain. ``eval`` is the checked single-point entry.
    """

    n: int
    label: str
    pinch: PinchBounds
    domain_box: np.ndarray  # (n, 2) admissible box
    min_radius: float = 0.0  # excluded ball about the origin, if any

    def _value(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def _gradient(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def _hessian(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def value(self, x):
        return self._value(_as_points(x, self.n))

    def gradient(self, x):
        return self._gradient(_as_points(x, self.n))

    def hessian(self, x):
        return self._hessian(_as_points(x, self.n))

    def admissible(self, x):
        """Boolean mask of points inside the admissible domain."""
        x = _as_points(x, self.n)
        ok = np.all((x >= self.domain_box[:, 0]) & (x <= self.domain_box[:, 1]), axis=1)
        if self.min_radius > 0.0:
            ok &= np.linalg.norm(x, axis=1) >= self.min_radius
        return ok

    def eval(self, x):
        """Value, gradient, and Hessian at a single admissible point."""
        x = _as_points(x, self.n)
        if x.shape[0] != 1:
            raise ValueError("eval takes a single point; use value/gradient/hessian for batches")
        if not self.admissible(x)[0]:
            raise DomainError(f"point {x[0].tolist()} outside admissible domain of {self.label!r}")
        return float(self._value(x)[0]), self._gradient(x)[0], self._hessian(x)[0]

    def spec(self):
        """Config-facing description (family, params, n, label)."""
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} n={self.n} label={self.label!r}>"


class Quadratic(Potential):
    """phi(x) = |x|^2 / 2; Hessian is the identity, determinant 1."""

    def __init__(self, n=2, label="quadratic", box_halfwidth=8.0):
        self.n = int(n)
        self.label = label
        self.pinch = PinchBounds(1.0, 1.0)
        self.domain_box = np.array([[-box_halfwidth, box_halfwidth]] * self.n)

    def _value(self, x):
        return 0.5 * np.einsum("ij,ij->i", x, x)

    def _gradient(self, x):
        return x.copy()

    def _hessian(self, x):
        return np.broadcast_to(np.eye(self.n), (x.shape[0], self.n, self.n)).copy()

    def spec(self):
        return {"family": "Quadratic", "params": {}, "n": self.n, "label": self.label}


class AnisotropicQuadratic(Potential):
    """phi(x) = sum_i a_i x_i^2 / 2 with fixed positive axis weights."""

    def __init__(self, a, n=None, label="aniso", box_halfwidth=8.0):
        self.a = np.asarray(a, dtype=float)
        if np.any(self.a <= 0):
            raise ValueError("axis weights must be positive")
        self.n = int(n) if n is not None else len(self.a)
        if len(self.a) != self.n:
            raise ValueError("axis weight count must match dimension")
        self.label = label
        det = float(np.prod(self.a))
        self.pinch = PinchBounds(det, det)
        self.domain_box = np.array([[-box_halfwidth, box_halfwidth]] * self.n)

    def _value(self, x):
        return 0.5 * np.einsum("ij,j,ij->i", x, self.a, x)

    def _gradient(self, x):
        return x * self.a

    def _hessian(self, x):
        return np.broadcast_to(np.diag(self.a), (x.shape[0], self.n, self.n)).copy()

    def spec(self):
        return {"family": "AnisotropicQuadratic", "params": {"a": self.a.tolist()},
                "n": self.n, "label": self.label}


class PerturbedQuadratic(Potential):
    """phi(x) = |x|^2/2 + delta * prod_i sin(k_i x_i).

    The perturbation keeps the Hessian within Gershgorin radius
    r_i = delta * k_i * sum_j k_j of the identity row-wise, so the declared
    pinch is [(1-r)^n, (1+r)^n] with r = max_i r_i; construction rejects
    amplitudes with r > 0.9 and re-checks convexity by dense sampling.
    """

    def __init__(self, delta, freq, n=None, label="perturbed", box_halfwidth=3.0,
                 validate=True):
        self.delta = float(delta)
        self.freq = np.asarray(freq, dtype=float)
        self.n = int(n) if n is not None else len(self.freq)
        if len(self.freq) != self.n:
            raise ValueError("frequency vector length must match dimension")
        self.label = label
        r = abs(self.delta) * float(np.max(np.abs(self.freq)) * np.sum(np.abs(self.freq)))
        if r > 0.9:
            raise ConvexityError(
                f"perturbation amplitude {self.delta} with frequencies {self.freq.tolist()} "
                f"gives Gershgorin radius {r:.3f} > 0.9; potential may be nonconvex")
        self.pinch = PinchBounds(max((1.0 - r) ** self.n, 1e-12), (1.0 + r) ** self.n)
        self.domain_box = np.array([[-box_halfwidth, box_halfwidth]] * self.n)
        if validate and self.delta != 0.0:
            check_determinant_pinch(self, resolution=40)

    def _trig(self, x):
        s = np.sin(self.freq * x)
        c = np.cos(self.freq * x)
        return s, c

    def _value(self, x):
        s, _ = self._trig(x)
        return 0.5 * np.einsum("ij,ij->i", x, x) + self.delta * np.prod(s, axis=1)

    def _gradient(self, x):
        s, c = self._trig(x)
        g = x.copy()
        for i in range(self.n):
            others = np.prod(np.delete(s, i, axis=1), axis=1)
            g[:, i] += self.delta * self.freq[i] * c[:, i] * others
        return g

    def _hessian(self, x):
        s, c = self._trig(x)
        m = x.shape[0]
        H = np.broadcast_to(np.eye(self.n), (m, self.n, self.n)).copy()
        prod_s = np.prod(s, axis=1)
        for i in range(self.n):
            H[:, i, i] += -self.delta * self.freq[i] ** 2 * prod_s
            for j in range(i + 1, self.n):
                keep = [k for k in range(self.n) if k not in (i, j)]
                rest = np.prod(s[:, keep], axis=1) if keep else 1.0
                off = self.delta * self.freq[i] * self.freq[j] * c[:, i] * c[:, j] * rest
                H[:, i, j] += off
                H[:, j, i] += off
        return H

    def spec(self):
        return {"family": "PerturbedQuadratic",
                "params": {"delta": self.delta, "freq": self.freq.tolist()},
                "n": self.n, "label": self.label}


class RadialPower(Potential):
    """phi(x) = |x|^p / p with p > 1, admissible on an annulus.

    det D2 phi = (p-1) |x|^{n(p-2)}; the determinant degenerates at the
    origin for p != 2, so the admissible domain excludes a ball.
    """

    def __init__(self, p, n=2, label="radialpow", box_halfwidth=6.0, min_radius=0.25):
        self.p = float(p)
        if self.p <= 1.0:
            raise ValueError("exponent must exceed 1")
        self.n = int(n)
        self.label = label
        self.min_radius = float(min_radius)
        self.domain_box = np.array([[-box_halfwidth, box_halfwidth]] * self.n)
        rmax = box_halfwidth * np.sqrt(self.n)
        dets = [(self.p - 1.0) * r ** (self.n * (self.p - 2.0)) for r in (self.min_radius, rmax)]
        self.pinch = PinchBounds(min(dets), max(dets))

    def _r(self, x):
        return np.maximum(np.linalg.norm(x, axis=1), 1e-300)

    def _value(self, x):
        return self._r(x) ** self.p / self.p

    def _gradient(self, x):
        return self._r(x)[:, None] ** (self.p - 2.0) * x

    def _hessian(self, x):
        r = self._r(x)
        m = x.shape[0]
        eye = np.broadcast_to(np.eye(self.n), (m, self.n, self.n))
        xx = np.einsum("ij,ik->ijk", x, x)
        return (r ** (self.p - 2.0))[:, None, None] * eye \
            + ((self.p - 2.0) * r ** (self.p - 4.0))[:, None, None] * xx

    def spec(self):
        return {"family": "RadialPower", "params": {"p": self.p, "min_radius": self.min_radius},
                "n": self.n, "label": self.label}


def make_potential(family, params=None, n=2, label=None):
    """Build a potential from its config-facing description."""
    params = dict(params or {})
    label = label or family.lower()
    if family == "Quadratic":
        return Quadratic(n=n, label=label, **params)
    if family == "AnisotropicQuadratic":
        return AnisotropicQuadratic(n=n, label=label, **params)
    if family == "PerturbedQuadratic":
        return PerturbedQuadratic(n=n, label=label, **params)
    if family == "RadialPower":
        return RadialPower(n=n, label=label, **params)
    raise ValueError(f"unknown potential family {family!r}; choose from {FAMILIES}")


def cofactor(H):
    """Adjugate of symmetric 2x2 or 3x3 matrices, batched over leading axes.

    Equals det(H) * inv(H) for invertible H but is defined by the cofactor
    formula, hence total on singular input.
    """
    H = np.asarray(H, dtype=float)
    single = H.ndim == 2
    if single:
        H = H[None]
    n = H.shape[-1]
    out = np.empty_like(H)
    if n == 2:
        out[..., 0, 0] = H[..., 1, 1]
        out[..., 1, 1] = H[..., 0, 0]
        out[..., 0, 1] = -H[..., 0, 1]
        out[..., 1, 0] = -H[..., 1, 0]
    elif n == 3:
        for i in range(3):
            for j in range(3):
                r = [k for k in range(3) if k != j]
                c = [k for k in range(3) if k != i]
                minor = (H[..., r[0], c[0]] * H[..., r[1], c[1]]
                         - H[..., r[0], c[1]] * H[..., r[1], c[0]])
                out[..., i, j] = (-1.0) ** (i + j) * minor
    else:
        raise ValueError("cofactor supports dimensions 2 and 3 only")
    return out[0] if single else out


class CofactorField:
    """Matrix field Phi(x) = adj(D2 phi(x)): the diffusion coefficient."""

    def __init__(self, potential):
        self.potential = potential
        self.n = potential.n

    def __call__(self, x):
        return cofactor(self.potential.hessian(x))

    def __repr__(self):
        return f"<CofactorField of {self.potential.label!r}>"


def check_determinant_pinch(potential, sample_box=None, resolution=50):
    """Min/max of det D2 phi over a sampling grid, validated against the declaration.

    Raises ConvexityError (naming the point) if any sampled Hessian is not
    positive definite, and PinchViolation if the measured range leaves the
    declared interval by more than 1e-8 relative.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2 per axis")
    box = np.asarray(sample_box, dtype=float) if sample_box is not None else potential.domain_box
    axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, potential.n)
    if potential.min_radius > 0.0:
        grid = grid[np.linalg.norm(grid, axis=1) >= potential.min_radius]
    H = potential.hessian(grid)
    dets = np.linalg.det(H)
    # positive definiteness via leading principal minors (n <= 3)
    lead1 = H[:, 0, 0]
    lead2 = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
    pd = (lead1 > 0) & (lead2 > 0)
    if potential.n == 3:
        pd &= dets > 0
    if not np.all(pd):
        bad = grid[~pd][0]
        raise ConvexityError(
            f"non-positive-definite Hessian of {potential.label!r} at {bad.tolist()}", bad)
    lo, hi = float(dets.min()), float(dets.max())
    decl = potential.pinch
    slack = 1e-8
    if lo < decl.lambda_ * (1.0 - slack) - slack or hi > decl.Lambda * (1.0 + slack) + slack:
        raise PinchViolation(
            f"measured det range [{lo}, {hi}] outside declared "
            f"[{decl.lambda_}, {decl.Lambda}] for {potential.label!r}")
    return PinchBounds(lo, hi)


def divergence_free_residual(field, x, fd_step=1e-4):
    """Column divergence (sum_i d_i Phi^{ij})_j by central differences.

    O(fd_step^2) for C^3 potentials; identically zero for constant fields.
    """
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    n = field.n
    res = np.zeros(n)
    for i in range(n):
        xp, xm = x.copy(), x.copy()
        xp[i] += fd_step
        xm[i] -= fd_step
        dPhi = (field(xp[None]) - field(xm[None]))[0] / (2.0 * fd_step)
        res += dPhi[i, :]
    return res


def hessian_norm(potential, x):
    """Frobenius norm of D2 phi, the fixed convention for integrability scans."""
    H = potential.hessian(x)
    return np.sqrt(np.einsum("ijk,ijk->i", H, H))


def estimate_hessian_integrability(potential, section, exponents, resolution=100):
    """Integrals of ||D2 phi||_F^{1+eps} over a section on two nested grids.

    Midpoint indicator quadrature over the section's bounding box at
    ``resolution`` and ``2 * resolution`` cells per axis. Returns a list of
    rows ``(eps, integral, stable)`` where ``stable`` flags agreement of the
    two grids within 2 percent; non-finite samples mark the exponent as
    divergent (integral = inf, stable = False).

    Works for n = 2 and n = 3: this is the diagnostic for the hypothesis
    thresholds 1 + eps > n/2 and 1 + eps > n(n-1)/2 in higher dimensions.
    """
    if np.any(np.asarray(exponents) < 0):
        raise ValueError("exponents must be nonnegative")
    x0 = np.asarray(section.x0, dtype=float)
    pot = section.potential
    lin0 = pot.value(x0[None])[0]
    grad0 = pot.gradient(x0[None])[0]

    def member(pts):
        return pot.value(pts) - lin0 - (pts - x0) @ grad0 < section.h

    bbox = section_bbox(section)
    results = []
    vals_by_res = {}
    for res in (resolution, 2 * resolution):
        axes = [np.linspace(lo, hi, res, endpoint=False) + (hi - lo) / (2 * res)
                for lo, hi in bbox]
        cellvol = float(np.prod([(hi - lo) / res for lo, hi in bbox]))
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, potential.n)
        inside = member(pts) & pot.admissible(pts)
        norms = hessian_norm(potential, pts[inside])
        vals_by_res[res] = (norms, cellvol)
    for eps in exponents:
        vals = []
        finite = True
        for res in (resolution, 2 * resolution):
            norms, cellvol = vals_by_res[res]
            with np.errstate(over="ignore"):
                integrand = norms ** (1.0 + eps)
            if not np.all(np.isfinite(integrand)):
                finite = False
                break
            vals.append(float(integrand.sum() * cellvol))
        if not finite:
            results.append((float(eps), float("inf"), False))
        else:
            rel = abs(vals[1] - vals[0]) / max(abs(vals[1]), 1e-300)
            results.append((float(eps), vals[1], bool(rel < 0.02)))
    return results


def section_bbox(section):
    """Axis-aligned bounding box of a section by coordinate ray probes."""
    from .geometry import extract_section  # local import to avoid a cycle

    res = 64 if section.potential.n == 2 else 256
    poly = extract_section(section, angular_resolution=res)
    lo = poly.vertices.min(axis=0)
    hi = poly.vertices.max(axis=0)
    pad = 0.02 * (hi - lo)
    return np.column_stack([lo - pad, hi + pad])
