"""Closed-form coefficient fields and the config expression vocabulary.

Experiment configs describe equation data with a tiny grammar (constants,
affine fields, sinusoids, trig products) so runs stay portable and
hashable. Every expression knows its exact partial derivatives, which is
what makes divergence certificates analytic where possible.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import HypothesisError


class ScalarField:
    """Callable (m, n) -> (m,) with optional exact partials."""

    def __call__(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def partial(self, i):
        """Exact d/dx_i as another ScalarField, or None if not available."""
        return None

    def spec(self):
        raise NotImplementedError


@dataclasses.dataclass
class Constant(ScalarField):
    value: float

    def __call__(self, x):
        return np.full(np.atleast_2d(x).shape[0], float(self.value))

    def partial(self, i):
        return Constant(0.0)

    def spec(self):
        return {"type": "constant", "value": self.value}


@dataclasses.dataclass
class Affine(ScalarField):
    coeffs: tuple
    offset: float = 0.0

    def __call__(self, x):
        return np.atleast_2d(x) @ np.asarray(self.coeffs, dtype=float) + self.offset

    def partial(self, i):
        return Constant(float(self.coeffs[i]))

    def spec(self):
        return {"type": "affine", "coeffs": list(self.coeffs), "offset": self.offset}


@dataclasses.dataclass
class Sinusoid(ScalarField):
    """amplitude * sin(frequency . x + phase) + offset."""

    amplitude: float
    frequency: tuple
    phase: float = 0.0
    offset: float = 0.0

    def __call__(self, x):
        k = np.asarray(self.frequency, dtype=float)
        return self.amplitude * np.sin(np.atleast_2d(x) @ k + self.phase) + self.offset

    def partial(self, i):
        k = np.asarray(self.frequency, dtype=float)
        return Sinusoid(self.amplitude * k[i], tuple(k), self.phase + np.pi / 2.0, 0.0)

    def spec(self):
        return {"type": "sinusoid", "amplitude": self.amplitude,
                "frequency": list(self.frequency), "phase": self.phase, "offset": self.offset}


@dataclasses.dataclass
class TrigProduct(ScalarField):
    """amplitude * prod_i trig_i(k_i x_i) + offset with trig_i in {sin, cos}."""

    amplitude: float
    frequency: tuple
    kinds: tuple
    offset: float = 0.0

    def _factors(self, x):
        x = np.atleast_2d(x)
        out = []
        for i, (k, kind) in enumerate(zip(self.frequency, self.kinds)):
            out.append(np.sin(k * x[:, i]) if kind == "sin" else np.cos(k * x[:, i]))
        return out

    def __call__(self, x):
        vals = self._factors(x)
        prod = np.ones(np.atleast_2d(x).shape[0])
        for v in vals:
            prod = prod * v
        return self.amplitude * prod + self.offset

    def partial(self, i):
        k = self.frequency[i]
        kinds = list(self.kinds)
        if kinds[i] == "sin":
            kinds[i] = "cos"
            amp = self.amplitude * k
        else:
            kinds[i] = "sin"
            amp = -self.amplitude * k
        return TrigProduct(amp, tuple(self.frequency), tuple(kinds), 0.0)

    def spec(self):
        return {"type": "trigprod", "amplitude": self.amplitude,
                "frequency": list(self.frequency), "kinds": list(self.kinds),
                "offset": self.offset}


class VectorField:
    """Callable (m, n) -> (m, n); components are ScalarFields."""

    def __init__(self, components):
        self.components = list(components)
        self.n = len(self.components)

    def __call__(self, x):
        x = np.atleast_2d(x)
        return np.column_stack([c(x) for c in self.components])

    def divergence(self):
        """Exact divergence as a callable, or None when a partial is unknown."""
        parts = [c.partial(i) for i, c in enumerate(self.components)]
        if any(p is None for p in parts):
            return None

        def div(x):
            x = np.atleast_2d(x)
            out = np.zeros(x.shape[0])
            for p in parts:
                out += p(x)
            return out

        return div

    def spec(self):
        return {"components": [c.spec() for c in self.components]}


def zero_vector(n):
    return VectorField([Constant(0.0)] * n)


def constant_vector(v):
    return VectorField([Constant(float(c)) for c in v])


def linear_vector(matrix, offset=None):
    """x -> M x + offset, with exact divergence trace(M)."""
    M = np.asarray(matrix, dtype=float)
    off = np.zeros(M.shape[0]) if offset is None else np.asarray(offset, dtype=float)
    return VectorField([Affine(tuple(M[i]), float(off[i])) for i in range(M.shape[0])])


_SCALAR_TYPES = {"constant", "affine", "sinusoid", "trigprod"}


def parse_scalar(spec, n):
    t = spec.get("type")
    if t == "constant":
        return Constant(float(spec["value"]))
    if t == "affine":
        coeffs = tuple(float(c) for c in spec["coeffs"])
        if len(coeffs) != n:
            raise ValueError(f"affine coeffs length {len(coeffs)} != dimension {n}")
        return Affine(coeffs, float(spec.get("offset", 0.0)))
    if t == "sinusoid":
        return Sinusoid(float(spec["amplitude"]), tuple(spec["frequency"]),
                        float(spec.get("phase", 0.0)), float(spec.get("offset", 0.0)))
    if t == "trigprod":
        return TrigProduct(float(spec["amplitude"]), tuple(spec["frequency"]),
                           tuple(spec.get("kinds", ["sin"] * n)),
                           float(spec.get("offset", 0.0)))
    raise ValueError(f"unknown scalar field type {t!r}; choose from {sorted(_SCALAR_TYPES)}")


def parse_vector(spec, n):
    if spec is None:
        return zero_vector(n)
    if "matrix" in spec:
        return linear_vector(spec["matrix"], spec.get("offset"))
    if "components" in spec:
        comps = [parse_scalar(s, n) for s in spec["components"]]
        if len(comps) != n:
            raise ValueError(f"vector needs {n} components, got {len(comps)}")
        return VectorField(comps)
    if spec.get("type") == "constant":
        return constant_vector(spec["value"])
    raise ValueError("vector field spec needs 'matrix', 'components', or constant 'value'")


@dataclasses.dataclass(frozen=True)
class DivBCertificate:
    """Evidence that div B <= 0: analytic, sampled, or unknown."""

    kind: str  # "analytic-nonpositive" | "sampled-nonpositive" | "unknown"
    tolerance: float = 0.0

    @property
    def nonpositive(self):
        return self.kind in ("analytic-nonpositive", "sampled-nonpositive")


def certify_div_nonpositive(field, sample_points=None, tol=1e-10):
    """Build the div B <= 0 certificate, raising on a detected violation.

    Constant and linear fields certify analytically (divergence constant);
    otherwise the exact divergence is sampled at the given points.
    """
    div = field.divergence()
    if div is None:
        return DivBCertificate("unknown")
    probe = np.zeros((1, field.n)) if sample_points is None else np.atleast_2d(sample_points)
    vals = div(probe)
    if all(isinstance(c, (Constant, Affine)) for c in field.components):
        v = float(vals[0])
        if v > tol:
            raise HypothesisError(f"div B = {v:.3g} > 0 violates the drift hypothesis")
        return DivBCertificate("analytic-nonpositive")
    if vals.max() > tol:
        j = int(np.argmax(vals))
        raise HypothesisError(
            f"sampled div B = {vals.max():.3g} > {tol} at {probe[j].tolist()}")
    return DivBCertificate("sampled-nonpositive", tol)


def fourier_boundary_data(seed, center, base=1.0, amplitude=0.8, modes=4):
    """Random nonnegative boundary pattern: a truncated Fourier series in the
    polar angle about ``center``, normalized so min g >= base - amplitude.
    """
    rng = np.random.default_rng(seed)
    a = rng.normal(size=modes)
    b = rng.normal(size=modes)
    scale = amplitude / max(np.sum(np.hypot(a, b)), 1e-300)
    a, b = a * scale, b * scale
    cx = np.asarray(center, dtype=float)

    def g(x):
        x = np.atleast_2d(x)
        th = np.arctan2(x[:, 1] - cx[1], x[:, 0] - cx[0])
        out = np.full(x.shape[0], float(base))
        for k in range(1, modes + 1):
            out += a[k - 1] * np.cos(k * th) + b[k - 1] * np.sin(k * th)
        return out

    return g
