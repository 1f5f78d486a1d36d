import numpy as np
import pytest

from malin import _kernels
from malin._kernels import assembly_numpy
from malin.geometry import SectionSpec, extract_section
from malin.meshing import triangulate


def _coefficients(mesh, seed=0):
    r = np.random.default_rng(seed)
    M = len(mesh.simplices)
    A = r.normal(size=(M, 2, 2))
    phi = np.einsum("mij,mkj->mik", A, A) + 2.0 * np.eye(2)  # SPD
    return (phi, r.normal(size=(M, 2)), r.normal(size=(M, 2)),
            r.normal(size=(M, 2)), r.normal(size=M), r.normal(size=M))


@pytest.fixture(scope="module")
def mesh(quadratic):
    poly = extract_section(SectionSpec(quadratic, (0.0, 0.0), 0.5), 64)
    return triangulate(poly, 0.15)


def test_backends_agree(mesh):
    phi, b, B, F, f, c = _coefficients(mesh)
    args = (mesh.nodes, mesh.simplices, phi, b, B, F, f, c)
    rows_np, cols_np, vals_np, load_np = assembly_numpy.assemble_p1(*args)
    try:
        from malin._kernels import assembly_numba
    except Exception:
        pytest.skip("numba unavailable")
    rows_nb, cols_nb, vals_nb, load_nb = assembly_numba.assemble_p1(*args)
    # same sparsity assembled in the same element order
    np.testing.assert_array_equal(rows_np, rows_nb)
    np.testing.assert_array_equal(cols_np, cols_nb)
    scale = np.abs(vals_np).max()
    np.testing.assert_allclose(vals_nb, vals_np, atol=1e-13 * scale)
    np.testing.assert_allclose(load_nb, load_np, atol=1e-13 * max(np.abs(load_np).max(), 1))


def test_env_flag_selects_backend(monkeypatch):
    monkeypatch.setenv("MALIN_KERNELS", "numpy")
    assert _kernels._resolve("numpy") == "numpy"
    old = _kernels.backend()
    try:
        assert _kernels.set_backend("numpy") == "numpy"
        assert _kernels.backend() == "numpy"
        assert _kernels.set_backend("auto") in ("numba", "numpy")
    finally:
        _kernels.set_backend("auto" if old is None else old)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        _kernels.set_backend("fortran")


def test_gradients_sum_to_zero(mesh):
    grads, vol = assembly_numpy.element_gradients(mesh.nodes, mesh.simplices)
    np.testing.assert_allclose(grads.sum(axis=1), 0.0, atol=1e-12)
    assert vol.sum() == pytest.approx(mesh.areas().sum(), rel=1e-12)
