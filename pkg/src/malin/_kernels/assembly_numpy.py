"""Vectorized pure-numpy P1 assembly (reference path)."""

from __future__ import annotations

import numpy as np


def element_gradients(nodes, simplices):
    """Barycentric gradients (M, d+1, d) and simplex measures (M,)."""
    verts = nodes[simplices]                     # (M, d+1, d)
    d = nodes.shape[1]
    E = verts[:, 1:, :] - verts[:, :1, :]        # (M, d, d), rows are edges
    det = np.linalg.det(E)
    vol = np.abs(det) / (1.0 if d == 1 else (2.0 if d == 2 else 6.0))
    Einv = np.linalg.inv(E)                      # (M, d, d)
    # grad lambda_i (i >= 1) is the i-th row of E^{-1}
    grads = np.empty((len(simplices), d + 1, d))
    grads[:, 1:, :] = Einv
    grads[:, 0, :] = -Einv.sum(axis=1)
    return grads, vol


def assemble_p1(nodes, simplices, phi_c, b_c, big_b_c, flux_c, f_c, reaction_c):
    grads, vol = element_gradients(nodes, simplices)
    M, dp1, d = grads.shape
    bary = 1.0 / dp1

    phig = np.einsum("mab,mjb->mja", phi_c, grads)          # (M, d+1, d): Phi grad_j
    diff = np.einsum("mia,mja->mij", grads, phig)           # g_i . Phi g_j
    drift_b = np.einsum("ma,mja->mj", b_c, grads)           # b . g_j (trial index)
    drift_B = np.einsum("ma,mia->mi", big_b_c, grads)       # B . g_i (test index)
    elem = diff + bary * (drift_b[:, None, :] + drift_B[:, :, None]) \
        + (bary * bary) * reaction_c[:, None, None]
    elem = elem * vol[:, None, None]

    rows = np.repeat(simplices, dp1, axis=1).reshape(-1)
    cols = np.tile(simplices, (1, dp1)).reshape(-1)
    vals = elem.reshape(-1)

    load_elem = vol[:, None] * (np.einsum("ma,mia->mi", flux_c, grads)
                                + bary * f_c[:, None])
    load = np.zeros(len(nodes))
    np.add.at(load, simplices.reshape(-1), load_elem.reshape(-1))
    return rows, cols, vals, load
