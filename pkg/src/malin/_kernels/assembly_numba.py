"""Numba-jitted P1 assembly kernel (hot path)."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _assemble_p1_impl(nodes, simplices, phi_c, b_c, big_b_c, flux_c, f_c, reaction_c):
    M, dp1 = simplices.shape
    d = nodes.shape[1]
    bary = 1.0 / dp1
    nnz = M * dp1 * dp1
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    load = np.zeros(len(nodes))
    E = np.empty((d, d))
    Einv = np.empty((d, d))
    grads = np.empty((dp1, d))
    k = 0
    for m in range(M):
        for i in range(d):
            for j in range(d):
                E[i, j] = nodes[simplices[m, i + 1], j] - nodes[simplices[m, 0], j]
        if d == 2:
            det = E[0, 0] * E[1, 1] - E[0, 1] * E[1, 0]
            vol = abs(det) / 2.0
            Einv[0, 0] = E[1, 1] / det
            Einv[0, 1] = -E[0, 1] / det
            Einv[1, 0] = -E[1, 0] / det
            Einv[1, 1] = E[0, 0] / det
        else:
            det = (E[0, 0] * (E[1, 1] * E[2, 2] - E[1, 2] * E[2, 1])
                   - E[0, 1] * (E[1, 0] * E[2, 2] - E[1, 2] * E[2, 0])
                   + E[0, 2] * (E[1, 0] * E[2, 1] - E[1, 1] * E[2, 0]))
            vol = abs(det) / 6.0
            Einv[0, 0] = (E[1, 1] * E[2, 2] - E[1, 2] * E[2, 1]) / det
            Einv[0, 1] = (E[0, 2] * E[2, 1] - E[0, 1] * E[2, 2]) / det
            Einv[0, 2] = (E[0, 1] * E[1, 2] - E[0, 2] * E[1, 1]) / det
            Einv[1, 0] = (E[1, 2] * E[2, 0] - E[1, 0] * E[2, 2]) / det
            Einv[1, 1] = (E[0, 0] * E[2, 2] - E[0, 2] * E[2, 0]) / det
            Einv[1, 2] = (E[0, 2] * E[1, 0] - E[0, 0] * E[1, 2]) / det
            Einv[2, 0] = (E[1, 0] * E[2, 1] - E[1, 1] * E[2, 0]) / det
            Einv[2, 1] = (E[0, 1] * E[2, 0] - E[0, 0] * E[2, 1]) / det
            Einv[2, 2] = (E[0, 0] * E[1, 1] - E[0, 1] * E[1, 0]) / det
        for j in range(d):
            grads[0, j] = 0.0
        for i in range(d):
            for j in range(d):
                grads[i + 1, j] = Einv[i, j]
                grads[0, j] -= Einv[i, j]
        for i in range(dp1):
            drift_bigb = 0.0
            flux_i = 0.0
            for a in range(d):
                drift_bigb += big_b_c[m, a] * grads[i, a]
                flux_i += flux_c[m, a] * grads[i, a]
            load[simplices[m, i]] += vol * (flux_i + bary * f_c[m])
            for j in range(dp1):
                diff = 0.0
                for a in range(d):
                    pg = 0.0
                    for bb in range(d):
                        pg += phi_c[m, a, bb] * grads[j, bb]
                    diff += grads[i, a] * pg
                drift_b = 0.0
                for a in range(d):
                    drift_b += b_c[m, a] * grads[j, a]
                val = vol * (diff + bary * (drift_b + drift_bigb)
                             + bary * bary * reaction_c[m])
                rows[k] = simplices[m, i]
                cols[k] = simplices[m, j]
                vals[k] = val
                k += 1
    return rows, cols, vals, load


def assemble_p1(nodes, simplices, phi_c, b_c, big_b_c, flux_c, f_c, reaction_c):
    return _assemble_p1_impl(np.ascontiguousarray(nodes, dtype=np.float64),
                             np.ascontiguousarray(simplices, dtype=np.int64),
                             np.ascontiguousarray(phi_c, dtype=np.float64),
                             np.ascontiguousarray(b_c, dtype=np.float64),
                             np.ascontiguousarray(big_b_c, dtype=np.float64),
                             np.ascontiguousarray(flux_c, dtype=np.float64),
                             np.ascontiguousarray(f_c, dtype=np.float64),
                             np.ascontiguousarray(reaction_c, dtype=np.float64))
