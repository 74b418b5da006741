"""Numpy implementations of the hot loops, used when the extension is absent."""

from __future__ import annotations

import numpy as np

_SCAN_CHUNK = 256


def breakpoint_scan(eta, nu, weight, c, lambdas, tol):
    """Aggregate the threshold family at each multiplier in ``lambdas``.

    Returns a ``(4, len(lambdas))`` array whose rows are, per multiplier:
    the disparity contributed by strictly accepted units, their risk gain
    ``sum w * (c - eta)``, and the disparity available from boundary units
    with positive and with negative correction.
    """
    eta = np.asarray(eta, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    wn = weight * nu
    wg = weight * (c - eta)
    out = np.zeros((4, lambdas.size))
    for start in range(0, lambdas.size, _SCAN_CHUNK):
        lam = lambdas[start:start + _SCAN_CHUNK, None]
        h = eta[None, :] - c - lam * nu[None, :]
        acc = h > tol
        bnd = ~acc & (h >= -tol)
        sl = slice(start, start + lam.shape[0])
        out[0, sl] = (acc * wn).sum(axis=1)
        out[1, sl] = (acc * wg).sum(axis=1)
        out[2, sl] = ((bnd & (nu > 0)) * wn).sum(axis=1)
        out[3, sl] = ((bnd & (nu < 0)) * wn).sum(axis=1)
    return out


def _corners(n):
    idx = np.arange(2 ** n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.float64)


def edge_search(gain, slope, lo, hi):
    """Minimise ``gain @ f`` over ``lo <= slope @ f <= hi`` on the cube's edges.

    Every vertex of the feasible polytope has at most one fractional
    coordinate, so scanning each edge (one free coordinate, the rest at a
    corner) and solving the 1-D problem exactly finds the optimum. Ties are
    broken by the lexicographically smallest vector. Returns ``None`` when
    nothing is feasible, else ``(value, vector)``.
    """
    gain = np.asarray(gain, dtype=np.float64)
    slope = np.asarray(slope, dtype=np.float64)
    n = gain.size
    corners = _corners(n)
    full_gain = corners @ gain
    full_dm = corners @ slope
    values, vectors = [], []
    for i in range(n):
        free = corners[:, i] == 0
        base_g = full_gain[free]
        base_d = full_dm[free]
        if slope[i] == 0.0:
            ok = (base_d >= lo) & (base_d <= hi)
            t = np.full(base_d.shape, 0.0 if gain[i] >= 0 else 1.0)
        else:
            t1 = (lo - base_d) / slope[i]
            t2 = (hi - base_d) / slope[i]
            tl = np.maximum(np.minimum(t1, t2), 0.0)
            th = np.minimum(np.maximum(t1, t2), 1.0)
            ok = tl <= th + 1e-15
            th = np.maximum(th, tl)
            t = tl if gain[i] >= 0 else th
        vec = corners[free][ok]
        vec[:, i] = t[ok]
        values.append(base_g[ok] + gain[i] * t[ok])
        vectors.append(vec)
    values = np.concatenate(values) if values else np.empty(0)
    if values.size == 0:
        return None
    vectors = np.concatenate(vectors)
    best = values.min()
    near = np.flatnonzero(values <= best + 1e-15)
    # lexicographic tie-break on the candidate vectors
    order = np.lexsort(vectors[near].T[::-1])
    pick = near[order[0]]
    return float(values[pick]), vectors[pick].copy()
