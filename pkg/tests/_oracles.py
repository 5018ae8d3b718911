"""Independent reference computations used by several test modules."""

from __future__ import annotations

import math

import numpy as np


def psi_vec(u, c1, c2, p):
    u = np.asarray(u, dtype=float)
    au = np.abs(u) ** p
    with np.errstate(invalid="ignore"):
        neg = np.where(u < 0, c1 * au, 0.0) if math.isfinite(c1) else np.where(u < 0, np.inf, 0.0)
        pos = np.where(u > 0, c2 * au, 0.0) if math.isfinite(c2) else np.where(u > 0, np.inf, 0.0)
    return neg + pos


def brute_force_rate(x, c1, c2, p, z, box=5.0, coarse=1e-2, fine=1e-3):
    """Lattice minimum of ``sum psi(u_j)`` over ``sum u_j x_j = z`` inside ``[-box, box]^3``.

    The constraint is used to eliminate the coordinate with the largest
    ``|x_j|``; the remaining two are searched on a coarse lattice and then on a
    fine lattice around the coarse minimiser.
    """
    x = np.asarray(x, dtype=float)
    assert x.size == 3
    j = int(np.argmax(np.abs(x)))
    others = [i for i in range(3) if i != j]

    def search(c0, c1_, half, step):
        g0 = np.arange(c0 - half, c0 + half + step / 2, step)
        g1 = np.arange(c1_ - half, c1_ + half + step / 2, step)
        g0 = g0[np.abs(g0) <= box]
        g1 = g1[np.abs(g1) <= box]
        A, B = np.meshgrid(g0, g1, indexing="ij")
        uj = (z - A * x[others[0]] - B * x[others[1]]) / x[j]
        cost = psi_vec(A, c1, c2, p) + psi_vec(B, c1, c2, p) + psi_vec(uj, c1, c2, p)
        cost = np.where(np.abs(uj) <= box, cost, np.inf)
        k = np.unravel_index(int(np.argmin(cost)), cost.shape)
        return float(cost[k]), float(A[k]), float(B[k])

    val, a, b = search(0.0, 0.0, box, coarse)
    val, a, b = search(a, b, 3 * coarse, fine)
    return val


def general_rate_closed_form(x, c1, c2, p, z):
    """``|z|^p (sum_j C_j^{-1/(p-1)} |x_j|^q)^{-(p-1)}`` with ``C_j`` the cost on the helpful side (p > 1)."""
    x = np.asarray(x, dtype=float)
    side = np.sign(z) * np.sign(x)
    C = np.where(side > 0, c2, np.where(side < 0, c1, np.inf))
    q = p / (p - 1)
    ok = np.isfinite(C) & (x != 0)
    s = float(np.sum(C[ok] ** (-1 / (p - 1)) * np.abs(x[ok]) ** q))
    return abs(z) ** p * s ** (-(p - 1))
