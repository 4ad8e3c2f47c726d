"""Numba inner loops for the grid dynamic programs.

Both kernels round to the nearest grid value with ties going up, walking the
bracketing index forward as the candidate D grows. The pure-Python rule in
``dpp.nearest_index`` must stay bit-for-bit identical to this one.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _max_d_cell(grid, hg, T, Cs, u, i, t):
    n = grid.size
    D = grid[i]
    hd = hg[i]
    best = -np.inf
    arg = -1
    k = i
    for tn in range(t + Cs + 1, T + 1):
        Dn = D + hd * float(tn - t - Cs)
        while k + 1 < n and grid[k + 1] <= Dn:
            k += 1
        kk = k
        if k + 1 < n and (Dn - grid[k]) >= (grid[k + 1] - Dn):
            kk = k + 1
        val = u[kk, tn] + (Dn - D)
        if val > best:
            best = val
            arg = tn
    return best, arg


@njit(cache=True)
def max_d_backward(grid, hg, T, Cs, u, policy):
    # rows within one time step are independent; time steps are sequential
    for t in range(T - Cs - 1, -1, -1):
        for i in range(grid.size):
            best, arg = _max_d_cell(grid, hg, T, Cs, u, i, t)
            u[i, t] = best
            policy[i, t] = arg


@njit(cache=True)
def min_time_descending(grid, hg, D_final, Cs, v, policy):
    n = grid.size
    for i in range(n - 1, -1, -1):
        D = grid[i]
        if D >= D_final:
            v[i] = 0
            policy[i] = -1
            continue
        hd = hg[i]
        cap = Cs + int(math.ceil((D_final - D) / hd))
        best = np.iinfo(np.int64).max
        arg = -1
        k = i
        for dt in range(Cs + 1, cap + 1):
            Dn = D + hd * float(dt - Cs)
            if Dn >= D_final:
                vn = 0
            else:
                while k + 1 < n and grid[k + 1] <= Dn:
                    k += 1
                kk = k
                if k + 1 < n and (Dn - grid[k]) >= (grid[k + 1] - Dn):
                    kk = k + 1
                if kk <= i:
                    kk = i + 1
                vn = v[kk]
            val = vn + dt
            if val < best:
                best = val
                arg = dt
        v[i] = best
        policy[i] = arg
