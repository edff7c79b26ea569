"""Compiled inner loops for the energy-coordinate solver.

Node layout (``NV = 13`` doubles): ``n[0:3], ell[3:6], m[6:9], h1, h2, p, q``.
Right-side layout (16 doubles): ``ell_Y[0:3], m_X[3:6], n_Y[6:9], n_X[9:12],
h1_Y, h2_X, p_Y, q_X``.
"""

import math

import numpy as np
from numba import njit

NV = 13
NR = 16
I_N, I_L, I_M, I_H1, I_H2, I_P, I_Q = 0, 3, 6, 9, 10, 11, 12

STATUS_OUTSIDE = 0
STATUS_BOUNDARY = 1
STATUS_INTERIOR = 2
STATUS_SINGULAR = 3

ERR_NONE = 0
ERR_PICARD = 1
ERR_POSITIVITY = 2
ERR_RANGE = 3
ERR_NONFINITE = 4


@njit(cache=True)
def rhs(v, alpha, gamma, mu, out):
    n1 = v[0]
    c2 = alpha + (gamma - alpha) * n1 * n1
    c = math.sqrt(c2)
    cp = (gamma - alpha) * n1 / c
    h1 = v[I_H1]
    h2 = v[I_H2]
    p = v[I_P]
    q = v[I_Q]
    lm = v[3] * v[6] + v[4] * v[7] + v[5] * v[8]
    H = h1 + h2 - 2.0 * h1 * h2
    l1 = v[3]
    m1 = v[6]
    a8 = 1.0 / (8.0 * c2 * c)
    b4 = cp / (4.0 * c2)
    dl = h2 - h1 * h2 + lm
    dm = h1 - h1 * h2 + lm
    for i in range(3):
        g = gamma if i == 0 else alpha
        ni = v[i]
        li = v[3 + i]
        mi = v[6 + i]
        br = ((c2 - g) * H - 2.0 * (3.0 * c2 - g) * lm) * a8 * ni
        cross = li * h2 + mi * h1
        out[i] = q * br + b4 * l1 * q * (li - mi) + mu * q / (4.0 * c) * (2.0 * li * dl - cross)
        out[3 + i] = p * br - b4 * m1 * p * (li - mi) + mu * p / (4.0 * c) * (2.0 * mi * dm - cross)
        out[6 + i] = q * mi / (2.0 * c)
        out[9 + i] = p * li / (2.0 * c)
    out[12] = b4 * q * l1 * (h1 - h2) + mu / (2.0 * c) * q * h1 * dl
    out[13] = b4 * p * m1 * (h2 - h1) + mu / (2.0 * c) * p * h2 * dm
    out[14] = p * q / (2.0 * c) * (-cp / (2.0 * c) * (l1 - m1) - mu * dl)
    out[15] = p * q / (2.0 * c) * (cp / (2.0 * c) * (l1 - m1) - mu * dm)


@njit(cache=True)
def _closure(B, fB, dY, L, fL, dX, P, fP, nY, nX):
    """One trapezoidal sweep: Y family from B, X family from L, into P."""
    hY = 0.5 * dY
    hX = 0.5 * dX
    for i in range(3):
        P[I_L + i] = B[I_L + i] + hY * (fB[i] + fP[i])
        P[I_M + i] = L[I_M + i] + hX * (fL[3 + i] + fP[3 + i])
        nY[i] = B[i] + hY * (fB[6 + i] + fP[6 + i])
        nX[i] = L[i] + hX * (fL[9 + i] + fP[9 + i])
        P[i] = 0.5 * (nY[i] + nX[i])
    P[I_H1] = B[I_H1] + hY * (fB[12] + fP[12])
    P[I_P] = B[I_P] + hY * (fB[14] + fP[14])
    P[I_H2] = L[I_H2] + hX * (fL[13] + fP[13])
    P[I_Q] = L[I_Q] + hX * (fL[15] + fP[15])


@njit(cache=True)
def solve_cell(B, dY, L, dX, alpha, gamma, mu, tol, maxit, P):
    """Picard iteration for the node above ``B`` and right of ``L``.

    Returns ``(iterations, |n_Y-route - n_X-route|)``; iterations is -1 if
    the tolerance was not met within ``maxit`` sweeps.
    """
    fB = np.empty(NR)
    fL = np.empty(NR)
    fP = np.empty(NR)
    nY = np.empty(3)
    nX = np.empty(3)
    prev = np.empty(NV)
    rhs(B, alpha, gamma, mu, fB)
    rhs(L, alpha, gamma, mu, fL)
    # explicit predictor: use the far end's slopes at the near end
    for k in range(NR):
        fP[k] = fB[k] if (k < 3 or 6 <= k < 9 or k == 12 or k == 14) else fL[k]
    _closure(B, fB, dY, L, fL, dX, P, fP, nY, nX)
    it = 0
    while True:
        it += 1
        for k in range(NV):
            prev[k] = P[k]
        rhs(P, alpha, gamma, mu, fP)
        _closure(B, fB, dY, L, fL, dX, P, fP, nY, nX)
        diff = 0.0
        for k in range(NV):
            d = abs(P[k] - prev[k]) / (1.0 + abs(P[k]))
            if not d <= diff:
                diff = d
        if diff <= tol:
            break
        if it >= maxit:
            it = -1
            break
    mis = 0.0
    for i in range(3):
        d = abs(nY[i] - nX[i])
        if d > mis:
            mis = d
    return it, mis


@njit(cache=True)
def project_node(P):
    nn = math.sqrt(P[0] * P[0] + P[1] * P[1] + P[2] * P[2])
    for i in range(3):
        P[i] /= nn
    for base, hk in ((I_L, I_H1), (I_M, I_H2)):
        dot = P[base] * P[0] + P[base + 1] * P[1] + P[base + 2] * P[2]
        for i in range(3):
            P[base + i] -= dot * P[i]
        r2 = (P[hk] - 0.5) ** 2
        for i in range(3):
            r2 += P[base + i] ** 2
        r = math.sqrt(r2)
        if r > 0.0:
            s = 0.5 / r
            for i in range(3):
                P[base + i] *= s
            P[hk] = 0.5 + (P[hk] - 0.5) * s


@njit(cache=True)
def march(Xs, Ys, Yc, Xc, bcol, brow, alpha, gamma, mu, tol, maxit, h_floor,
          clamp_tol, project, U, status, mismatch, iters):
    """Fill ``U[i, j]`` for every lattice node with ``Ys[j] >= Yc[i]``.

    ``bcol[i]`` holds the curve values where column i meets the curve
    (at ``Y = Yc[i]``), ``brow[j]`` those where row j meets it (``X = Xc[j]``).
    Returns ``(error_code, i, j)``.
    """
    nX = Xs.size
    nY = Ys.size
    hY = Ys[1] - Ys[0] if nY > 1 else 1.0
    tiny = 1e-9 * hY
    P = np.empty(NV)
    for d in range(nX + nY - 1):
        i_lo = max(0, d - nY + 1)
        i_hi = min(d, nX - 1)
        for i in range(i_lo, i_hi + 1):
            j = d - i
            gapY = Ys[j] - Yc[i]
            if gapY < -tiny:
                status[i, j] = STATUS_OUTSIDE
                continue
            if gapY <= tiny:
                for k in range(NV):
                    U[i, j, k] = bcol[i, k]
                status[i, j] = STATUS_BOUNDARY
                continue
            if j > 0 and status[i, j - 1] != STATUS_OUTSIDE:
                B = U[i, j - 1]
                dY = Ys[j] - Ys[j - 1]
            else:
                B = bcol[i]
                dY = gapY
            if i > 0 and status[i - 1, j] != STATUS_OUTSIDE:
                L = U[i - 1, j]
                dX = Xs[i] - Xs[i - 1]
            else:
                L = brow[j]
                dX = max(Xs[i] - Xc[j], 0.0)
            it, mis = solve_cell(B, dY, L, dX, alpha, gamma, mu, tol, maxit, P)
            iters[i, j] = it
            mismatch[i, j] = mis
            for k in range(NV):
                if not math.isfinite(P[k]):
                    return ERR_NONFINITE, i, j
            if it < 0:
                return ERR_PICARD, i, j
            if P[I_P] <= 0.0 or P[I_Q] <= 0.0:
                return ERR_POSITIVITY, i, j
            for hk in (I_H1, I_H2):
                if P[hk] < 0.0:
                    if -P[hk] > clamp_tol:
                        return ERR_RANGE, i, j
                    P[hk] = 0.0
                elif P[hk] > 1.0:
                    if P[hk] - 1.0 > clamp_tol:
                        return ERR_RANGE, i, j
                    P[hk] = 1.0
            if project:
                project_node(P)
            for k in range(NV):
                U[i, j, k] = P[k]
            if P[I_H1] < h_floor or P[I_H2] < h_floor:
                status[i, j] = STATUS_SINGULAR
            else:
                status[i, j] = STATUS_INTERIOR
    return ERR_NONE, -1, -1


@njit(cache=True)
def _tx_slopes(v, alpha, gamma, out):
    c = math.sqrt(alpha + (gamma - alpha) * v[0] * v[0])
    out[0] = v[I_P] * v[I_H1] / (2.0 * c)   # t_X
    out[1] = v[I_Q] * v[I_H2] / (2.0 * c)   # t_Y
    out[2] = 0.5 * v[I_P] * v[I_H1]         # x_X
    out[3] = -0.5 * v[I_Q] * v[I_H2]        # x_Y


@njit(cache=True)
def integrate_tx(Xs, Ys, Xc, Yc, bcol, brow, xcol, xrow, status, U, alpha, gamma, T, Xp, mism):
    """Trapezoidal integration of t and x from the curve (t = 0, x = source).

    Each node averages its Y-route (from below) and X-route (from the left);
    ``mism`` receives max(|t_Y-route - t_X-route|, |x_Y-route - x_X-route|).
    """
    nX = Xs.size
    nY = Ys.size
    sP = np.empty(4)
    sB = np.empty(4)
    sL = np.empty(4)
    for d in range(nX + nY - 1):
        i_lo = max(0, d - nY + 1)
        i_hi = min(d, nX - 1)
        for i in range(i_lo, i_hi + 1):
            j = d - i
            st = status[i, j]
            if st == STATUS_OUTSIDE:
                continue
            if st == STATUS_BOUNDARY:
                T[i, j] = 0.0
                Xp[i, j] = xcol[i]
                continue
            _tx_slopes(U[i, j], alpha, gamma, sP)
            if j > 0 and status[i, j - 1] != STATUS_OUTSIDE:
                _tx_slopes(U[i, j - 1], alpha, gamma, sB)
                dY = Ys[j] - Ys[j - 1]
                tB = T[i, j - 1]
                xB = Xp[i, j - 1]
            else:
                _tx_slopes(bcol[i], alpha, gamma, sB)
                dY = Ys[j] - Yc[i]
                tB = 0.0
                xB = xcol[i]
            if i > 0 and status[i - 1, j] != STATUS_OUTSIDE:
                _tx_slopes(U[i - 1, j], alpha, gamma, sL)
                dX = Xs[i] - Xs[i - 1]
                tL = T[i - 1, j]
                xL = Xp[i - 1, j]
            else:
                _tx_slopes(brow[j], alpha, gamma, sL)
                dX = max(Xs[i] - Xc[j], 0.0)
                tL = 0.0
                xL = xrow[j]
            tYr = tB + 0.5 * dY * (sB[1] + sP[1])
            xYr = xB + 0.5 * dY * (sB[3] + sP[3])
            tXr = tL + 0.5 * dX * (sL[0] + sP[0])
            xXr = xL + 0.5 * dX * (sL[2] + sP[2])
            T[i, j] = 0.5 * (tYr + tXr)
            Xp[i, j] = 0.5 * (xYr + xXr)
            mism[i, j] = max(abs(tYr - tXr), abs(xYr - xXr))
