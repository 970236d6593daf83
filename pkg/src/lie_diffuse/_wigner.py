"""Wigner little-d matrices by three-term recursion in the degree.

Half-integer degrees are tracked as doubled integers (two_ell = 2*ell), so
ell = 0, 1/2, 1, 3/2, ... maps to two_ell = 0, 1, 2, 3, ...  Rows and columns
of d^ell are indexed by j = -ell, ..., ell in increasing order.

The convention is d^ell[r, c](theta) = <ell r| exp(-i theta Jy) |ell c> in the
standard angular-momentum basis, so d^{1/2} = [[cos(t/2), sin(t/2)],
[-sin(t/2), cos(t/2)]] and d^ell(0) = I.

Degrees of one parity are connected by a three-term recursion (ell-1, ell,
ell+1 at fixed row/column), seeded on the boundary |r| = ell or |c| = ell by
closed forms whose binomial factors are evaluated through log-gamma.  This
stays in range and numerically stable for the two_ell <= a-few-hundred scales
used here, where factorial formulas would overflow.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln


def _binom_sqrt(n: int, k: int) -> float:
    # sqrt(C(n, k)) without forming the (possibly huge) binomial itself
    return float(np.exp(0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))))


def _seed_edge(two_ell: int, two_r: int, two_c: int, ch, sh):
    """Seed value d^{ell}[r, c](theta) on the boundary max(|2r|,|2c|) = two_ell.

    ch, sh are cos(theta/2) and sin(theta/2) arrays; returns an array of the
    same shape.  The four closed forms agree on corners.
    """
    T = two_ell
    if two_r == T:
        a, b = (T + two_c) // 2, (T - two_c) // 2
        return _binom_sqrt(T, a) * np.power(ch, a) * np.power(-sh, b)
    if two_r == -T:
        a, b = (T - two_c) // 2, (T + two_c) // 2
        return _binom_sqrt(T, b) * np.power(ch, a) * np.power(sh, b)
    if two_c == T:
        a, b = (T + two_r) // 2, (T - two_r) // 2
        return _binom_sqrt(T, a) * np.power(ch, a) * np.power(sh, b)
    if two_c == -T:
        a, b = (T - two_r) // 2, (T + two_r) // 2
        sign = -1.0 if b % 2 else 1.0
        return sign * _binom_sqrt(T, b) * np.power(ch, a) * np.power(sh, b)
    raise ValueError("not a boundary pair")


def wigner_d_stack(two_L: int, theta: np.ndarray) -> dict[int, np.ndarray]:
    """All little-d matrices d^{ell}(theta_b) for two_ell = 0..two_L.

    Parameters
    ----------
    two_L : int
        Doubled maximal degree (inclusive).
    theta : ndarray, shape (B,)
        Angles in radians; any real values are accepted.

    Returns
    -------
    dict mapping two_ell -> real array of shape (B, d, d), d = two_ell + 1.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    B = theta.size
    ct = np.cos(theta)
    ch = np.cos(theta / 2.0)
    sh = np.sin(theta / 2.0)
    M = 2 * two_L + 1
    out: dict[int, np.ndarray] = {}

    for parity in (0, 1):
        if parity > two_L:
            break
        # lattice index i <-> two_m = i - two_L; levels advance by 2 in two_ell
        Dp = np.zeros((M, M, B))
        Dc = np.zeros((M, M, B))
        for tl in range(parity, two_L + 1, 2):
            new = np.zeros((M, M, B))
            if tl >= 2:
                told = tl - 2
                sl = slice(two_L - told, two_L + told + 1, 2)
                if told == 0:
                    new[two_L, two_L, :] = ct * Dc[two_L, two_L, :]
                else:
                    tm = np.arange(-told, told + 1, 2)
                    TR = tm[:, None].astype(float)
                    TC = tm[None, :].astype(float)
                    num1 = 2.0 * (told + 1) * (told * (told + 2) * ct[None, None, :]
                                               - (TR * TC)[:, :, None])
                    num2 = (told + 2) * np.sqrt((told ** 2 - TR ** 2)
                                                * (told ** 2 - TC ** 2))[:, :, None]
                    den = told * np.sqrt(((told + 2) ** 2 - TR ** 2)
                                         * ((told + 2) ** 2 - TC ** 2))[:, :, None]
                    new[sl, sl] = (num1 * Dc[sl, sl] - num2 * Dp[sl, sl]) / den
            # overwrite the boundary of this level with closed-form seeds
            for tc in range(-tl, tl + 1, 2):
                for tr in (-tl, tl):
                    new[two_L + tr, two_L + tc] = _seed_edge(tl, tr, tc, ch, sh)
                    if abs(tc) != tl:
                        new[two_L + tc, two_L + tr] = _seed_edge(tl, tc, tr, ch, sh)
            Dp, Dc = Dc, new
            sl = slice(two_L - tl, two_L + tl + 1, 2)
            out[tl] = np.ascontiguousarray(np.transpose(new[sl, sl], (2, 0, 1)))
    return out


def wigner_d_matrix(two_ell: int, theta: float) -> np.ndarray:
    """Single little-d matrix d^{ell}(theta), shape (d, d)."""
    stack = wigner_d_stack(two_ell, np.array([float(theta)]))
    return stack[two_ell][0]
