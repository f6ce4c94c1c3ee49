"""Integrals of piecewise-exponential weights over ordered time simplices.

    I(E_1..E_{m+1}; T) = int_{0<t_1<..<t_m<T} exp(-sum_k E_k (t_k - t_{k-1})) dt

with ``t_0 = 0`` and ``t_{m+1} = T``. It equals ``T^m exp[x_0, .., x_m]``, the
divided difference of ``exp`` at ``x_k = -T E_k``. The plain Newton table for
divided differences cancels catastrophically when energies nearly coincide,
so the table is instead obtained as the exponential of the bidiagonal matrix
with diagonal ``x`` and unit superdiagonal (whose upper triangle holds every
divided difference), by scaling and squaring: a Taylor series for the scaled
matrix, then repeated squaring of a triangular matrix with positive entries.
Squaring positive matrices cannot cancel, so the relative accuracy is a few
ulps times the number of squarings, degenerate or not.
"""

from __future__ import annotations

import math

import numpy as np


def _scaled_table(y: np.ndarray, alpha: float) -> np.ndarray:
    """``exp(alpha * B)`` for bidiagonal ``B`` with diagonal ``y / alpha``.

    Entry ``(i, j)`` is ``alpha^{j-i} exp[y_i..y_j]``, summed from the series
    ``exp[y_i..y_j] = sum_k h_k(y_i..y_j) / (k + j - i)!`` where ``h_k`` is the
    complete homogeneous symmetric polynomial. Requires ``|y| <= 1``.
    """
    n = len(y)
    G = np.zeros((n, n))
    for i in range(n):
        # h[k] for the current window y_i..y_j, updated as j grows
        n_terms = 30 + n
        h = y[i] ** np.arange(n_terms)
        for j in range(i, n):
            if j > i:
                # h_k(y_i..y_j) = h_k(y_i..y_{j-1}) + y_j h_{k-1}(y_i..y_j)
                for k in range(1, n_terms):
                    h[k] = h[k] + y[j] * h[k - 1]
            p = j - i
            fact = math.factorial(p)
            total = 0.0
            term_scale = 1.0 / fact
            for k in range(n_terms):
                total += h[k] * term_scale
                term_scale /= k + p + 1
            G[i, j] = alpha**p * total
    return G


def exp_divided_differences(x) -> np.ndarray:
    """Upper-triangular table ``D[i, j] = exp[x_i, .., x_j]``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise ValueError("need a nonempty vector of nodes")
    if not np.all(np.isfinite(x)):
        raise ValueError("nodes must be finite")
    # shift by the largest node: every squaring then stays bounded by 1
    c = float(x.max())
    spread = float(c - x.min())
    s = max(0, math.ceil(math.log2(spread / 0.5))) if spread > 0.5 else 0
    alpha = 2.0**-s
    G = _scaled_table((x - c) * alpha, alpha)
    for _ in range(s):
        G = np.triu(G @ G)
    return G * math.exp(c)


def simplex_exp_integral(energies, T: float) -> float:
    """``int`` over ``0 < t_1 < .. < t_m < T`` of ``exp(-sum E_k dt_k)``.

    ``energies`` lists ``E_1..E_{m+1}``, one per interval between jumps.
    """
    E = np.asarray(energies, dtype=float)
    if E.ndim != 1 or len(E) == 0:
        raise ValueError("need at least one interval energy")
    if T < 0:
        raise ValueError("T must be nonnegative")
    m = len(E) - 1
    if m == 0:
        return math.exp(-E[0] * T)
    if T == 0:
        return 0.0
    return T**m * float(exp_divided_differences(-T * E)[0, m])


def simplex_exp_integral_newton(energies, T: float) -> float:
    """Same integral from the textbook Newton recursion (well-separated energies only).

    Kept as an independent cross-check; loses accuracy as energies merge.
    """
    E = [float(e) for e in energies]
    m = len(E) - 1
    table = [math.exp(-T * e) for e in E]
    for level in range(1, m + 1):
        table = [(table[i + 1] - table[i]) / (E[i + level] - E[i]) for i in range(len(table) - 1)]
    return (-1) ** m * table[0]
