"""Small numeric utilities: compensated accumulation and series tools."""

from __future__ import annotations

import math

import numpy as np


def fsum(values) -> float:
    """Exactly rounded sum of a sequence of floats."""
    return math.fsum(np.asarray(values, dtype=float).tolist())


def cumsum_extended(values: np.ndarray) -> np.ndarray:
    """Cumulative sum accumulated in extended precision, returned as float64.

    Plain float64 cumsum accumulates O(n*eps) error; going through
    longdouble keeps cumulative tables accurate to ~1e-15 relative even at
    n = 1e6, which the 1e-12 mass-accounting invariants rely on.
    """
    return np.cumsum(np.asarray(values, dtype=np.longdouble)).astype(float)


def poly_mul_trunc(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """First `n` coefficients of the product of two power series (FFT)."""
    la = min(len(a), n)
    lb = min(len(b), n)
    size = 1
    while size < la + lb - 1:
        size <<= 1
    fa = np.fft.rfft(a[:la], size)
    fb = np.fft.rfft(b[:lb], size)
    return np.fft.irfft(fa * fb, size)[:n]


def series_inverse(e: np.ndarray, n: int) -> np.ndarray:
    """First `n` coefficients of 1/E(x) for a power series with e[0] != 0.

    Newton doubling: R <- R*(2 - E*R) mod x^m, so the whole inversion costs
    O(n log n) via FFT products.
    """
    if e[0] == 0.0:
        raise ZeroDivisionError("series has no inverse: constant term is zero")
    r = np.array([1.0 / e[0]])
    m = 1
    while m < n:
        m = min(2 * m, n)
        er = poly_mul_trunc(e[:m], r, m)
        er[0] -= 2.0
        r = -poly_mul_trunc(r, er, m)
    return r[:n]


def gauss_legendre_panels(f, a: float, b: float, *, order: int = 24,
                          geometric_from: float | None = None,
                          panels: int = 32) -> float:
    """Integrate f on [a, b] with composite Gauss-Legendre panels.

    When `geometric_from` is given, panel widths shrink geometrically toward
    `a` starting from that fraction of the interval, which resolves mild
    derivative singularities at the left endpoint without adaptivity.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    if geometric_from is None:
        edges = np.linspace(a, b, panels + 1)
    else:
        # [a, a+h], [a+h, a+2h], ... with h halving toward a
        fracs = geometric_from * 0.5 ** np.arange(panels - 1, 0, -1)
        edges = np.concatenate(([a], a + (b - a) * fracs, [b]))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        total += half * float(np.dot(weights, f(mid + half * nodes)))
    return total
