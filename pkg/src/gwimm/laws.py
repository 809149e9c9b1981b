"""Offspring, immigration and initial-size laws: exact tables and samplers.

The three families are fixed by their probability generating functions

    F(s)  = s + kappa1 * (1 - s)**(1 + nu)      offspring, critical
    B(s)  = exp(-kappa2 * (1 - s)**theta)       immigration
    G0(s) = 1 - kappa0 * (1 - s)**delta         initial size

All coefficient recurrences below are subtraction-free, and every truncated
table carries its exact tail mass, so downstream mass accounting never has
to rely on "1 minus a sum of floats".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._num import cumsum_extended, fsum
from .errors import DegenerateThetaError, NonPmfError, OutOfRangeError

# inverse-cdf tables stop at this quantile or this many entries, whichever
# comes first; draws beyond the table fall back to an exact tail walk
_TABLE_QUANTILE = 1.0 - 1e-12
_TABLE_CAP = 1 << 17
_SIBUYA_TABLE = 1024

_HUGE = 1 << 62          # sentinel for astronomically large integer draws
_LGAMMA_LIMIT = 1e5      # above this, lgamma differences lose to Stirling
_SEED_DIRECT = 1e12      # above this, walk steps fall under float resolution
_POISSON_LAM_MAX = 1e17  # generator-safe Poisson mean


@dataclass(frozen=True)
class LawParams:
    """Validated parameter bundle for the three laws.

    Admissible ranges
    -----------------
    nu, theta, delta : (0, 1]
    kappa0           : (0, 1]
    kappa1           : (0, 1/(1+nu)]   (else the offspring weights are no pmf)
    kappa2           : (0, inf)
    """

    nu: float
    theta: float
    delta: float
    kappa0: float
    kappa1: float
    kappa2: float

    def __post_init__(self):
        for name in ("nu", "theta", "delta"):
            v = float(getattr(self, name))
            if not 0.0 < v <= 1.0:
                raise OutOfRangeError(name, f"0 < {name} <= 1", v)
        if not 0.0 < self.kappa0 <= 1.0:
            raise OutOfRangeError("kappa0", "0 < kappa0 <= 1", self.kappa0)
        if not self.kappa2 > 0.0:
            raise OutOfRangeError("kappa2", "kappa2 > 0", self.kappa2)
        if not self.kappa1 > 0.0:
            raise OutOfRangeError("kappa1", "kappa1 > 0", self.kappa1)
        if self.kappa1 * (1.0 + self.nu) > 1.0:
            raise NonPmfError("kappa1", "kappa1 <= 1/(1+nu)", self.kappa1)


# ---------------------------------------------------------------------------
# generating functions (closed forms, vectorised over s)

def offspring_pgf(p: LawParams, s):
    s = np.asarray(s, dtype=float)
    return s + p.kappa1 * (1.0 - s) ** (1.0 + p.nu)


def immigration_pgf(p: LawParams, s):
    s = np.asarray(s, dtype=float)
    return np.exp(-p.kappa2 * (1.0 - s) ** p.theta)


def initial_pgf(p: LawParams, s):
    s = np.asarray(s, dtype=float)
    return 1.0 - p.kappa0 * (1.0 - s) ** p.delta


# ---------------------------------------------------------------------------
# exact pmf tables


@dataclass(frozen=True)
class PmfTable:
    """Probabilities on {0, ..., n} together with the exact mass beyond n."""

    probs: np.ndarray
    truncation_mass: float

    @property
    def support_end(self) -> int:
        return len(self.probs) - 1


def offspring_pmf(params: LawParams, nmax: int) -> PmfTable:
    """Offspring law on {0, ..., nmax} with its exact tail mass.

    The weights are p0 = kappa1, p1 = 1 - kappa1*(1+nu),
    p2 = kappa1*(1+nu)*nu/2 and then follow the ratio
    p_{k+1}/p_k = (k-1-nu)/(k+1).  The mass above nmax has the closed
    form p_nmax * (nmax-1-nu)/(1+nu) for nmax >= 2, so the returned
    truncation mass is exact rather than a float complement.
    """
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")
    nu, k1 = params.nu, params.kappa1
    probs = np.zeros(nmax + 1)
    probs[0] = k1
    if nmax >= 1:
        probs[1] = 1.0 - k1 * (1.0 + nu)
    if nmax >= 2:
        probs[2] = k1 * (1.0 + nu) * nu / 2.0
    if nmax >= 3:
        k = np.arange(2.0, nmax)
        probs[3:] = probs[2] * np.cumprod((k - 1.0 - nu) / (k + 1.0))
    if nmax == 0:
        tail = 1.0 - k1
    elif nmax == 1:
        tail = k1 * nu
    else:
        tail = probs[nmax] * (nmax - 1.0 - nu) / (1.0 + nu)
    return PmfTable(probs=probs, truncation_mass=tail)


def initial_pmf(params: LawParams, nmax: int) -> PmfTable:
    """Initial-size law: an atom 1-kappa0 at zero plus a scaled Sibuya law.

    Built from g_1 = kappa0*delta and the ratio g_{k+1}/g_k = (k-delta)/(k+1);
    the mass above nmax is g_nmax * (nmax-delta)/delta exactly.
    """
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")
    d, k0 = params.delta, params.kappa0
    probs = np.zeros(nmax + 1)
    probs[0] = 1.0 - k0
    if nmax >= 1:
        probs[1] = k0 * d
    if nmax >= 2:
        k = np.arange(1.0, nmax)
        probs[2:] = probs[1] * np.cumprod((k - d) / (k + 1.0))
    if nmax == 0:
        tail = k0
    else:
        tail = probs[nmax] * (nmax - d) / d
    return PmfTable(probs=probs, truncation_mass=tail)


def immigration_pmf(params: LawParams, nmax: int) -> PmfTable:
    """Immigration law via the exponential-series recurrence.

    With c_k the series coefficients of kappa2*(1 - (1-s)**theta), the
    weights satisfy n*b_n = sum_k k*c_k*b_{n-k}, b_0 = exp(-kappa2).
    Every term is nonnegative, so the recurrence is cancellation-free;
    theta = 1 collapses to the exact Poisson(kappa2) table.
    """
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")
    th, k2 = params.theta, params.kappa2
    b = np.zeros(nmax + 1)
    b[0] = math.exp(-k2)
    if nmax >= 1:
        c = np.zeros(nmax + 1)
        c[1] = k2 * th
        if nmax >= 2:
            k = np.arange(1.0, nmax)
            c[2:] = c[1] * np.cumprod((k - th) / (k + 1.0))
        kc = c * np.arange(nmax + 1.0)
        for n in range(1, nmax + 1):
            b[n] = np.dot(kc[1:n + 1], b[n - 1::-1]) / n
    return PmfTable(probs=b, truncation_mass=max(0.0, 1.0 - fsum(b)))


def offspring_mean_tail(params: LawParams, n: int) -> float:
    """Exact partial-mean tail sum_{k>n} k*p_k of the offspring law.

    Closed form kappa1*(1+nu)*Gamma(n-nu)/(Gamma(1-nu)*Gamma(n)) for n >= 1;
    together with a table sum this pins the critical mean E X = 1 to high
    accuracy without ever summing the infinite series.
    """
    if n < 1:
        return 1.0
    if params.nu == 1.0:
        return 2.0 * params.kappa1 if n == 1 else 0.0
    log_amp = (math.log(params.kappa1 * (1.0 + params.nu))
               - math.lgamma(1.0 - params.nu))
    return math.exp(_log_ratio_gamma(log_amp, 1.0 - params.nu, n - 1))


# ---------------------------------------------------------------------------
# samplers
#
# Strategy: inverse cdf against a cached cumulative table; the rare draws
# falling beyond the table are resolved exactly by inverting the closed-form
# survival function (lgamma anchor + integer walk with exact local ratios).


@lru_cache(maxsize=64)
def _offspring_table(nu: float, kappa1: float):
    table = offspring_pmf(LawParams(nu, 1.0, 1.0, 1.0, kappa1, 1.0),
                          _TABLE_CAP).probs
    cum = cumsum_extended(table)
    stop = int(np.searchsorted(cum, _TABLE_QUANTILE)) + 1
    stop = min(stop, len(cum))
    n = stop - 1
    if n >= 2:
        tail = table[n] * (n - 1.0 - nu) / (1.0 + nu)
    else:
        # the quantile rule never stops this early, but keep it correct
        tail = 1.0 - kappa1 if n == 0 else kappa1 * nu
    return cum[:stop], tail


@lru_cache(maxsize=64)
def _sibuya_table(delta: float):
    # pmf of the Sibuya(delta) law on {1, 2, ...}
    probs = np.zeros(_SIBUYA_TABLE)
    probs[0] = delta
    k = np.arange(1.0, _SIBUYA_TABLE)
    probs[1:] = delta * np.cumprod((k - delta) / (k + 1.0))
    cum = cumsum_extended(probs)
    stop = int(np.searchsorted(cum, _TABLE_QUANTILE)) + 1
    stop = min(stop, len(cum))
    n = stop  # table covers values 1..stop
    tail = probs[stop - 1] * (n - delta) / delta
    return cum[:stop], tail


def _log_ratio_gamma(log_amp: float, a: float, n: float) -> float:
    """log of S(n) = exp(log_amp) * Gamma(n+a) / Gamma(n+1).

    lgamma differences cancel catastrophically once their magnitude passes
    ~1e16*eps of the result, so beyond _LGAMMA_LIMIT we switch to the
    two-term Stirling form, which is the more accurate of the two there.
    """
    if n <= _LGAMMA_LIMIT:
        return log_amp + math.lgamma(n + a) - math.lgamma(n + 1.0)
    am1 = a - 1.0
    return log_amp + am1 * math.log(n) + math.log1p(am1 * a / (2.0 * n))


def _tail_inverse(log_amp: float, a: float, v: float, lo: int) -> int:
    """Smallest integer n >= lo with S(n) < v.

    S(n) = exp(log_amp)*Gamma(n+a)/Gamma(n+1) is decreasing and has the
    exact local ratio S(n+1)/S(n) = (n+a)/(n+1), so after one anchored
    evaluation the walk from the asymptotic seed costs O(1) steps.  Seeds
    past _SEED_DIRECT are returned as-is (clipped at the 2**62 sentinel):
    there a +-1 refinement is below float64 resolution anyway.
    """
    log_v = math.log(v)
    seed = math.exp((log_v - log_amp) / (a - 1.0))
    if seed > _SEED_DIRECT:
        return int(min(seed, float(_HUGE)))
    n = max(int(seed), lo)
    ls = _log_ratio_gamma(log_amp, a, n)
    if ls >= log_v:
        while ls >= log_v:
            ls += math.log((n + a) / (n + 1.0))
            n += 1
    else:
        while n > lo:
            prev = ls - math.log((n - 1.0 + a) / n)
            if prev < log_v:
                ls = prev
                n -= 1
            else:
                break
    return n


def _offspring_tail_value(nu: float, kappa1: float, v: float, lo: int) -> int:
    # P(X > n) = kappa1*nu*Gamma(n-nu)/(Gamma(1-nu)*Gamma(n+1))
    log_amp = math.log(kappa1 * nu) - math.lgamma(1.0 - nu)
    return _tail_inverse(log_amp, -nu, v, lo)


def _sibuya_tail_value(delta: float, v: float, lo: int) -> int:
    # P(X > n) = Gamma(n+1-delta)/(Gamma(1-delta)*Gamma(n+1))
    return _tail_inverse(-math.lgamma(1.0 - delta), 1.0 - delta, v, lo)


def sample_offspring(params: LawParams, rng: np.random.Generator,
                     size: int) -> np.ndarray:
    """Exact offspring draws (int64; values above 2**62 are clipped)."""
    cum, tail = _offspring_table(params.nu, params.kappa1)
    u = rng.random(size)
    x = np.searchsorted(cum, u, side="right")
    over = np.nonzero(x == len(cum))[0]
    if over.size:
        if tail <= 0.0:
            x[over] = len(cum) - 1
        else:
            for i in over:
                x[i] = _offspring_tail_value(params.nu, params.kappa1,
                                             1.0 - u[i], len(cum))
    return x


def sample_initial(params: LawParams, rng: np.random.Generator,
                   size: int) -> np.ndarray:
    """Initial-size draws: 0 with probability 1-kappa0, else Sibuya(delta)."""
    u = rng.random(size)
    x = np.zeros(size, dtype=np.int64)
    hit = u < params.kappa0
    n = int(np.count_nonzero(hit))
    if n:
        x[hit] = sample_sibuya(params.delta, rng, n)
    return x


def sample_sibuya(delta: float, rng: np.random.Generator,
                  size: int) -> np.ndarray:
    """Draws with P(X > n) = prod_{j<=n} (1 - delta/j) on {1, 2, ...}."""
    cum, tail = _sibuya_table(delta)
    u = rng.random(size)
    x = np.searchsorted(cum, u, side="right") + 1
    over = np.nonzero(x == len(cum) + 1)[0]
    if over.size:
        if tail <= 0.0:
            x[over] = len(cum)
        else:
            for i in over:
                x[i] = _sibuya_tail_value(delta, 1.0 - u[i], len(cum) + 1)
    return x


def sample_immigration(params: LawParams, rng: np.random.Generator,
                       size: int) -> np.ndarray:
    """Immigration draws as a Poisson mixture over a one-sided stable law.

    Conditionally on S ~ stable(theta), a Poisson(kappa2**(1/theta) * S)
    count has exactly the generating function exp(-kappa2*(1-s)**theta).
    theta = 1 short-circuits to plain Poisson(kappa2).
    """
    if params.theta == 1.0:
        return rng.poisson(params.kappa2, size)
    lam = params.kappa2 ** (1.0 / params.theta) * stable_positive(
        params.theta, rng, size)
    np.minimum(lam, _POISSON_LAM_MAX, out=lam)
    return rng.poisson(lam)


def stable_positive(theta: float, rng: np.random.Generator,
                    size: int) -> np.ndarray:
    """One-sided stable(theta) variates with E exp(-l*S) = exp(-l**theta).

    Uses the product representation on (0, pi) x Exp(1):

        log S = log sin(theta*u) + r*log sin((1-theta)*u)
                - log sin(u)/theta - r*log w,        r = (1-theta)/theta.
    """
    if not 0.0 < theta <= 1.0:
        raise OutOfRangeError("theta", "0 < theta <= 1", theta)
    if theta == 1.0:
        raise DegenerateThetaError(
            "theta = 1 is the deterministic unit mass; no continuous "
            "one-sided stable component exists")
    u = rng.uniform(0.0, math.pi, size)
    w = rng.standard_exponential(size)
    np.clip(u, 1e-300, None, out=u)
    np.clip(w, 1e-300, None, out=w)
    r = (1.0 - theta) / theta
    log_x = (np.log(np.sin(theta * u))
             + r * np.log(np.sin((1.0 - theta) * u))
             - np.log(np.sin(u)) / theta
             - r * np.log(w))
    return np.exp(log_x)
