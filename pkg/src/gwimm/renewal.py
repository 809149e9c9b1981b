"""Survival sequence via the renewal recurrence, with an independent
truncated-state dynamic-programming oracle, the tail-regime classifier,
and asymptotics of the no-immigration weights gamma_n^(0).

Everything here works from the extinction sequence q_n = q_n(0) of the
offspring iteration.  Writing g0_k = gamma_k^(0) = exp(-kappa2 *
sum_{j<k} q_j^theta) for the probability that no immigrant arrives along
k surviving generations, the survival weights

    a_k = g0_k * (1 - exp(-kappa2 * q_k^theta))
    d_k = kappa0 * g0_k * q_k^delta

drive  u_n = d_n / kappa0 + sum_{k<n} a_k * u_{n-1-k},  u_0 = 1,
the probability that the population stays positive through generation n
given a positive start.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (CapTooSmallError, InsufficientLengthError,
                     WrongRegimeError)
from .laws import LawParams, immigration_pmf, initial_pmf, offspring_pmf
from .pgf import q_iterate
from ._num import fsum, poly_mul_trunc, series_inverse
from .simulate import Model

_DIRECT_LIMIT = 10 ** 4      # direct O(n^2) convolution up to here, FFT beyond
_ALIAS_EXPONENT = 48.0       # evaluation point 1 + c/ring for wrap-around bound


# ---------------------------------------------------------------------------
# renewal table


@dataclass(frozen=True)
class RenewalTable:
    params: LawParams
    gamma0: np.ndarray       # gamma_k^(0), k = 0..n_max
    a: np.ndarray
    d: np.ndarray
    u: np.ndarray


def build_renewal(params: LawParams, n_max: int) -> RenewalTable:
    """Tabulate gamma0, a, d and the survival sequence u up to n_max.

    Construction runs in extended precision; the recurrence is solved by
    direct convolution up to n = 10^4 and through a Newton series inverse
    of 1 - A(x) beyond that.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    q = q_iterate(params, 0.0, n_max).q.astype(np.longdouble)
    qt = q ** np.longdouble(params.theta)
    partial = np.concatenate(([np.longdouble(0.0)], np.cumsum(qt)))
    g0 = np.exp(-np.longdouble(params.kappa2) * partial[:-1])
    a = g0 * (-np.expm1(-np.longdouble(params.kappa2) * qt))
    d = np.longdouble(params.kappa0) * g0 * q ** np.longdouble(params.delta)

    if n_max <= _DIRECT_LIMIT:
        u = np.empty(n_max + 1, dtype=np.longdouble)
        u[0] = 1.0
        for k in range(1, n_max + 1):
            u[k] = d[k] / params.kappa0 + np.dot(a[:k], u[k - 1::-1])
        u64 = u.astype(float)
    else:
        e = np.empty(n_max + 1)
        e[0] = 1.0
        e[1:] = -a[:-1].astype(float)
        r = series_inverse(e, n_max + 1)
        u64 = poly_mul_trunc(d.astype(float) / params.kappa0, r, n_max + 1)
    return RenewalTable(params=params, gamma0=g0.astype(float),
                        a=a.astype(float), d=d.astype(float), u=u64)


# ---------------------------------------------------------------------------
# truncated-state DP oracle


@dataclass(frozen=True)
class DpDistribution:
    cap: int
    pi: np.ndarray            # (n+1, cap+1) per-generation distributions
    lost_mass: np.ndarray     # cumulative truncated probability, per generation
    model: Model
    alias_bound: float        # wrap-around contamination bound (0 when nu = 1)


def _log_poly_at(logc: np.ndarray, logx: float) -> float:
    """log of sum_k exp(logc[k]) * x^k, all coefficients nonnegative."""
    k = np.arange(len(logc))
    return float(np.logaddexp.reduce(logc + k * logx))


def dp_distribution(params: LawParams, model, n: int, M: int = 4096,
                    tol: float = 1e-3,
                    init: tuple[np.ndarray, float] | None = None
                    ) -> DpDistribution:
    """Generation-by-generation law of the chosen model on states {0..M}.

    Each step evaluates the one-step transform at the roots of unity of a
    ring of size 4M: spectra of the truncated offspring and immigration
    laws are combined by a Horner pass over the states (O(M^2) work per
    step), then inverted.  Mass that escapes the truncation is tracked in
    lost_mass, so [sum pi, sum pi + lost] brackets the true probability.

    For nu = 1 the step polynomial has degree at most 3M < 4M, so the
    ring never wraps; for nu < 1 a rigorous wrap-around bound (evaluation
    of the nonnegative step polynomial at a real point > 1) accumulates
    in alias_bound.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if M < 64 or (M & (M - 1)) != 0:
        raise ValueError("M must be a power of two >= 64")
    model = Model(model)
    ring = 4 * M

    fo = offspring_pmf(params, M)
    bo = immigration_pmf(params, M)
    fpad = np.zeros(ring)
    fpad[:M + 1] = fo.probs
    bpad = np.zeros(ring)
    bpad[:M + 1] = bo.probs
    Fz = np.fft.rfft(fpad)
    Bz = np.fft.rfft(bpad)

    pi = np.zeros((n + 1, M + 1))
    lost = np.zeros(n + 1)
    if init is None:
        g = initial_pmf(params, M)
        pi[0] = g.probs
        lost[0] = g.truncation_mass
    else:
        pi[0], lost[0] = init

    track_alias = params.nu < 1.0
    alias = 0.0
    if track_alias:
        logx = math.log1p(_ALIAS_EXPONENT / ring)
        with np.errstate(divide="ignore"):
            logF = _log_poly_at(np.log(fo.probs), logx)
            logB = _log_poly_at(np.log(bo.probs), logx)

    p0pow = params.kappa1 ** np.arange(1.0, M + 1)
    for gen in range(1, n + 1):
        cur = pi[gen - 1]
        acc = np.zeros(len(Fz), dtype=complex)
        for w in range(M, 0, -1):
            acc += cur[w]
            acc *= Fz
        if model is Model.STOPPED_Z:
            spec = Bz * acc
            atom = cur[0]
        elif model is Model.UNSTOPPED_Z:
            spec = Bz * (acc + cur[0])
            atom = 0.0
        else:
            P0 = float(np.dot(cur[1:], p0pow))
            spec = Bz * (acc - P0)
            atom = cur[0] + P0
        out = np.fft.irfft(spec, n=ring)[:M + 1]
        np.clip(out, 0.0, None, out=out)
        out[0] += atom
        pi[gen] = out
        lost[gen] = max(lost[gen - 1], 1.0 - fsum(out))
        if track_alias:
            with np.errstate(divide="ignore"):
                logpi = np.log(cur)
            w = np.arange(M + 1)
            logS = float(np.logaddexp.reduce(logpi + w * logF))
            alias += math.exp(logB + logS - ring * logx)
        if lost[gen] > tol:
            raise CapTooSmallError(gen, lost[gen], tol)
    return DpDistribution(cap=M, pi=pi, lost_mass=lost, model=model,
                          alias_bound=alias)


def _conditioned_init(params: LawParams, M: int) -> tuple[np.ndarray, float]:
    g = initial_pmf(params, M)
    pi0 = g.probs.copy()
    pi0[0] = 0.0
    pi0 /= params.kappa0
    return pi0, g.truncation_mass / params.kappa0


def u_exact_dp(params: LawParams, model, n: int, M: int = 4096,
               tol: float = 1e-3) -> tuple[float, float]:
    """Rigorous bracket for P(alive at generation n | positive start).

    Returns [1 - pi_n(0) - lost_n, 1 - pi_n(0)]; the width never exceeds
    the truncated mass.
    """
    dist = dp_distribution(params, model, n, M, tol=tol,
                           init=_conditioned_init(params, M))
    p0 = float(dist.pi[n, 0])
    return 1.0 - p0 - float(dist.lost_mass[n]), 1.0 - p0


def u_dp_curve(params: LawParams, model, n: int, M: int = 4096,
               tol: float = 1e-3) -> tuple[np.ndarray, np.ndarray, DpDistribution]:
    """Per-generation survival brackets (lo, hi) from one conditioned DP run."""
    dist = dp_distribution(params, model, n, M, tol=tol,
                           init=_conditioned_init(params, M))
    hi = 1.0 - dist.pi[:, 0]
    lo = hi - dist.lost_mass
    return lo, hi, dist


# ---------------------------------------------------------------------------
# regime classification and tail fitting


@dataclass(frozen=True)
class RegimeReport:
    regime_id: str
    alpha: float | None
    correction: str            # none | log | inverse-log
    sigma: float
    fitted_alpha: float | None = None
    constants: dict = field(default_factory=dict)


def classify_regime(params: LawParams, tol: float = 1e-9,
                    assume: str | None = None) -> RegimeReport:
    """Predicted decay of u_n: u_n ~ K * n^(-alpha) * (correction).

    Pure sign comparisons of (theta vs nu, sigma vs 1, sigma + delta/nu
    vs 1, delta vs nu) with boundary tolerance `tol`.  The interior
    boundaries sigma = 1 and sigma + delta/nu = 1 are measure-zero in
    floating point, so `assume` in {"R2", "R4"} forces the corresponding
    branch after a loose sanity check.
    """
    nu, th, dl = params.nu, params.theta, params.delta
    sigma = params.kappa2 / (params.kappa1 * nu)
    rho = dl / nu

    def close(x: float, y: float) -> bool:
        return abs(x - y) <= tol * max(1.0, abs(x), abs(y))

    if assume is not None:
        if assume == "R2":
            if abs(sigma - 1.0) > 1e-6:
                raise WrongRegimeError(f"sigma={sigma} too far from 1 for R2")
            return RegimeReport("R2", 0.0, "inverse-log", sigma)
        if assume == "R4":
            if abs(sigma + rho - 1.0) > 1e-6:
                raise WrongRegimeError(
                    f"sigma+delta/nu={sigma + rho} too far from 1 for R4")
            return RegimeReport("R4", 1.0 - sigma, "log", sigma)
        raise ValueError("assume must be one of 'R2', 'R4'")

    if close(th, nu):
        if close(sigma, 1.0):
            return RegimeReport("R2", 0.0, "inverse-log", sigma)
        if sigma > 1.0:
            return RegimeReport("R1", 0.0, "none", sigma)
        if close(sigma + rho, 1.0):
            return RegimeReport("R4", 1.0 - sigma, "log", sigma)
        if sigma + rho > 1.0:
            return RegimeReport("R3", 1.0 - sigma, "none", sigma)
        return RegimeReport("R5", rho, "none", sigma)
    if th < nu:
        return RegimeReport("R0", 0.0, "none", sigma)
    if dl < nu and not close(dl, nu):
        return RegimeReport("R6", rho, "none", sigma)
    return RegimeReport("UNCOVERED", None, "none", sigma)


def fit_tail(u: np.ndarray, regime: RegimeReport) -> RegimeReport:
    """Least-squares tail read-off of the survival sequence.

    Fits the slope of log u against log n over the last decade (for R4,
    of log(u / log n)), then refines the regime constant K by a two-term
    fit u * n^alpha = K + C * n^(-beta) where the regime pins beta.
    Returns a copy of `regime` with fitted_alpha and constants filled.
    """
    u = np.asarray(u, dtype=float)
    if len(u) < 10 ** 3:
        raise InsufficientLengthError(f"need >= 1000 values, got {len(u)}")
    nmax = len(u) - 1
    n = np.arange(1, nmax + 1, dtype=float)
    v = u[1:]
    dec = n >= nmax / 10.0
    logn = np.log(n[dec])

    if regime.regime_id == "R4":
        y = np.log(v[dec] / np.log(n[dec]))
    else:
        y = np.log(v[dec])
    slope = np.polyfit(logn, y, 1)[0]
    fitted = -slope

    consts: dict = {}
    sigma = regime.sigma
    beta = None
    if regime.regime_id == "R1":
        beta = sigma - 1.0
    elif regime.regime_id == "R3":
        beta = regime.alpha
    elif regime.regime_id == "R5":
        beta = 1.0 - sigma - regime.alpha
    wide = n >= max(100.0, nmax / 100.0)
    if regime.regime_id == "R2":
        scaled = v[dec] * np.log(n[dec])
        consts["K"] = float(scaled[-1])
        consts["log_drift"] = float(
            (scaled.max() - scaled.min()) / scaled.mean())
    elif beta is not None and beta > 0.0:
        z = v[wide] * n[wide] ** regime.alpha
        basis = np.vstack([np.ones(z.size), n[wide] ** (-beta)]).T
        coef, *_ = np.linalg.lstsq(basis, z, rcond=None)
        consts["K"] = float(coef[0])
        consts["beta"] = beta
    elif regime.alpha is not None:
        z = v[dec] * n[dec] ** regime.alpha
        if regime.regime_id == "R4":
            z = z / np.log(n[dec])
        consts["K"] = float(z[-1])
    return dataclasses.replace(regime, fitted_alpha=float(fitted),
                               constants=consts)


# ---------------------------------------------------------------------------
# asymptotics of gamma_n^(0)


@dataclass(frozen=True)
class GammaReport:
    branch: str                       # exp-decay | power | convergent
    estimate: float                   # slope, c1 proxy, or c0 estimate
    reference: float | None = None    # explicit c2 when theta < nu
    rel_error: float | None = None
    drift: float | None = None
    interval: tuple[float, float] | None = None


def gamma_asymptotics(params: LawParams, n_max: int) -> GammaReport:
    """Numerical read-off of how gamma_n^(0) behaves for large n.

    theta < nu: -log gamma behaves like c2 * n^(1 - theta/nu); the fitted
    slope is compared against the explicit constant.  theta = nu: gamma
    decays like c1 * n^(-sigma); reports the stabilized product and its
    drift over the last decade.  theta > nu: gamma converges; reports an
    extrapolated limit plus a rigorous enclosure from integral bounds on
    the tail sum of q_j^theta.
    """
    nu, th = params.nu, params.theta
    q = q_iterate(params, 0.0, n_max).q.astype(np.longdouble)
    partial = np.concatenate(([np.longdouble(0.0)],
                              np.cumsum(q ** np.longdouble(th))))
    neglog = float(params.kappa2) * partial[:-1]      # -log gamma0_n at n

    ns = np.unique(np.geomspace(max(10, n_max // 10), n_max, 200).astype(int))
    if th < nu and abs(th - nu) > 1e-9:
        x = ns.astype(float) ** (1.0 - th / nu)
        slope = float(np.polyfit(x, neglog[ns].astype(float), 1)[0])
        c2 = (params.kappa1 ** (-th / nu) * params.kappa2
              * nu ** (1.0 - th / nu) / (nu - th))
        return GammaReport("exp-decay", slope, reference=c2,
                           rel_error=abs(slope - c2) / c2)
    if abs(th - nu) <= 1e-9:
        sigma = params.kappa2 / (params.kappa1 * nu)
        scaled = np.exp(-neglog[ns].astype(float)) * ns.astype(float) ** sigma
        drift = float((scaled.max() - scaled.min()) / scaled.mean())
        return GammaReport("power", float(scaled[-1]), drift=drift)
    # theta > nu: gamma0 converges to c0 > 0
    J = n_max
    S = float(neglog[J]) / params.kappa2
    qJ = float(q[J])
    CJ = (1.0 - params.kappa1 * qJ ** nu) ** (-nu - 1.0)
    lo_tail = qJ ** (th - nu) / (params.kappa1 * CJ * (th - nu))
    hi_tail = qJ ** th + qJ ** (th - nu) / (params.kappa1 * (th - nu))
    interval = (math.exp(-params.kappa2 * (S + hi_tail)),
                math.exp(-params.kappa2 * (S + lo_tail)))
    x = ns.astype(float) ** (1.0 - th / nu)
    intercept = float(np.polyfit(x, neglog[ns].astype(float), 1)[1])
    est = math.exp(-intercept)
    cauchy = abs(math.exp(-float(neglog[J])) -
                 math.exp(-float(neglog[J // 2])))
    return GammaReport("convergent", est, interval=interval, drift=cauchy)
