"""Law tables and samplers against independent series/transform oracles."""

import math

import numpy as np
import pytest

from gwimm.errors import DegenerateThetaError, NonPmfError, OutOfRangeError
from gwimm.laws import (LawParams, immigration_pgf, immigration_pmf,
                        initial_pgf, initial_pmf, offspring_mean_tail,
                        offspring_pgf, offspring_pmf, sample_immigration,
                        sample_initial, sample_offspring, sample_sibuya,
                        stable_positive, _offspring_tail_value,
                        _sibuya_tail_value)
from gwimm.rng import stream

CANON = LawParams(nu=1.0, theta=1.0, delta=1.0, kappa0=1.0, kappa1=0.5,
                  kappa2=1.0)


def binom_coeff(a: float, k: int) -> float:
    """Generalized binomial C(a, k) as an explicit product (oracle route)."""
    out = 1.0
    for j in range(k):
        out *= (a - j) / (j + 1)
    return out


def dft_pmf(pgf, nmax: int, npts: int = 512, radius: float = 0.9):
    """Invert a pgf by sampling on a sub-unit circle (oracle route).

    Aliasing error is below radius**npts ~ 1e-23, so the only noise left
    is the radius**-k amplification of float roundoff in the DFT.
    """
    z = radius * np.exp(2j * np.pi * np.arange(npts) / npts)
    vals = pgf(z)
    coef = np.fft.fft(vals).real / npts
    return coef[:nmax + 1] / radius ** np.arange(nmax + 1)


# ---------------------------------------------------------------------------
# pmf tables vs independent expansions


@pytest.mark.parametrize("nu,kappa1", [(1.0, 0.5), (0.5, 0.5), (0.73, 0.4)])
def test_offspring_pmf_matches_binomial_series(nu, kappa1):
    # F(s) = s + kappa1*(1-s)**(1+nu): coefficient of s^k is
    # [k == 1] + kappa1 * (-1)^k * C(1+nu, k)
    p = LawParams(nu=nu, theta=1.0, delta=1.0, kappa0=1.0, kappa1=kappa1,
                  kappa2=1.0)
    table = offspring_pmf(p, 40)
    for k in range(41):
        expect = kappa1 * (-1.0) ** k * binom_coeff(1.0 + nu, k)
        if k == 1:
            expect += 1.0
        assert table.probs[k] == pytest.approx(expect, abs=1e-14)
        assert table.probs[k] >= 0.0


@pytest.mark.parametrize("delta,kappa0", [(1.0, 1.0), (0.5, 0.5), (0.31, 0.9)])
def test_initial_pmf_matches_binomial_series(delta, kappa0):
    p = LawParams(nu=1.0, theta=1.0, delta=delta, kappa0=kappa0, kappa1=0.5,
                  kappa2=1.0)
    table = initial_pmf(p, 40)
    assert table.probs[0] == pytest.approx(1.0 - kappa0, abs=1e-15)
    for k in range(1, 41):
        expect = -kappa0 * (-1.0) ** k * binom_coeff(delta, k)
        assert table.probs[k] == pytest.approx(expect, abs=1e-14)


@pytest.mark.parametrize("theta,kappa2", [(1.0, 1.0), (0.5, 1.0),
                                          (0.5, 0.25), (0.8, 2.0)])
def test_immigration_pmf_matches_circle_inversion(theta, kappa2):
    p = LawParams(nu=1.0, theta=theta, delta=1.0, kappa0=1.0, kappa1=0.5,
                  kappa2=kappa2)
    table = immigration_pmf(p, 60)
    oracle = dft_pmf(lambda z: np.exp(-kappa2 * (1.0 - z) ** theta), 60)
    assert np.max(np.abs(table.probs - oracle)) < 1e-9


def test_immigration_theta_one_is_poisson():
    table = immigration_pmf(CANON, 30)
    for k in range(31):
        poisson = math.exp(-1.0) / math.factorial(k)
        assert table.probs[k] == pytest.approx(poisson, rel=1e-12)


def test_immigration_hand_values():
    # b_0 = exp(-kappa2) and b_1 = kappa2*theta*exp(-kappa2) directly
    p = LawParams(nu=1.0, theta=0.5, delta=1.0, kappa0=1.0, kappa1=0.5,
                  kappa2=1.0)
    t = immigration_pmf(p, 3)
    assert t.probs[0] == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert t.probs[1] == pytest.approx(0.5 * math.exp(-1.0), rel=1e-14)


# ---------------------------------------------------------------------------
# mass accounting and closed-form tails


@pytest.mark.parametrize("nmax", [0, 1, 2, 7, 200])
def test_offspring_mass_accounting(nmax):
    p = LawParams(nu=0.5, theta=1.0, delta=1.0, kappa0=1.0, kappa1=0.5,
                  kappa2=1.0)
    t = offspring_pmf(p, nmax)
    assert math.fsum(t.probs.tolist()) + t.truncation_mass == \
        pytest.approx(1.0, abs=1e-13)
    assert t.truncation_mass >= 0.0


@pytest.mark.parametrize("nmax", [0, 1, 5, 300])
def test_initial_mass_accounting(nmax):
    p = LawParams(nu=1.0, theta=1.0, delta=0.4, kappa0=0.7, kappa1=0.5,
                  kappa2=1.0)
    t = initial_pmf(p, nmax)
    assert math.fsum(t.probs.tolist()) + t.truncation_mass == \
        pytest.approx(1.0, abs=1e-13)


def test_offspring_tail_closed_form():
    # mass beyond n has survival form kappa1*nu*Gamma(n-nu)/(Gamma(1-nu)*
    # Gamma(n+1)); the table reaches it through the ratio recurrence instead
    nu, k1 = 0.5, 0.5
    t = offspring_pmf(LawParams(nu, 1.0, 1.0, 1.0, k1, 1.0), 100)
    ref = k1 * nu * math.exp(math.lgamma(100 - nu) - math.lgamma(1.0 - nu)
                             - math.lgamma(101.0))
    assert t.truncation_mass == pytest.approx(ref, rel=1e-12)


def test_truncated_pgf_brackets_closed_form():
    # |pgf(s) - sum p_k s^k| <= truncation_mass for every s in [0, 1]
    p = LawParams(nu=0.5, theta=0.5, delta=0.5, kappa0=0.8, kappa1=0.5,
                  kappa2=1.3)
    s = np.linspace(0.0, 1.0, 21)
    pows = s[:, None] ** np.arange(81)[None, :]
    for pgf, table in [(offspring_pgf, offspring_pmf(p, 80)),
                       (immigration_pgf, immigration_pmf(p, 80)),
                       (initial_pgf, initial_pmf(p, 80))]:
        partial = pows @ table.probs
        gap = np.abs(np.asarray(pgf(p, s)) - partial)
        assert np.all(gap <= table.truncation_mass + 1e-12)


def test_critical_mean_via_exact_tail():
    # sum_{k<=n} k p_k + mean-tail(n) = 1 for the critical offspring law
    p = LawParams(nu=0.5, theta=1.0, delta=1.0, kappa0=1.0, kappa1=0.5,
                  kappa2=1.0)
    for n in (1, 10, 500):
        t = offspring_pmf(p, n)
        partial = math.fsum((np.arange(n + 1) * t.probs).tolist())
        assert partial + offspring_mean_tail(p, n) == \
            pytest.approx(1.0, abs=1e-12)
    assert offspring_mean_tail(CANON, 1) == pytest.approx(1.0, abs=1e-15)
    assert offspring_mean_tail(CANON, 2) == 0.0


# ---------------------------------------------------------------------------
# samplers


def test_sample_offspring_cell_frequencies():
    p = LawParams(nu=0.5, theta=1.0, delta=1.0, kappa0=1.0, kappa1=0.5,
                  kappa2=1.0)
    n = 200_000
    draws = sample_offspring(p, stream(11, 0), n)
    table = offspring_pmf(p, 6).probs
    for k in (0, 1, 2, 5):
        freq = np.mean(draws == k)
        se = math.sqrt(table[k] * (1.0 - table[k]) / n)
        assert abs(freq - table[k]) < 4.0 * se


def test_sample_initial_atom_and_sibuya_split():
    p = LawParams(nu=1.0, theta=1.0, delta=0.5, kappa0=0.6, kappa1=0.5,
                  kappa2=1.0)
    n = 200_000
    draws = sample_initial(p, stream(12, 0), n)
    z0 = np.mean(draws == 0)
    se = math.sqrt(0.4 * 0.6 / n)
    assert abs(z0 - 0.4) < 4.0 * se
    # positive part restricted to {1,2}: Sibuya pins delta and delta(1-delta)/2
    f1 = np.mean(draws == 1)
    assert abs(f1 - 0.6 * 0.5) < 4.0 * math.sqrt(0.3 * 0.7 / n)


def test_sample_immigration_poisson_route():
    draws = sample_immigration(CANON, stream(13, 0), 100_000)
    ref = np.random.default_rng(99).poisson(1.0, 100_000)
    assert abs(draws.mean() - 1.0) < 4.0 / math.sqrt(100_000)
    assert draws.dtype == ref.dtype


def test_sample_immigration_heavy_cells():
    p = LawParams(nu=1.0, theta=0.5, delta=1.0, kappa0=1.0, kappa1=0.5,
                  kappa2=1.0)
    n = 200_000
    draws = sample_immigration(p, stream(14, 0), n)
    table = immigration_pmf(p, 4).probs
    for k in (0, 1, 3):
        freq = np.mean(draws == k)
        se = math.sqrt(table[k] * (1.0 - table[k]) / n)
        assert abs(freq - table[k]) < 4.0 * se


def test_sibuya_survival_function():
    # P(X > n) = prod_{j<=n} (1 - delta/j), checked at n = 1 and n = 4
    delta, n = 0.5, 200_000
    draws = sample_sibuya(delta, stream(15, 0), n)
    for m in (1, 4):
        surv = 1.0
        for j in range(1, m + 1):
            surv *= 1.0 - delta / j
        freq = np.mean(draws > m)
        assert abs(freq - surv) < 4.0 * math.sqrt(surv * (1 - surv) / n)


def test_tail_inverse_against_brute_walk():
    # smallest n with S(n) < v, against a direct product walk
    delta, v = 0.5, 0.01
    got = _sibuya_tail_value(delta, v, 2)
    surv, n = 1.0 - delta, 1
    while surv >= v:
        n += 1
        surv *= (n - delta) / n
    assert got == n

    nu, k1, v = 0.5, 0.5, 0.02
    got = _offspring_tail_value(nu, k1, v, 3)
    t = offspring_pmf(LawParams(nu, 1.0, 1.0, 1.0, k1, 1.0), 5000)
    surv = np.cumsum(t.probs[::-1])[::-1]  # surv[k] = P(X >= k)
    brute = int(np.argmax(t.truncation_mass + surv[1:] < v))  # P(X > n)
    assert got == brute


def test_sampler_reproducibility():
    p = LawParams(nu=0.5, theta=0.5, delta=0.5, kappa0=0.5, kappa1=0.5,
                  kappa2=1.0)
    a = sample_offspring(p, stream(3, 7), 1000)
    b = sample_offspring(p, stream(3, 7), 1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_offspring(p, stream(3, 8), 1000))


# ---------------------------------------------------------------------------
# one-sided stable variates


def test_stable_laplace_transform():
    # E exp(-lam * S) = exp(-lam**theta)
    n = 200_000
    for theta in (0.3, 0.7):
        s = stable_positive(theta, stream(21, 0), n)
        for lam in (0.5, 2.0):
            v = np.exp(-lam * s)
            z = (v.mean() - math.exp(-lam ** theta)) \
                / (v.std(ddof=1) / math.sqrt(n))
            assert abs(z) < 4.0


def test_stable_rejects_degenerate_and_bad_theta():
    rng = stream(0, 0)
    with pytest.raises(DegenerateThetaError):
        stable_positive(1.0, rng, 10)
    with pytest.raises(OutOfRangeError):
        stable_positive(1.5, rng, 10)
    with pytest.raises(OutOfRangeError):
        stable_positive(0.0, rng, 10)


# ---------------------------------------------------------------------------
# parameter validation


def test_params_validation_taxonomy():
    with pytest.raises(OutOfRangeError):
        LawParams(nu=0.0, theta=1.0, delta=1.0, kappa0=1.0, kappa1=0.5,
                  kappa2=1.0)
    with pytest.raises(OutOfRangeError):
        LawParams(nu=1.0, theta=1.2, delta=1.0, kappa0=1.0, kappa1=0.5,
                  kappa2=1.0)
    with pytest.raises(OutOfRangeError):
        LawParams(nu=1.0, theta=1.0, delta=1.0, kappa0=0.0, kappa1=0.5,
                  kappa2=1.0)
    with pytest.raises(OutOfRangeError):
        LawParams(nu=1.0, theta=1.0, delta=1.0, kappa0=1.0, kappa1=0.5,
                  kappa2=0.0)
    with pytest.raises(NonPmfError):
        LawParams(nu=1.0, theta=1.0, delta=1.0, kappa0=1.0, kappa1=0.6,
                  kappa2=1.0)
    # boundary kappa1 = 1/(1+nu) is admissible (offspring atom p1 = 0)
    p = LawParams(nu=1.0, theta=1.0, delta=1.0, kappa0=1.0, kappa1=0.5,
                  kappa2=1.0)
    assert offspring_pmf(p, 2).probs[1] == 0.0
