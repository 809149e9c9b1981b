"""Exact stochastic simulation of the branching-with-immigration variants.

Three dynamics share one engine.  With L_n the summed offspring of the
previous generation and Y_n the immigration draw:

    UNSTOPPED_Z : X_n = L_n + Y_n always
    STOPPED_Z   : same one-step law, but absorbed at the first X_n = 0
    GATED_W     : X_n = L_n + Y_n if L_n > 0, else 0; absorbing

Replicates run in fixed-size blocks of 8192, each block on its own
counter-derived RNG stream, so results are byte-identical for a given
master seed no matter how many worker threads participate.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConditioningError
from .laws import (LawParams, sample_immigration, sample_initial,
                   sample_offspring)
from .rng import stream

BLOCK = 8192
_CHUNK = 1 << 22         # per-individual draws processed this many at a time
DEFAULT_CAP = 10 ** 9


class Model(str, enum.Enum):
    UNSTOPPED_Z = "z"
    STOPPED_Z = "stopped"
    GATED_W = "gated"


@dataclass(frozen=True)
class Trajectory:
    """One simulated path.

    `life` is the first index with a zero population, or None when the path
    was censored first; `censoring` is then "horizon" or "cap".
    """

    values: np.ndarray
    life: int | None
    model: Model
    censoring: str | None = None


@dataclass
class BatchStats:
    """Accumulated Monte Carlo output, deterministic for a fixed seed."""

    reps: int
    seed: int
    survival_counts: np.ndarray        # replicates with X_n > 0, per generation
    censored: int = 0
    censored_counts: np.ndarray | None = None       # cap-censored by gen n
    scaled_laplace_sums: np.ndarray | None = None   # [sum, sum of squares]
    laplace_survivors: int = 0

    def survival(self) -> np.ndarray:
        return self.survival_counts / self.reps

    def survival_se(self) -> np.ndarray:
        p = self.survival()
        return np.sqrt(p * (1.0 - p) / self.reps)


def _offspring_sums(params: LawParams, rng: np.random.Generator,
                    pops: np.ndarray) -> np.ndarray:
    """Summed offspring for each population in `pops` (entries >= 1).

    nu = 1 uses the multinomial split of the three-point offspring law
    (exactly the same joint law as per-individual draws, without the
    per-individual cost); nu < 1 draws every individual through the
    inverse-cdf sampler in bounded chunks.
    """
    if params.nu == 1.0:
        p2 = params.kappa1
        p1 = 1.0 - 2.0 * params.kappa1
        n2 = rng.binomial(pops, p2)
        n1 = rng.binomial(pops - n2, p1 / (1.0 - p2))
        return 2 * n2 + n1
    ends = np.cumsum(pops)
    starts = ends - pops
    total = int(ends[-1])
    sums = np.zeros(len(pops), dtype=np.int64)
    pos = 0
    while pos < total:
        m = min(_CHUNK, total - pos)
        draws = sample_offspring(params, rng, m)
        i0 = int(np.searchsorted(ends, pos, side="right"))
        i1 = int(np.searchsorted(ends, pos + m - 1, side="right"))
        seg = (np.maximum(starts[i0:i1 + 1], pos) - pos).astype(np.intp)
        sums[i0:i1 + 1] += np.add.reduceat(draws, seg)
        pos += m
    return sums


def _evolve_block(params: LawParams, model: Model, horizon: int, cap: int,
                  rng: np.random.Generator, size: int, scale: float | None):
    """Run one block of replicates; returns per-generation positive counts,
    never-hit-zero counts, the censored total, and optional Laplace sums
    over survivors at the final generation."""
    vals = sample_initial(params, rng, size)
    frozen = vals > cap                          # cap-censored, kept as-is
    ever_zero = vals == 0
    pos_counts = np.empty(horizon + 1, dtype=np.int64)
    life_counts = np.empty(horizon + 1, dtype=np.int64)
    cens_counts = np.zeros(horizon + 1, dtype=np.int64)
    cens_counts[0] = np.count_nonzero(frozen)
    pos_counts[0] = np.count_nonzero(vals > 0)
    life_counts[0] = size - np.count_nonzero(ever_zero)
    for n in range(1, horizon + 1):
        if model is Model.UNSTOPPED_Z:
            active = ~frozen
        else:
            active = (vals > 0) & ~frozen
        idx = np.nonzero(active)[0]
        if idx.size:
            pops = vals[idx]
            lam = np.zeros(idx.size, dtype=np.int64)
            has_kids = pops > 0
            if np.any(has_kids):
                lam[has_kids] = _offspring_sums(params, rng, pops[has_kids])
            if model is Model.GATED_W:
                nxt = np.zeros(idx.size, dtype=np.int64)
                g = np.nonzero(lam > 0)[0]
                if g.size:
                    nxt[g] = lam[g] + sample_immigration(params, rng, g.size)
            else:
                nxt = lam + sample_immigration(params, rng, idx.size)
            vals[idx] = nxt
            over = idx[nxt > cap]
            frozen[over] = True
        ever_zero |= vals == 0
        pos_counts[n] = np.count_nonzero(vals > 0)
        life_counts[n] = size - np.count_nonzero(ever_zero)
        cens_counts[n] = np.count_nonzero(frozen)
    lap = None
    survivors = 0
    if scale is not None:
        alive = vals > 0
        survivors = int(np.count_nonzero(alive))
        contrib = np.exp(-scale * vals[alive].astype(float))
        lap = np.array([contrib.sum(), np.square(contrib).sum()])
    return pos_counts, life_counts, cens_counts, lap, survivors


def _run_batch(params: LawParams, model, horizon: int, reps: int, seed: int,
               threads: int | None, cap: int = DEFAULT_CAP,
               scale: float | None = None):
    model = Model(model)
    nblocks = (reps + BLOCK - 1) // BLOCK
    sizes = [min(BLOCK, reps - i * BLOCK) for i in range(nblocks)]

    def one(i: int):
        return _evolve_block(params, model, horizon, cap,
                             stream(seed, i), sizes[i], scale)

    if threads is None or threads <= 1 or nblocks == 1:
        results = [one(i) for i in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(nblocks)))

    pos = np.sum([r[0] for r in results], axis=0)
    life = np.sum([r[1] for r in results], axis=0)
    cens = np.sum([r[2] for r in results], axis=0)
    lap = None
    survivors = 0
    if scale is not None:
        lap = np.array([math.fsum(r[3][0] for r in results),
                        math.fsum(r[3][1] for r in results)])
        survivors = sum(r[4] for r in results)
    return pos, life, cens, lap, survivors


def simulate(params: LawParams, model, horizon: int, cap: int = DEFAULT_CAP,
             rng: np.random.Generator | None = None) -> Trajectory:
    """Simulate a single trajectory up to `horizon` generations."""
    if horizon < 1 or cap < 1:
        raise ValueError("horizon and cap must be >= 1")
    model = Model(model)
    if rng is None:
        rng = stream(0, 0)
    vals = np.zeros(horizon + 1, dtype=np.int64)
    vals[0] = sample_initial(params, rng, 1)[0]
    censoring = None
    if vals[0] > cap:
        return Trajectory(values=vals[:1], life=None, model=model,
                          censoring="cap")
    for n in range(1, horizon + 1):
        w = int(vals[n - 1])
        if model is not Model.UNSTOPPED_Z and w == 0:
            break
        lam = int(_offspring_sums(params, rng, np.array([w]))[0]) if w else 0
        if model is Model.GATED_W and lam == 0:
            vals[n] = 0
        else:
            vals[n] = lam + int(sample_immigration(params, rng, 1)[0])
        if vals[n] > cap:
            censoring = "cap"
            vals = vals[:n + 1]
            break
    zeros = np.nonzero(vals == 0)[0]
    life = int(zeros[0]) if zeros.size else None
    if life is None and censoring is None:
        censoring = "horizon"
    return Trajectory(values=vals, life=life, model=model, censoring=censoring)


def estimate_survival(params: LawParams, model, horizon: int, reps: int,
                      seed: int, threads: int | None = None,
                      cap: int = DEFAULT_CAP) -> BatchStats:
    """Empirical survival curve: counts of X_n > 0 per generation.

    Cap-censored replicates keep counting as alive (the chance that a
    population above `cap` dies within a desk-scale horizon is negligible;
    the censored count is reported so the bias is visible).
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    pos, _life, cens, _l, _s = _run_batch(
        params, model, horizon, reps, seed, threads, cap)
    return BatchStats(reps=reps, seed=seed, survival_counts=pos,
                      censored=int(cens[-1]), censored_counts=cens)


def sample_life_period(params: LawParams, model, reps: int, horizon: int,
                       seed: int, threads: int | None = None,
                       cap: int = DEFAULT_CAP) -> BatchStats:
    """Empirical tail of the life period: counts of {no zero through n}.

    For the absorbing variants this coincides with estimate_survival;
    for UNSTOPPED_Z it differs (the process can revive after a zero).
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    _pos, life, cens, _l, _s = _run_batch(
        params, model, horizon, reps, seed, threads, cap)
    return BatchStats(reps=reps, seed=seed, survival_counts=life,
                      censored=int(cens[-1]), censored_counts=cens)


@dataclass(frozen=True)
class LaplaceEstimate:
    value: float
    se: float
    survivors: int
    censored: int


def conditional_laplace_mc(params: LawParams, model, n: int, scale: float,
                           reps: int, seed: int,
                           threads: int | None = None,
                           cap: int = DEFAULT_CAP) -> LaplaceEstimate:
    """Monte Carlo estimate of E[exp(-scale * X_n) | X_n > 0]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if scale < 0.0:
        raise ValueError("scale must be nonnegative")
    _pos, _life, cens, lap, survivors = _run_batch(
        params, model, n, reps, seed, threads, cap, scale=scale)
    if survivors == 0:
        raise DegenerateConditioningError(
            f"no replicate of {reps} survived to generation {n}")
    mean = lap[0] / survivors
    var = max(lap[1] / survivors - mean * mean, 0.0)
    se = math.sqrt(var / survivors)
    return LaplaceEstimate(value=mean, se=se, survivors=survivors,
                           censored=int(cens[-1]))
