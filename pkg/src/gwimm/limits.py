"""Evaluation of the limit statements at finite n.

Two families of scalings appear throughout: arguments shrink either with
the extinction rate (t = exp(-s * q_n(0)), balanced immigration theta =
nu) or polynomially (t = exp(-s * n**(-1/theta)), heavy immigration
theta < nu).  Each checker returns the worst-case deviation between the
finite-n quantity and its proven limit, so convergence can be watched
directly; the conditional transform of the stopped process additionally
gets an exact finite-n evaluator through the renewal decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (MissingConstantError, MissingRenewalError,
                     TolUnreachableError, WrongRegimeError)
from .laws import LawParams
from .pgf import gamma_sequences, h_n, q_iterate, q_last
from .renewal import RenewalTable, build_renewal, classify_regime, fit_tail
from ._num import fsum, gauss_legendre_panels

_BOUNDARY_TOL = 1e-9


def _sigma(params: LawParams) -> float:
    return params.kappa2 / (params.kappa1 * params.nu)


def _require_balanced(params: LawParams) -> None:
    if abs(params.theta - params.nu) > _BOUNDARY_TOL:
        raise WrongRegimeError(
            f"needs theta = nu, got theta={params.theta}, nu={params.nu}")


def _require_heavy(params: LawParams) -> None:
    if params.theta >= params.nu - _BOUNDARY_TOL:
        raise WrongRegimeError(
            f"needs theta < nu, got theta={params.theta}, nu={params.nu}")


# ---------------------------------------------------------------------------
# uniform gamma limits and Laplace limits of the unstopped process


def gamma_limit_dev_balanced(params: LawParams, t: float, n: int) -> float:
    """Worst deviation over k <= n of the normalized no-immigration weight.

    With theta = nu the weights obey
    (1 + (k/n) t^nu)^sigma * gamma_k^(0)(e^{-t q_n(0)}) -> 1 uniformly;
    returns sup_k of |expression - 1|.
    """
    _require_balanced(params)
    if t <= 0.0:
        raise ValueError("t must be positive")
    s = math.exp(-t * float(q_last(params, 0.0, n)))
    seq = gamma_sequences(params, s, n)
    k = np.arange(n + 1, dtype=float)
    pref = (1.0 + (k / n) * t ** params.nu) ** _sigma(params)
    return float(np.max(np.abs(pref * np.exp(seq.log_gamma0) - 1.0)))


def gamma_limit_dev_heavy_imm(params: LawParams, t: float, n: int) -> float:
    """Heavy-immigration analogue: e^{kappa2 t^theta k/n} *
    gamma_k^(0)(e^{-t n^{-1/theta}}) -> 1 uniformly over k <= n."""
    _require_heavy(params)
    if t <= 0.0:
        raise ValueError("t must be positive")
    s = math.exp(-t * n ** (-1.0 / params.theta))
    seq = gamma_sequences(params, s, n)
    k = np.arange(n + 1, dtype=float)
    expo = params.kappa2 * t ** params.theta * k / n
    return float(np.max(np.abs(np.exp(expo + seq.log_gamma0) - 1.0)))


def laplace_limit_dev_balanced(params: LawParams, t: float, n: int) -> float:
    """|H_n(e^{-t q_n(0)}) - (1 + t^nu)^{-sigma}| for theta = nu."""
    _require_balanced(params)
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    s = math.exp(-t * float(q_last(params, 0.0, n)))
    limit = (1.0 + t ** params.nu) ** (-_sigma(params))
    return abs(h_n(params, s, n) - limit)


def laplace_limit_dev_heavy_imm(params: LawParams, t: float, n: int) -> float:
    """|H_n(e^{-t n^{-1/theta}}) - e^{-kappa2 t^theta}| for theta < nu."""
    _require_heavy(params)
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    s = math.exp(-t * n ** (-1.0 / params.theta))
    limit = math.exp(-params.kappa2 * t ** params.theta)
    return abs(h_n(params, s, n) - limit)


# ---------------------------------------------------------------------------
# stationary transform for theta > nu


def stationary_pgf(params: LawParams, s: float, tol: float = 1e-9,
                   max_iter: int = 10 ** 7) -> float:
    """Generating function of the stationary law when theta > nu.

    Evaluates prod_{j>=0} B(F_j(s)) = exp(-kappa2 * sum_j q_j(s)^theta)
    to additive tolerance `tol`: the sum is accumulated until integral
    bounds on its remainder (increments of q^{-nu} are squeezed between
    kappa1*nu and kappa1*nu*C_J) pin the product to within tol, then the
    midpoint of the enclosure is returned.
    """
    nu, th = params.nu, params.theta
    if th <= nu + _BOUNDARY_TOL:
        raise WrongRegimeError(
            f"stationary law needs theta > nu, got theta={th}, nu={nu}")
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if s == 1.0:
        return 1.0
    k1, k2 = params.kappa1, params.kappa2
    q = 1.0 - s
    total = 0.0
    j = 0
    while True:
        # remainder bracket for sum_{i >= j} q_i^theta, q_j = current q
        cj = (1.0 - k1 * q ** nu) ** (-nu - 1.0)
        lo = q ** (th - nu) / (k1 * cj * (th - nu))
        hi = q ** th + q ** (th - nu) / (k1 * (th - nu))
        if k2 * (hi - lo) <= tol:
            return math.exp(-k2 * (total + 0.5 * (lo + hi)))
        if j >= max_iter:
            raise TolUnreachableError(
                f"enclosure width {k2 * (hi - lo):.2e} > tol {tol:.1e} "
                f"after {max_iter} terms")
        total += q ** th
        q -= k1 * q ** (1.0 + nu)
        j += 1


# ---------------------------------------------------------------------------
# exact conditional transform of the stopped process


def conditional_laplace_exact(params: LawParams, n: int, s: float,
                              scaling: str = "by_qn",
                              table: RenewalTable | None = None) -> float:
    """E(t^{W_n} | W_n > 0) for the stopped process, evaluated exactly.

    The complement splits into the never-immigrated part and a renewal
    sum over the last immigration epoch:

        1 - E = gamma_n^(0)(t) q_n(t)^delta / u_n
              + sum_{k=1}^{n} (u_{n-k}/u_n) (gamma_{k-1}^(0)(t) - gamma_k^(0)(t))

    with t = exp(-s q_n(0)) for scaling "by_qn" and t = exp(-s n^{-1/theta})
    for "by_n_inv_theta".
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if s < 0.0:
        raise ValueError("s must be nonnegative")
    if scaling == "by_qn":
        t = math.exp(-s * float(q_last(params, 0.0, n)))
    elif scaling == "by_n_inv_theta":
        t = math.exp(-s * n ** (-1.0 / params.theta))
    else:
        raise ValueError("scaling must be 'by_qn' or 'by_n_inv_theta'")
    if table is None:
        table = build_renewal(params, n)
    if table.params != params:
        raise MissingRenewalError("renewal table built for different params")
    if len(table.u) < n + 1:
        raise MissingRenewalError(
            f"renewal table of length {len(table.u)} < n+1 = {n + 1}")
    q = q_iterate(params, t, n).q
    seq = gamma_sequences(params, t, n)
    g0 = np.exp(seq.log_gamma0)
    # conditioning on a positive start strips the kappa0 atom: the initial
    # transform becomes 1 - (1-x)^delta, so no kappa0 appears here
    xi1 = g0[n] * q[n] ** params.delta / table.u[n]
    w = g0[:-1] * (-np.expm1(-params.kappa2 * q[:-1] ** params.theta))
    xi2 = fsum(table.u[n - 1::-1] * w / table.u[n]) if n > 0 else 0.0
    return 1.0 - xi1 - xi2


# ---------------------------------------------------------------------------
# limit functions of the conditional transforms


def limit_laplace_heavy_imm(params: LawParams, s: float) -> float:
    """Limit of the conditional transform under n^{-1/theta} scaling."""
    _require_heavy(params)
    if s < 0.0:
        raise ValueError("s must be nonnegative")
    return math.exp(-params.kappa2 * s ** params.theta)


def limit_balanced_strong(params: LawParams, s: float) -> float:
    """(1 + s^nu)^{-sigma}: theta = nu with sigma >= 1."""
    _require_balanced(params)
    if s < 0.0:
        raise ValueError("s must be nonnegative")
    sg = _sigma(params)
    if sg < 1.0 - _BOUNDARY_TOL:
        raise WrongRegimeError(
            "sigma < 1: the limit is the singular-integral form, "
            "use lambda_limit")
    return (1.0 + s ** params.nu) ** (-sg)


def lambda_limit(params: LawParams, s: float, K5: float | None = None) -> float:
    """Two-branch limit function for theta = nu with sigma < 1.

    For sigma >= 1 - delta/nu the singular-integral form collapses to
    (1 + s^nu)^{-1} (used as a quadrature self-check); below that
    threshold the defective branch subtracts a K5-scaled atom:

        1 - (kappa0/K5)(1/(kappa1 nu))^{delta/nu} s^delta (1+s^nu)^{-sigma-delta/nu}
          - sigma s^nu Int_0^1 (1-x)^{-delta/nu} (1+s^nu x)^{-sigma-1} dx

    The endpoint singularity is removed exactly by y = (1-x)^{1-a}.
    """
    _require_balanced(params)
    if s < 0.0:
        raise ValueError("s must be nonnegative")
    if s == 0.0:
        return 1.0
    sg = _sigma(params)
    if sg >= 1.0:
        raise WrongRegimeError(f"lambda limit needs sigma < 1, got {sg}")
    rho = params.delta / params.nu
    sn = s ** params.nu
    if sg >= 1.0 - rho - _BOUNDARY_TOL:
        # integrand (1-x)^{sigma-1} (1+s^nu x)^{-sigma-1}; y = (1-x)^sigma
        def f(y):
            x = 1.0 - y ** (1.0 / sg)
            return (1.0 + sn * x) ** (-sg - 1.0)

        integral = gauss_legendre_panels(f, 0.0, 1.0, geometric_from=0.5) / sg
        return 1.0 - sg * sn * integral
    if K5 is None:
        raise MissingConstantError(
            "sigma < 1 - delta/nu: pass the fitted tail constant K5")
    c = 1.0 - rho

    def f(y):
        x = 1.0 - y ** (1.0 / c)
        return (1.0 + sn * x) ** (-sg - 1.0)

    integral = gauss_legendre_panels(f, 0.0, 1.0, geometric_from=0.5) / c
    atom = (params.kappa0 / K5) * (1.0 / (params.kappa1 * params.nu)) ** rho \
        * s ** params.delta * (1.0 + sn) ** (-sg - rho)
    return 1.0 - atom - sg * sn * integral


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class LimitCheck:
    theorem_id: str
    s_grid: np.ndarray
    n_grid: np.ndarray
    computed: np.ndarray       # shape (len(n_grid), len(s_grid))
    limit: np.ndarray          # shape (len(s_grid),)
    deviations: np.ndarray

    def monotone(self) -> bool:
        """True when every deviation column is nonincreasing in n."""
        return bool(np.all(np.diff(self.deviations, axis=0) <= 1e-15))


_SWEEPS = {
    "heavy_immigration": ("by_n_inv_theta", limit_laplace_heavy_imm),
    "balanced_strong": ("by_qn", limit_balanced_strong),
    "balanced_weak": ("by_qn", None),
}


def convergence_sweep(params: LawParams, theorem_id: str, s_grid, n_grid,
                      K5: float | None = None) -> LimitCheck:
    """Deviations of the exact conditional transform from its limit.

    `theorem_id` picks the scaling and the limit function; for
    "balanced_weak" the K5 constant is fitted from a length-10^5 renewal
    table when not supplied.
    """
    if theorem_id not in _SWEEPS:
        raise ValueError(f"unknown theorem_id {theorem_id!r}")
    s_grid = np.asarray(s_grid, dtype=float)
    n_grid = np.asarray(n_grid, dtype=int)
    if np.any(np.diff(s_grid) <= 0) or np.any(np.diff(n_grid) <= 0):
        raise ValueError("grids must be strictly increasing")
    scaling, limit_fn = _SWEEPS[theorem_id]
    if theorem_id == "balanced_weak":
        needs_k5 = _sigma(params) < 1.0 - params.delta / params.nu \
            - _BOUNDARY_TOL
        if needs_k5 and K5 is None:
            rep = fit_tail(build_renewal(params, 10 ** 5).u,
                           classify_regime(params))
            # K5 is the constant of the unconditional survival kappa0*u_n,
            # so the kappa0 in the atom of lambda_limit cancels against it
            K5 = params.kappa0 * rep.constants["K"]
        limit = np.array([lambda_limit(params, s, K5) for s in s_grid])
    else:
        limit = np.array([limit_fn(params, float(s)) for s in s_grid])
    table = build_renewal(params, int(n_grid[-1]))
    computed = np.empty((len(n_grid), len(s_grid)))
    for i, n in enumerate(n_grid):
        for j, s in enumerate(s_grid):
            computed[i, j] = conditional_laplace_exact(
                params, int(n), float(s), scaling, table)
    dev = np.abs(computed - limit[None, :])
    return LimitCheck(theorem_id=theorem_id, s_grid=s_grid, n_grid=n_grid,
                      computed=computed, limit=limit, deviations=dev)
