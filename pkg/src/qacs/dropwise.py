"""Drop-level analytic rates for heterogeneous terminals.

The closed forms in :mod:`qacs.analytics` condition on the link budget of
one selected terminal. For a concrete user drop the terminals have
different path gains, so the drop-level quantities mix those conditionals:

* the FAP selects each femto-MT with probability 1/K_F independently of
  everything else (NSNR selection is path-gain invariant), so femto-side
  quantities average the per-MT conditionals uniformly;
* macro-MTs request service with per-MT probabilities, so the number of
  requested beams follows a heterogeneous occupancy law and the served MT
  follows an inclusion-free dynamic program over request configurations.

The resulting rates are exact for the scheduler's joint law (conditional
NSNR densities are tilted by P(N_B = n | x)), which is what the
Monte-Carlo engine estimates.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from . import analytics
from .analytics import (DEGENERATE_EPS, FemtoAnalysisParams, MacroAnalysisParams,
                        occupancy_given_requests)
from .model import LinkBudget, ScenarioConfig
from .quadrature import DEFAULT_QUADRATURE, Quadrature


@dataclass(frozen=True)
class DropAnalysis:
    """Analytic per-drop summary."""

    r_f: float
    r_m: float
    pmf_nq: np.ndarray
    pmf_nb: np.ndarray
    e_nq: float
    e_nb: float
    served_probs: np.ndarray      # P(macro-MT k served, some MT served | N_Q = m), rows m
    unreachable_qos: bool


def _cdf_gamma_mk_vec(gamma: float, m: int, lam: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Best-beam SINR CDF at one gamma for a vector of link budgets."""
    out = np.zeros_like(lam)
    for j in range(m + 1):
        sign = -1.0 if j % 2 else 1.0
        out += sign * comb(m, j) * np.exp(-j * mu * gamma) / (1.0 + j * lam * gamma)
    return np.clip(out, 0.0, 1.0)


def served_probabilities(m: int, f_at_threshold: np.ndarray) -> np.ndarray:
    """P(MT k is served | N_Q = m) for per-MT failure probabilities.

    Each of the K MTs independently requests (with probability 1 - F_k) a
    uniformly random beam out of m; the scheduler picks the occupied beam
    with the least femto interference, which is uniform over occupied
    beams, then a uniform requester of that beam. Computed exactly with a
    dynamic program over (requesters sharing the MT's beam, other occupied
    beams). The entries sum to 1 - prod(F_k) = P(anyone served).
    """
    F = np.asarray(f_at_threshold, dtype=float)
    p = 1.0 - F
    K = len(F)
    out = np.zeros(K)
    o = np.arange(m)
    for k in range(K):
        dp = np.zeros((K, m))
        dp[0, 0] = 1.0
        for l in range(K):
            if l == k:
                continue
            new = dp * F[l]
            new[1:, :] += dp[:-1, :] * (p[l] / m)          # joins MT k's beam
            if m > 1:
                new += dp * (p[l] * o[None, :] / m)        # re-hits an occupied beam
                new[:, 1:] += dp[:, :-1] * (p[l] * (m - 1 - o[:-1])[None, :] / m)
            dp = new
        c0 = np.arange(K)[:, None]
        out[k] = p[k] * float((dp / ((1.0 + o[None, :]) * (1.0 + c0))).sum())
    return out


def analyze_drop(cfg: ScenarioConfig, budget: LinkBudget,
                 quad: Quadrature = DEFAULT_QUADRATURE) -> DropAnalysis:
    """Exact analytic rates and beam-count distributions for one drop."""
    k_f, n_m = cfg.n_femto_mts, cfg.n_mbs_antennas
    k_m = cfg.n_macro_mts
    lam_f = np.atleast_1d(np.asarray(budget.lambda_f, dtype=float))
    mu_f = np.atleast_1d(np.asarray(budget.mu_f, dtype=float))
    lam_m = np.atleast_1d(np.asarray(budget.lambda_m, dtype=float))
    mu_m = np.atleast_1d(np.asarray(budget.mu_m, dtype=float))

    femto_params = [
        FemtoAnalysisParams(n_total=k_f * cfg.n_fap_antennas, n_m=n_m,
                            lambda_f=float(lam_f[k]), mu_f=float(mu_f[k]),
                            gamma_f_req=cfg.gamma_f_lin)
        for k in range(k_f)
    ]

    # N_Q distribution, mixed uniformly over the selected femto-MT
    pmf_nq_per_k = np.array([[analytics.pmf_nq(m, p, quad) for m in range(n_m + 1)]
                             for p in femto_params])
    pmf_nq = pmf_nq_per_k.mean(axis=0)

    # macro side per qualified-beam count: per-MT failure probabilities,
    # heterogeneous occupancy of requested beams, served-MT distribution
    gamma_m = cfg.gamma_m_lin
    occ = np.zeros((n_m + 1, n_m + 1))      # occ[m, n] = P(N_B = n | N_Q = m)
    served = np.zeros((n_m + 1, k_m))
    rate_m_given = np.zeros(n_m + 1)
    any_reachable = False
    for m in range(1, n_m + 1):
        Fk = _cdf_gamma_mk_vec(gamma_m, m, lam_m, mu_m)
        # spot-validate the closed forms at a representative link budget
        k_rep = int(np.argsort(lam_m)[len(lam_m) // 2])
        analytics._validate_macro_forms(
            MacroAnalysisParams(n_q=m, k_m=k_m, lambda_m=float(lam_m[k_rep]),
                                mu_m=float(mu_m[k_rep]), gamma_m_req=gamma_m), quad)
        for n in range(0, m + 1):
            occ[m, n] = occupancy_given_requests(n, m, k_m, Fk)
        sp = served_probabilities(m, Fk)
        served[m] = sp
        if sp.sum() > DEGENERATE_EPS:
            any_reachable = True
        weight_floor = 1e-9 * max(sp.max(), 1e-300)
        total = 0.0
        for k in range(k_m):
            if sp[k] <= weight_floor or 1.0 - Fk[k] <= DEGENERATE_EPS:
                continue
            pk = MacroAnalysisParams(n_q=m, k_m=k_m, lambda_m=float(lam_m[k]),
                                     mu_m=float(mu_m[k]), gamma_m_req=gamma_m)
            total += sp[k] * analytics._rate_gamma_mk_truncated(m, pk, quad)
        rate_m_given[m] = total

    r_m = float(np.dot(pmf_nq[1:], rate_m_given[1:]))

    # N_B distribution (the occupancy law does not depend on the selected
    # femto-MT, so it mixes through pmf_nq directly)
    pmf_nb = np.zeros(n_m + 1)
    pmf_nb[0] = pmf_nq[0] + float(np.dot(pmf_nq[1:], occ[1:, 0]))
    for n in range(1, n_m + 1):
        pmf_nb[n] = float(np.dot(pmf_nq[1:], occ[1:, n]))

    # femto rate: uniform mixture over the selected MT, each term tilted
    # by P(N_B = n | x) so the conditional joint law is exact
    r_f = 0.0
    for p in femto_params:
        r_f += analytics._rate_gamma_f_zero(
            p, quad, weight_fn=analytics._nb_weight_fn(0, p, occ)) / k_f
        for n in range(1, n_m + 1):
            r_f += analytics._rate_gamma_f_joint(
                n, p, weight_fn=analytics._nb_weight_fn(n, p, occ)) / k_f

    counts = np.arange(n_m + 1, dtype=float)
    return DropAnalysis(
        r_f=r_f, r_m=r_m, pmf_nq=pmf_nq, pmf_nb=pmf_nb,
        e_nq=float(np.dot(counts, pmf_nq)), e_nb=float(np.dot(counts, pmf_nb)),
        served_probs=served, unreachable_qos=not any_reachable)
