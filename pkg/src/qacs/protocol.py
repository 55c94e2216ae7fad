"""Per-frame execution of the coordinated scheduling protocol.

This is the behavioral reference: one frame in, one ScheduleOutcome out.
The sequence is (a) FAP pilots / femto NSNR feedback, (b) femto MT+beam
selection by largest NSNR, (c) qualified-beam determination against the
femto QoS threshold, (d) macro best-beam requests against the macro QoS
threshold, (e) MBS beam/MT selection minimizing cross-tier interference.

Everything runs in the normalized domain of the link budget: the femto
SINR on MBS beam j is x_F / (lambda_F * y_j + mu_F) and the macro SINR of
MT k is x_{M,k} / (lambda_{M,k} * y_{M,k} + mu_{M,k}).

The bulk Monte-Carlo engine in ``_engine`` reproduces these decisions in
batched form; parity between the two is covered by tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FrameRealization, LinkBudget, ScenarioConfig, ScheduleOutcome, db_to_linear


@dataclass(frozen=True)
class QosThresholds:
    """QoS SINR requirements, linear scale."""

    gamma_f: float
    gamma_m: float

    def __post_init__(self):
        if self.gamma_f <= 0 or self.gamma_m <= 0:
            raise ValueError("QoS thresholds must be > 0 (linear)")

    @classmethod
    def from_db(cls, gamma_f_db: float, gamma_m_db: float) -> "QosThresholds":
        return cls(db_to_linear(gamma_f_db), db_to_linear(gamma_m_db))

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "QosThresholds":
        return cls(cfg.gamma_f_lin, cfg.gamma_m_lin)


def beam_projections(vectors: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """|v_k^H b_i|^2 for every terminal row and codebook column."""
    return np.abs(vectors.conj() @ codebook) ** 2


def femto_select(frame: FrameRealization):
    """Largest-NSNR selection over all (femto MT, FAP beam) pairs.

    Returns (mt, beam, nsnr). Ties break to the lowest (mt, beam) index,
    which is what a row-major argmax yields.
    """
    proj = beam_projections(frame.h_f, frame.fap_codebook)
    flat = int(np.argmax(proj))
    n_f = proj.shape[1]
    return flat // n_f, flat % n_f, float(proj.flat[flat])


def femto_interference(frame: FrameRealization, femto_mt: int) -> np.ndarray:
    """Projection powers y_j of the selected femto-MT onto every MBS beam."""
    return beam_projections(frame.h_m[femto_mt:femto_mt + 1], frame.mbs_codebook)[0]


def _femto_ratios(budget: LinkBudget, femto_mt: int):
    lam = np.asarray(budget.lambda_f).reshape(-1)
    mu = np.asarray(budget.mu_f).reshape(-1)
    return (float(lam[femto_mt]) if lam.size > 1 else float(lam[0]),
            float(mu[femto_mt]) if mu.size > 1 else float(mu[0]))


def _qualify(y: np.ndarray, nsnr: float, lam: float, mu: float, gamma_f: float):
    """Per-beam femto SINR and the qualified set ordered by ascending y."""
    sinr_on = nsnr / (lam * y + mu)
    qualified = tuple(sorted((j for j in range(len(y)) if sinr_on[j] >= gamma_f),
                             key=lambda j: (y[j], j)))
    return sinr_on, qualified


def qualified_beams(frame: FrameRealization, budget: LinkBudget, femto_mt: int,
                    femto_beam: int, nsnr: float, thresholds: QosThresholds) -> tuple:
    """MBS beams whose use keeps the selected femto-MT at or above its QoS.

    Beam j qualifies iff x_F / (lambda_F * y_j + mu_F) >= gamma_f. The
    returned indices are ordered by ascending interference y_j (the least
    harmful beam first).
    """
    lam, mu = _femto_ratios(budget, femto_mt)
    y = femto_interference(frame, femto_mt)
    _, qualified = _qualify(y, nsnr, lam, mu, thresholds.gamma_f)
    return qualified


def _macro_sinrs(frame: FrameRealization, budget: LinkBudget, qualified: tuple,
                 femto_beam: int):
    """Best qualified beam and resulting SINR for every macro-MT."""
    q = np.asarray(qualified, dtype=int)
    proj = beam_projections(frame.g_m, frame.mbs_codebook)[:, q]  # (K_M, N_Q)
    best_local = proj.argmax(axis=1)
    x_m = proj[np.arange(proj.shape[0]), best_local]
    w = frame.fap_codebook[:, femto_beam]
    y_m = np.abs(frame.g_f.conj() @ w) ** 2
    lam = np.asarray(budget.lambda_m, dtype=float)
    mu = np.asarray(budget.mu_m, dtype=float)
    sinr = x_m / (lam * y_m + mu)
    return q[best_local], sinr


def macro_best_beams(frame: FrameRealization, budget: LinkBudget, qualified: tuple,
                     femto_beam: int, thresholds: QosThresholds) -> dict:
    """Requests {macro MT -> its best qualified beam} of MTs meeting QoS."""
    if not qualified:
        return {}
    best, sinr = _macro_sinrs(frame, budget, qualified, femto_beam)
    return {int(k): int(best[k]) for k in range(len(sinr)) if sinr[k] >= thresholds.gamma_m}


def mbs_select(requests: dict, interference_to_femto: np.ndarray,
               rng: np.random.Generator):
    """Pick the requested beam with the least interference to the femto-MT,
    then one of its requesters uniformly at random.

    Returns (beam, mt) or None when there are no requests. Exactly one
    uniform draw is consumed whenever a selection is made.
    """
    if not requests:
        return None
    j_star = min(set(requests.values()),
                 key=lambda j: (interference_to_femto[j], j))
    requesters = sorted(k for k, j in requests.items() if j == j_star)
    pick = min(int(rng.random() * len(requesters)), len(requesters) - 1)
    return j_star, requesters[pick]


def run_frame(frame: FrameRealization, budget: LinkBudget, thresholds: QosThresholds,
              rng: np.random.Generator) -> ScheduleOutcome:
    """Execute one full frame of the protocol and validate the outcome."""
    k_star, i_star, x_f = femto_select(frame)
    lam_f, mu_f = _femto_ratios(budget, k_star)
    y = femto_interference(frame, k_star)
    sinr_on, qualified = _qualify(y, x_f, lam_f, mu_f, thresholds.gamma_f)
    requests = macro_best_beams(frame, budget, qualified, i_star, thresholds)
    selection = mbs_select(requests, y, rng)
    if selection is None:
        outcome = ScheduleOutcome(
            femto_mt=k_star, femto_beam=i_star, femto_nsnr=x_f,
            qualified_beams=qualified, macro_requests=requests,
            macro_beam=None, macro_mt=None,
            sinr_femto=x_f / mu_f, sinr_macro=None, macro_active=False)
    else:
        j_star, mt = selection
        _, sinr_all = _macro_sinrs(frame, budget, qualified, i_star)
        outcome = ScheduleOutcome(
            femto_mt=k_star, femto_beam=i_star, femto_nsnr=x_f,
            qualified_beams=qualified, macro_requests=requests,
            macro_beam=j_star, macro_mt=mt,
            sinr_femto=float(sinr_on[j_star]), sinr_macro=float(sinr_all[mt]),
            macro_active=True)
    outcome.validate(thresholds.gamma_f, thresholds.gamma_m)
    return outcome
