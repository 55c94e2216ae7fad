"""Batched Monte-Carlo engine.

Runs the channel + protocol pipeline over batches of frames with
counter-based substreams: batch b of drop d uses a Philox generator seeded
from SeedSequence((seed, d, b)), so any parallel schedule over whole
batches reproduces the same numbers. Within a batch the draw order is
fixed: the six fading/codebook blocks (h_f, h_m, g_m, g_f, FAP Ginibre,
MBS Ginibre, each as (B, rows, cols, 2) standard normals scaled by
sqrt(1/2)), then the per-frame tie-break uniforms.

The scheduling decisions are delegated to the selected kernel
(compiled or numpy); everything upstream (normals, QR, projections) runs
in numpy for both backends, which keeps the two bit-identical end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LinkBudget, ScenarioConfig

_MASK64 = (1 << 64) - 1
_SQRT_HALF = np.sqrt(0.5)


@dataclass(frozen=True)
class EngineInputs:
    """Per-drop constants consumed by the kernels."""

    k_f: int
    n_f: int
    k_m: int
    n_m: int
    lam_f: np.ndarray
    mu_f: np.ndarray
    lam_m: np.ndarray
    mu_m: np.ndarray
    gamma_f: float
    gamma_m: float

    @classmethod
    def from_config(cls, cfg: ScenarioConfig, budget: LinkBudget) -> "EngineInputs":
        def vec(v, n):
            return np.array(np.broadcast_to(v, (n,)), dtype=np.float64)

        lam_f = vec(budget.lambda_f, cfg.n_femto_mts)
        mu_f = vec(budget.mu_f, cfg.n_femto_mts)
        lam_m = vec(budget.lambda_m, cfg.n_macro_mts)
        mu_m = vec(budget.mu_m, cfg.n_macro_mts)
        return cls(k_f=cfg.n_femto_mts, n_f=cfg.n_fap_antennas,
                   k_m=cfg.n_macro_mts, n_m=cfg.n_mbs_antennas,
                   lam_f=lam_f, mu_f=mu_f, lam_m=lam_m, mu_m=mu_m,
                   gamma_f=cfg.gamma_f_lin, gamma_m=cfg.gamma_m_lin)


def batch_generator(seed: int, drop_index: int, batch_index: int) -> np.random.Generator:
    """Counter-based substream for one (seed, drop, batch) triple."""
    ss = np.random.SeedSequence(entropy=(seed & _MASK64, drop_index, batch_index))
    return np.random.Generator(np.random.Philox(ss))


def _complex_block(rng: np.random.Generator, size: int, rows: int, cols: int) -> np.ndarray:
    z = rng.standard_normal((size, rows, cols, 2))
    z *= _SQRT_HALF
    return z.view(np.complex128)[..., 0]


def _haar(ginibre: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(ginibre)
    d = np.einsum("...ii->...i", r)
    return q * (d / np.abs(d))[:, None, :]


def draw_batch_projections(inputs: EngineInputs, rng: np.random.Generator, size: int):
    """Draw one batch of frames and reduce to projection powers.

    Returns (pf, pmy, pgm, pgf, u) ready for a scheduling kernel.
    """
    h_f = _complex_block(rng, size, inputs.k_f, inputs.n_f)
    h_m = _complex_block(rng, size, inputs.k_f, inputs.n_m)
    g_m = _complex_block(rng, size, inputs.k_m, inputs.n_m)
    g_f = _complex_block(rng, size, inputs.k_m, inputs.n_f)
    w = _haar(_complex_block(rng, size, inputs.n_f, inputs.n_f))
    f = _haar(_complex_block(rng, size, inputs.n_m, inputs.n_m))
    u = rng.random(size)
    pf = np.abs(np.matmul(h_f.conj(), w)) ** 2
    pmy = np.abs(np.matmul(h_m.conj(), f)) ** 2
    pgm = np.abs(np.matmul(g_m.conj(), f)) ** 2
    pgf = np.abs(np.matmul(g_f.conj(), w)) ** 2
    return (np.ascontiguousarray(pf), np.ascontiguousarray(pmy),
            np.ascontiguousarray(pgm), np.ascontiguousarray(pgf), u)


@dataclass
class BatchStats:
    """Accumulated statistics of one batch of frames."""

    frames: int
    mean_rate_f: float
    mean_rate_m: float
    mean_nq: float
    mean_nb: float
    nq_hist: np.ndarray
    nb_hist: np.ndarray
    femto_sel: np.ndarray
    macro_served: np.ndarray
    macro_expected: np.ndarray
    qos_violations: int
    active_frames: int


def run_batch(inputs: EngineInputs, rng: np.random.Generator, size: int,
              kernel) -> BatchStats:
    """Draw, schedule and reduce one batch."""
    pf, pmy, pgm, pgf, u = draw_batch_projections(inputs, rng, size)
    (femto_mt, femto_beam, x_f, n_q, k_q, n_b, macro_beam, macro_mt,
     sinr_f, sinr_m, cand) = kernel.schedule_batch(
        pf, pmy, pgm, pgf, u, inputs.lam_f, inputs.mu_f,
        inputs.lam_m, inputs.mu_m, inputs.gamma_f, inputs.gamma_m)

    active = macro_mt >= 0
    rate_f = np.log2(1.0 + sinr_f)
    rate_m = np.where(active, np.log2(1.0 + np.where(active, sinr_m, 0.0)), 0.0)
    viol = int(np.count_nonzero(
        active & ((sinr_f < inputs.gamma_f) | (np.where(active, sinr_m, np.inf) < inputs.gamma_m))))

    c = cand.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = np.where(c > 0, 1.0 / np.maximum(c, 1), 0.0)
    expected = (cand.astype(np.float64) * weights[:, None]).sum(axis=0)

    return BatchStats(
        frames=size,
        mean_rate_f=float(rate_f.mean()),
        mean_rate_m=float(rate_m.mean()),
        mean_nq=float(n_q.mean()),
        mean_nb=float(n_b.mean()),
        nq_hist=np.bincount(n_q, minlength=inputs.n_m + 1),
        nb_hist=np.bincount(n_b, minlength=inputs.n_m + 1),
        femto_sel=np.bincount(femto_mt, minlength=inputs.k_f),
        macro_served=np.bincount(macro_mt[active], minlength=inputs.k_m),
        macro_expected=expected,
        qos_violations=viol,
        active_frames=int(np.count_nonzero(active)),
    )


def batch_sizes(frames: int, batch_size: int):
    """Fixed partition of the frame count into batches (last may be short)."""
    full, rem = divmod(frames, batch_size)
    sizes = [batch_size] * full
    if rem:
        sizes.append(rem)
    return sizes
