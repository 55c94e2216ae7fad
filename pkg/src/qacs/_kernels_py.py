"""Vectorized numpy implementation of the per-frame scheduling decisions.

Same interface and bit-identical outputs as the compiled kernel in
``_kernels``; selected as the fallback when the extension is unavailable.
All SINR expressions are evaluated with the same sequence of elementwise
operations as the compiled loop so that threshold comparisons agree
bit-for-bit.
"""

import numpy as np


def schedule_batch(pf, pmy, pgm, pgf, u, lam_f, mu_f, lam_m, mu_m,
                   gamma_f, gamma_m):
    """Run the scheduling decisions for a batch of frames.

    Parameters are projection powers: ``pf`` (B, K_F, N_F) femto NSNRs,
    ``pmy`` (B, K_F, N_M) MBS-to-femto interference, ``pgm`` (B, K_M, N_M)
    macro NSNRs, ``pgf`` (B, K_M, N_F) FAP-to-macro interference, plus the
    per-frame tie-break uniforms and per-terminal link-budget ratios.

    Returns (femto_mt, femto_beam, x_f, n_q, k_q, n_b, macro_beam,
    macro_mt, sinr_f, sinr_m, cand) where cand is the uint8 mask of
    macro-MTs that requested the selected beam (the tie-break pool).
    """
    B, k_f, n_f = pf.shape
    k_m, n_m = pgm.shape[1], pgm.shape[2]
    rows = np.arange(B)
    mts = np.arange(k_m)

    flat = pf.reshape(B, k_f * n_f)
    am = flat.argmax(axis=1)
    femto_mt = am // n_f
    femto_beam = am % n_f
    x_f = flat[rows, am]

    lf = lam_f[femto_mt]
    mf = mu_f[femto_mt]
    y = pmy[rows, femto_mt, :]                       # (B, N_M)
    sinr_fj = x_f[:, None] / (lf[:, None] * y + mf[:, None])
    qual = sinr_fj >= gamma_f
    n_q = qual.sum(axis=1)

    gmq = np.where(qual[:, None, :], pgm, -np.inf)   # (B, K_M, N_M)
    jbest = gmq.argmax(axis=2)
    x_m = gmq[rows[:, None], mts[None, :], jbest]
    ym = pgf[rows[:, None], mts[None, :], femto_beam[:, None]]
    sinr_mk = x_m / (lam_m[None, :] * ym + mu_m[None, :])
    req = sinr_mk >= gamma_m
    k_q = req.sum(axis=1)

    reqbeam = np.zeros((B, n_m), dtype=bool)
    for j in range(n_m):
        reqbeam[:, j] = (req & (jbest == j)).any(axis=1)
    n_b = reqbeam.sum(axis=1)

    ymask = np.where(reqbeam, y, np.inf)
    jstar = ymask.argmin(axis=1)
    cand = req & (jbest == jstar[:, None])
    c = cand.sum(axis=1)
    pick = np.minimum((u * np.maximum(c, 1)).astype(np.int64),
                      np.maximum(c - 1, 0))
    cs = cand.cumsum(axis=1)
    sel = (cs == (pick + 1)[:, None]) & cand
    mt_raw = sel.argmax(axis=1)

    active = k_q > 0
    sinr_f = np.where(active, sinr_fj[rows, jstar], x_f / mf)
    sinr_m = np.where(active, sinr_mk[rows, mt_raw], np.nan)
    macro_beam = np.where(active, jstar, -1)
    macro_mt = np.where(active, mt_raw, -1)

    return (femto_mt.astype(np.int64), femto_beam.astype(np.int64), x_f,
            n_q.astype(np.int64), k_q.astype(np.int64), n_b.astype(np.int64),
            macro_beam.astype(np.int64), macro_mt.astype(np.int64),
            sinr_f, sinr_m, cand.astype(np.uint8))
