# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-frame scheduling loop.

Interface and outputs are bit-identical to ``_kernels_py.schedule_batch``;
the module is compiled with FP contraction disabled so every SINR is
rounded through the same sequence of IEEE operations as the numpy kernel.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, NAN


def schedule_batch(const double[:, :, ::1] pf, const double[:, :, ::1] pmy,
                   const double[:, :, ::1] pgm, const double[:, :, ::1] pgf,
                   const double[::1] u, const double[::1] lam_f, const double[::1] mu_f,
                   const double[::1] lam_m, const double[::1] mu_m,
                   double gamma_f, double gamma_m):
    """Compiled twin of the numpy scheduling kernel; see _kernels_py."""
    cdef Py_ssize_t B = pf.shape[0]
    cdef Py_ssize_t k_f = pf.shape[1]
    cdef Py_ssize_t n_f = pf.shape[2]
    cdef Py_ssize_t k_m = pgm.shape[1]
    cdef Py_ssize_t n_m = pgm.shape[2]

    femto_mt_a = np.empty(B, dtype=np.int64)
    femto_beam_a = np.empty(B, dtype=np.int64)
    x_f_a = np.empty(B, dtype=np.float64)
    n_q_a = np.empty(B, dtype=np.int64)
    k_q_a = np.empty(B, dtype=np.int64)
    n_b_a = np.empty(B, dtype=np.int64)
    macro_beam_a = np.empty(B, dtype=np.int64)
    macro_mt_a = np.empty(B, dtype=np.int64)
    sinr_f_a = np.empty(B, dtype=np.float64)
    sinr_m_a = np.empty(B, dtype=np.float64)
    cand_a = np.zeros((B, k_m), dtype=np.uint8)

    cdef long[::1] femto_mt = femto_mt_a
    cdef long[::1] femto_beam = femto_beam_a
    cdef double[::1] x_f = x_f_a
    cdef long[::1] n_q = n_q_a
    cdef long[::1] k_q = k_q_a
    cdef long[::1] n_b = n_b_a
    cdef long[::1] macro_beam = macro_beam_a
    cdef long[::1] macro_mt = macro_mt_a
    cdef double[::1] sinr_f = sinr_f_a
    cdef double[::1] sinr_m = sinr_m_a
    cdef unsigned char[:, ::1] cand = cand_a

    # per-frame scratch, reused across the batch
    scratch_q = np.empty(n_m, dtype=np.uint8)
    scratch_y = np.empty(n_m, dtype=np.float64)
    scratch_s = np.empty(n_m, dtype=np.float64)
    scratch_b = np.empty(n_m, dtype=np.uint8)
    scratch_jb = np.empty(k_m, dtype=np.int64)
    scratch_smk = np.empty(k_m, dtype=np.float64)
    scratch_req = np.empty(k_m, dtype=np.uint8)
    cdef unsigned char[::1] qual = scratch_q
    cdef double[::1] yrow = scratch_y
    cdef double[::1] sinrj = scratch_s
    cdef unsigned char[::1] beamreq = scratch_b
    cdef long[::1] jb = scratch_jb
    cdef double[::1] smk = scratch_smk
    cdef unsigned char[::1] req = scratch_req

    cdef Py_ssize_t b, k, i, j, bk, bi, bj, js, mt
    cdef long nq, kq, nb, c, pick, count
    cdef double best, v, x, lf, mf, t, s, bestm, ym, besty

    with nogil:
        for b in range(B):
            # femto MT/beam selection: first maximum in row-major order
            best = -INFINITY
            bk = 0
            bi = 0
            for k in range(k_f):
                for i in range(n_f):
                    v = pf[b, k, i]
                    if v > best:
                        best = v
                        bk = k
                        bi = i
            x = best
            lf = lam_f[bk]
            mf = mu_f[bk]

            # beam qualification against the femto QoS
            nq = 0
            for j in range(n_m):
                v = pmy[b, bk, j]
                yrow[j] = v
                t = lf * v
                t = t + mf
                s = x / t
                sinrj[j] = s
                if s >= gamma_f:
                    qual[j] = 1
                    nq += 1
                else:
                    qual[j] = 0

            # macro best-beam requests
            kq = 0
            for k in range(k_m):
                req[k] = 0
                if nq > 0:
                    bestm = -INFINITY
                    bj = 0
                    for j in range(n_m):
                        if qual[j]:
                            v = pgm[b, k, j]
                            if v > bestm:
                                bestm = v
                                bj = j
                    ym = pgf[b, k, bi]
                    t = lam_m[k] * ym
                    t = t + mu_m[k]
                    s = bestm / t
                    if s >= gamma_m:
                        req[k] = 1
                        jb[k] = bj
                        smk[k] = s
                        kq += 1

            # distinct requested beams
            nb = 0
            for j in range(n_m):
                beamreq[j] = 0
            for k in range(k_m):
                if req[k] and not beamreq[jb[k]]:
                    beamreq[jb[k]] = 1
                    nb += 1

            femto_mt[b] = bk
            femto_beam[b] = bi
            x_f[b] = x
            n_q[b] = nq
            k_q[b] = kq
            n_b[b] = nb

            if kq > 0:
                # least-interference requested beam, first minimum wins
                besty = INFINITY
                js = 0
                for j in range(n_m):
                    if beamreq[j] and yrow[j] < besty:
                        besty = yrow[j]
                        js = j
                c = 0
                for k in range(k_m):
                    if req[k] and jb[k] == js:
                        cand[b, k] = 1
                        c += 1
                pick = <long> (u[b] * c)
                if pick > c - 1:
                    pick = c - 1
                mt = 0
                count = 0
                for k in range(k_m):
                    if cand[b, k]:
                        if count == pick:
                            mt = k
                            break
                        count += 1
                macro_beam[b] = js
                macro_mt[b] = mt
                sinr_f[b] = sinrj[js]
                sinr_m[b] = smk[mt]
            else:
                macro_beam[b] = -1
                macro_mt[b] = -1
                sinr_f[b] = x / mf
                sinr_m[b] = NAN

    return (femto_mt_a, femto_beam_a, x_f_a, n_q_a, k_q_a, n_b_a,
            macro_beam_a, macro_mt_a, sinr_f_a, sinr_m_a, cand_a)
