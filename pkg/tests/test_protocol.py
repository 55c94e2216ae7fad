import numpy as np
import pytest

from qacs import backend
from qacs._engine import EngineInputs
from qacs.channel import drop_users, realize_frame
from qacs.model import FrameRealization, LinkBudget, ScenarioConfig
from qacs.protocol import (QosThresholds, femto_interference, femto_select,
                           macro_best_beams, mbs_select, qualified_beams,
                           run_frame)

from conftest import uniform_budget


def _frame_2x2(h_f, h_m, g_m, g_f):
    """2-MT/2-beam frame with identity codebooks and unit-ish gains."""
    return FrameRealization(
        h_f=np.asarray(h_f, dtype=complex), h_m=np.asarray(h_m, dtype=complex),
        g_m=np.asarray(g_m, dtype=complex), g_f=np.asarray(g_f, dtype=complex),
        fap_codebook=np.eye(2, dtype=complex), mbs_codebook=np.eye(2, dtype=complex),
        beta_f=np.full(2, 0.5), beta_m=np.full(2, 0.5),
        alpha_m=np.full(2, 0.5), alpha_f=np.full(2, 0.5))


class _FixedU:
    """Stub random stream yielding a fixed uniform."""

    def __init__(self, u):
        self.u = u
        self.calls = 0

    def random(self):
        self.calls += 1
        return self.u


def test_femto_select_hand_case():
    # projection powers {0.3, 1.7; 0.9, 0.4} -> MT 0, beam 1, x = 1.7
    frame = _frame_2x2(np.sqrt([[0.3, 1.7], [0.9, 0.4]]),
                       np.eye(2), np.eye(2), np.eye(2))
    mt, beam, x = femto_select(frame)
    assert (mt, beam) == (0, 1)
    assert x == pytest.approx(1.7, rel=1e-12)


def test_femto_select_single_candidate():
    frame = FrameRealization(
        h_f=np.array([[0.7 + 0.1j]]), h_m=np.array([[0.2]]),
        g_m=np.array([[0.3]]), g_f=np.array([[0.4]]),
        fap_codebook=np.eye(1, dtype=complex), mbs_codebook=np.eye(1, dtype=complex),
        beta_f=np.ones(1), beta_m=np.ones(1), alpha_m=np.ones(1), alpha_f=np.ones(1))
    mt, beam, x = femto_select(frame)
    assert (mt, beam) == (0, 0)
    assert x == pytest.approx(abs(0.7 + 0.1j) ** 2, rel=1e-12)


def test_femto_select_gain_invariance(rng):
    # NSNR selection must not change when a femto-MT's path gain changes
    cfg = ScenarioConfig(mbs_fap_distance=100.0)
    drop = drop_users(cfg, rng)
    frame = realize_frame(cfg, drop, cfg.path_loss_params, rng)
    before = femto_select(frame)
    scaled = FrameRealization(
        h_f=frame.h_f, h_m=frame.h_m, g_m=frame.g_m, g_f=frame.g_f,
        fap_codebook=frame.fap_codebook, mbs_codebook=frame.mbs_codebook,
        beta_f=frame.beta_f * 1e-3, beta_m=frame.beta_m,
        alpha_m=frame.alpha_m, alpha_f=frame.alpha_f)
    assert femto_select(scaled) == before


def test_qualified_beams_hand_case():
    # lambda=1, mu=0.1, Gamma_F=2, x=1, y={0.1, 0.6, 0.3, 0.2}:
    # SINRs {5, 1.43, 2.5, 3.33} -> qualified {0, 3, 2} by ascending y
    y = np.sqrt([0.1, 0.6, 0.3, 0.2])
    frame = FrameRealization(
        h_f=np.array([[1.0, 0.0]], dtype=complex),
        h_m=y[None, :].astype(complex),
        g_m=np.ones((1, 4), dtype=complex), g_f=np.ones((1, 2), dtype=complex),
        fap_codebook=np.eye(2, dtype=complex), mbs_codebook=np.eye(4, dtype=complex),
        beta_f=np.ones(1), beta_m=np.ones(1), alpha_m=np.ones(1), alpha_f=np.ones(1))
    budget = LinkBudget(lambda_f=np.array([1.0]), mu_f=np.array([0.1]),
                        lambda_m=np.array([1.0]), mu_m=np.array([1.0]))
    thr = QosThresholds(gamma_f=2.0, gamma_m=1.0)
    beams = qualified_beams(frame, budget, 0, 0, 1.0, thr)
    assert beams == (0, 3, 2)


def test_qualified_beams_limits():
    frame = FrameRealization(
        h_f=np.array([[1.0, 0.0]], dtype=complex),
        h_m=np.array([[0.5, 0.8, 0.2, 0.9]], dtype=complex),
        g_m=np.ones((1, 4), dtype=complex), g_f=np.ones((1, 2), dtype=complex),
        fap_codebook=np.eye(2, dtype=complex), mbs_codebook=np.eye(4, dtype=complex),
        beta_f=np.ones(1), beta_m=np.ones(1), alpha_m=np.ones(1), alpha_f=np.ones(1))
    budget = LinkBudget(lambda_f=np.array([1.0]), mu_f=np.array([0.1]),
                        lambda_m=np.array([1.0]), mu_m=np.array([1.0]))
    # vanishing threshold: every beam qualifies
    all_beams = qualified_beams(frame, budget, 0, 0, 1.0, QosThresholds(1e-12, 1.0))
    assert len(all_beams) == 4
    # noise-limited infeasibility: x < mu * Gamma -> empty even at y = 0
    none = qualified_beams(frame, budget, 0, 0, 0.05, QosThresholds(1.0, 1.0))
    assert none == ()


def test_macro_best_beams_hand_case():
    # SINR matrix {{0.5, 3.0}, {1.2, 0.8}}, Gamma_M = 1 -> {0: 1, 1: 0}
    # (identity budgets, orthogonal FAP interference, so SINR = |g|^2)
    frame = _frame_2x2(
        np.array([[1.0, 0.0], [0.0, 0.5]]),
        np.array([[1.0, 1.0], [1.0, 1.0]]),
        np.sqrt([[0.5, 3.0], [1.2, 0.8]]),
        np.array([[0.0, 1.0], [0.0, 1.0]]),  # g_f orthogonal to beam 0
    )
    budget = LinkBudget(lambda_f=np.ones(2), mu_f=np.full(2, 0.1),
                        lambda_m=np.ones(2), mu_m=np.ones(2))
    thr = QosThresholds(gamma_f=1e-9, gamma_m=1.0)
    requests = macro_best_beams(frame, budget, (0, 1), 0, thr)
    assert requests == {0: 1, 1: 0}
    # single qualified beam: every request points to it
    requests = macro_best_beams(frame, budget, (1,), 0, QosThresholds(1e-9, 0.5))
    assert set(requests.values()) == {1}
    # empty qualified set: empty map
    assert macro_best_beams(frame, budget, (), 0, thr) == {}


def test_mbs_select_semantics():
    y = np.array([0.7, 0.2, 0.5, 0.9])
    assert mbs_select({}, y, _FixedU(0.3)) is None
    # single request
    assert mbs_select({4: 2}, y, _FixedU(0.99)) == (2, 4)
    # least-interference beam wins: requests on beams 0 (y=0.7) and 1 (y=0.2)
    assert mbs_select({0: 0, 1: 1}, y, _FixedU(0.0)) == (1, 1)
    # uniform pick among same-beam requesters, ordered by MT index
    sel = mbs_select({3: 1, 7: 1, 9: 1}, y, _FixedU(0.5))
    assert sel == (1, 7)
    sel = mbs_select({3: 1, 7: 1, 9: 1}, y, _FixedU(0.999))
    assert sel == (1, 9)


def test_run_frame_golden_trace():
    frame = _frame_2x2(
        np.array([[1.0, 2.0], [0.5, 1.2]]),     # projections {1, 4; 0.25, 1.44}
        np.array([[0.6, 1.1], [2.0, 2.0]]),     # y = {0.36, 1.21} for MT 0
        np.array([[0.9, 0.3], [0.8, 1.0]]),     # macro projections
        np.array([[0.5, 0.6], [0.2, 0.4]]),     # FAP interference, beam 1 used
    )
    budget = LinkBudget(lambda_f=np.array([0.5, 0.5]), mu_f=np.array([0.2, 0.2]),
                        lambda_m=np.array([1.0, 2.0]), mu_m=np.array([0.1, 0.1]))
    thr = QosThresholds(gamma_f=2.0, gamma_m=1.0)
    out = run_frame(frame, budget, thr, _FixedU(0.42))
    assert (out.femto_mt, out.femto_beam) == (0, 1)
    assert out.femto_nsnr == pytest.approx(4.0, rel=1e-12)
    assert out.qualified_beams == (0, 1)
    assert out.macro_requests == {0: 0, 1: 1}
    assert out.macro_active
    assert (out.macro_beam, out.macro_mt) == (0, 0)
    assert out.sinr_femto == pytest.approx(4.0 / 0.38, rel=1e-12)
    assert out.sinr_macro == pytest.approx(0.81 / 0.46, rel=1e-12)

    # same frame, stricter femto QoS: both beams fail -> macro off
    out = run_frame(frame, budget, QosThresholds(12.0, 1.0), _FixedU(0.42))
    assert not out.macro_active
    assert out.qualified_beams == ()
    assert out.macro_requests == {}
    assert out.macro_beam is None and out.macro_mt is None and out.sinr_macro is None
    assert out.sinr_femto == pytest.approx(4.0 / 0.2, rel=1e-12)


def test_run_frame_invariants_random(rng):
    cfg = ScenarioConfig(n_femto_mts=3, n_macro_mts=8, mbs_fap_distance=100.0,
                         gamma_f_req=10.0, gamma_m_req=3.0)
    drop = drop_users(cfg, rng)
    from qacs.channel import drop_path_gains
    from qacs.model import drop_link_budget
    budget = drop_link_budget(cfg, *drop_path_gains(cfg, drop))
    thr = QosThresholds.from_config(cfg)
    active = 0
    for _ in range(400):
        frame = realize_frame(cfg, drop, cfg.path_loss_params, rng)
        out = run_frame(frame, budget, thr, rng)  # validates internally
        active += out.macro_active
    assert 0 < active  # the scenario is not degenerate


def test_reference_path_matches_engine_kernel(rng):
    """Identity codebooks make the reference per-frame path and the batched
    kernel bitwise comparable on the same channel realizations."""
    cfg = ScenarioConfig(n_femto_mts=4, n_macro_mts=12, n_fap_antennas=2,
                         n_mbs_antennas=4, mbs_fap_distance=100.0,
                         gamma_f_req=13.0, gamma_m_req=5.0)
    budget = uniform_budget(cfg, lam_f=0.08, mu_f=1e-5, lam_m=0.02, mu_m=5e-3)
    inputs = EngineInputs.from_config(cfg, budget)
    kernel = backend.get_kernel()
    thr = QosThresholds.from_config(cfg)
    B = 600
    h_f = (rng.standard_normal((B, 4, 2)) + 1j * rng.standard_normal((B, 4, 2))) / np.sqrt(2)
    h_m = (rng.standard_normal((B, 4, 4)) + 1j * rng.standard_normal((B, 4, 4))) / np.sqrt(2)
    g_m = (rng.standard_normal((B, 12, 4)) + 1j * rng.standard_normal((B, 12, 4))) / np.sqrt(2)
    g_f = (rng.standard_normal((B, 12, 2)) + 1j * rng.standard_normal((B, 12, 2))) / np.sqrt(2)
    u = rng.random(B)
    pf = np.ascontiguousarray(np.abs(h_f.conj()) ** 2)
    pmy = np.ascontiguousarray(np.abs(h_m.conj()) ** 2)
    pgm = np.ascontiguousarray(np.abs(g_m.conj()) ** 2)
    pgf = np.ascontiguousarray(np.abs(g_f.conj()) ** 2)
    outs = kernel.schedule_batch(pf, pmy, pgm, pgf, u, inputs.lam_f, inputs.mu_f,
                                 inputs.lam_m, inputs.mu_m, inputs.gamma_f,
                                 inputs.gamma_m)
    (femto_mt, femto_beam, x_f, n_q, k_q, n_b, macro_beam, macro_mt,
     sinr_f, sinr_m, cand) = outs
    w2 = np.eye(2, dtype=complex)
    w4 = np.eye(4, dtype=complex)
    gains = np.full(4, 0.5), np.full(4, 0.5), np.full(12, 0.5), np.full(12, 0.5)
    for b in range(B):
        frame = FrameRealization(h_f=h_f[b], h_m=h_m[b], g_m=g_m[b], g_f=g_f[b],
                                 fap_codebook=w2, mbs_codebook=w4,
                                 beta_f=gains[0], beta_m=gains[1],
                                 alpha_m=gains[2], alpha_f=gains[3])
        out = run_frame(frame, budget, thr, _FixedU(u[b]))
        assert out.femto_mt == femto_mt[b]
        assert out.femto_beam == femto_beam[b]
        assert out.femto_nsnr == x_f[b]
        assert len(out.qualified_beams) == n_q[b]
        assert len(out.macro_requests) == k_q[b]
        assert len(set(out.macro_requests.values())) == n_b[b]
        assert out.macro_active == (macro_mt[b] >= 0)
        if out.macro_active:
            assert out.macro_beam == macro_beam[b]
            assert out.macro_mt == macro_mt[b]
            assert out.sinr_macro == sinr_m[b]
        assert out.sinr_femto == sinr_f[b]


def test_engine_argmin_invariance():
    """The selected macro beam always carries the least femto interference
    among the requested beams (exhaustive per-frame reconstruction)."""
    cfg = ScenarioConfig(mbs_fap_distance=100.0, rng_seed=31)
    from qacs._engine import batch_generator, draw_batch_projections
    from qacs.simkit import drop_budget
    budget = drop_budget(cfg, 0)
    inputs = EngineInputs.from_config(cfg, budget)
    arrays = draw_batch_projections(inputs, batch_generator(3, 0, 0), 3000)
    kernel = backend.get_kernel()
    outs = kernel.schedule_batch(*arrays, inputs.lam_f, inputs.mu_f,
                                 inputs.lam_m, inputs.mu_m,
                                 inputs.gamma_f, inputs.gamma_m)
    femto_mt, femto_beam, x_f = outs[0], outs[1], outs[2]
    macro_beam, macro_mt, sinr_f, cand = outs[6], outs[7], outs[8], outs[10]
    pmy, pgm, pgf = arrays[1], arrays[2], arrays[3]
    active = np.flatnonzero(macro_mt >= 0)
    for b in active[:800]:
        y = pmy[b, femto_mt[b], :]
        lamf, muf = inputs.lam_f[femto_mt[b]], inputs.mu_f[femto_mt[b]]
        qual = x_f[b] / (lamf * y + muf) >= inputs.gamma_f
        requested = set()
        requesters = set()
        for k in range(cfg.n_macro_mts):
            proj = np.where(qual, pgm[b, k], -np.inf)
            j = int(proj.argmax())
            s = proj[j] / (inputs.lam_m[k] * pgf[b, k, femto_beam[b]] + inputs.mu_m[k])
            if s >= inputs.gamma_m:
                requested.add(j)
                if j == macro_beam[b]:
                    requesters.add(k)
        assert macro_beam[b] in requested
        assert y[macro_beam[b]] == min(y[j] for j in requested)
        assert set(np.flatnonzero(cand[b])) == requesters
        assert macro_mt[b] in requesters
    assert np.all(sinr_f[macro_mt >= 0] >= inputs.gamma_f)
