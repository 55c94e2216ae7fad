"""Monte-Carlo harness: runs frames of the scheduler over a scenario and
produces RateReports with analytic counterparts and confidence intervals.

Reproducibility contract: for a fixed (plan.seed, plan.frames,
plan.batch_size) the results are bit-identical for any worker count,
because every batch owns a counter-based substream and batches are merged
in index order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import backend
from ._engine import BatchStats, EngineInputs, batch_generator, batch_sizes, run_batch
from .channel import drop_path_gains, drop_users
from .dropwise import DropAnalysis, analyze_drop
from .model import ConfigError, LinkBudget, RateReport, ScenarioConfig, drop_link_budget
from .quadrature import DEFAULT_QUADRATURE, Quadrature

_MASK64 = (1 << 64) - 1

SWEEP_AXES = {
    "gamma_f": "gamma_f_req",
    "gamma_m": "gamma_m_req",
    "p_fap": "p_fap",
    "p_mbs": "p_mbs",
}


@dataclass(frozen=True)
class SimPlan:
    """How much to simulate and how."""

    frames: int = 1_000_000
    drops: int = 1
    batch_size: int = 10_000
    seed: int = 20240901
    workers: int = 1

    def __post_init__(self):
        if not (self.frames >= self.batch_size >= 1):
            raise ConfigError("need frames >= batch_size >= 1")
        if self.drops < 1 or self.workers < 1:
            raise ConfigError("drops and workers must be >= 1")


@dataclass(frozen=True)
class EmpiricalStats:
    """Mean with a batch-means 95% confidence half-width."""

    mean: float
    ci95_halfwidth: float
    n_samples: int
    histogram: Optional[np.ndarray] = None

    @classmethod
    def from_batches(cls, means, sizes, histogram=None) -> "EmpiricalStats":
        means = np.asarray(means, dtype=float)
        sizes = np.asarray(sizes, dtype=float)
        total = float(sizes.sum())
        mean = float(np.dot(means, sizes) / total)
        full = sizes == sizes.max()
        m = means[full]
        if m.size >= 2:
            hw = 1.96 * float(m.std(ddof=1)) / np.sqrt(m.size)
        else:
            hw = 0.0
        return cls(mean=mean, ci95_halfwidth=hw, n_samples=int(total), histogram=histogram)


@dataclass(frozen=True)
class FairnessReport:
    """Selection-frequency audit of both tiers."""

    frames: int
    femto_freq: np.ndarray
    femto_max_dev_sigma: float
    femto_chi2: float
    macro_served: np.ndarray
    macro_expected: np.ndarray
    macro_chi2: float


def _drop_generator(cfg: ScenarioConfig, drop_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=(cfg.rng_seed & _MASK64, drop_index))
    return np.random.Generator(np.random.Philox(ss))


def _run_drop_batches(inputs: EngineInputs, plan: SimPlan, drop_index: int, kernel):
    sizes = batch_sizes(plan.frames, plan.batch_size)

    def work(item):
        b, size = item
        rng = batch_generator(plan.seed, drop_index, b)
        return run_batch(inputs, rng, size, kernel)

    items = list(enumerate(sizes))
    if plan.workers == 1:
        return [work(it) for it in items], sizes
    with ThreadPoolExecutor(max_workers=plan.workers) as pool:
        return list(pool.map(work, items)), sizes


def _drop_report(cfg: ScenarioConfig, plan: SimPlan, stats: list[BatchStats],
                 sizes, analysis: DropAnalysis) -> RateReport:
    n_m = cfg.n_mbs_antennas
    rf = EmpiricalStats.from_batches([s.mean_rate_f for s in stats], sizes)
    rm = EmpiricalStats.from_batches([s.mean_rate_m for s in stats], sizes)
    enq = EmpiricalStats.from_batches([s.mean_nq for s in stats], sizes)
    enb = EmpiricalStats.from_batches([s.mean_nb for s in stats], sizes)
    frames = sum(sizes)
    nq_hist = np.sum([s.nq_hist for s in stats], axis=0)
    nb_hist = np.sum([s.nb_hist for s in stats], axis=0)
    report = RateReport(
        r_f_analytic=analysis.r_f,
        r_m_analytic=analysis.r_m,
        r_f_empirical=rf.mean,
        r_m_empirical=rm.mean,
        r_f_ci95=rf.ci95_halfwidth,
        r_m_ci95=rm.ci95_halfwidth,
        pmf_nq=nq_hist / frames,
        pmf_nb=nb_hist / frames,
        frames=frames,
        e_nq=enq.mean,
        e_nb=enb.mean,
        e_nq_ci95=enq.ci95_halfwidth,
        e_nb_ci95=enb.ci95_halfwidth,
        femto_selection=np.sum([s.femto_sel for s in stats], axis=0),
        macro_served=np.sum([s.macro_served for s in stats], axis=0),
        qos_violations=sum(s.qos_violations for s in stats),
    )
    report.validate()
    return report


def drop_budget(cfg: ScenarioConfig, drop_index: int = 0) -> LinkBudget:
    """The link budget of drop ``drop_index`` under cfg.rng_seed."""
    drop = drop_users(cfg, _drop_generator(cfg, drop_index))
    beta_f, beta_m, alpha_m, alpha_f = drop_path_gains(cfg, drop)
    return drop_link_budget(cfg, beta_f, beta_m, alpha_m, alpha_f)


def simulate(cfg: ScenarioConfig, plan: SimPlan, kernel=None,
             quad: Quadrature = DEFAULT_QUADRATURE,
             analytic: bool = True) -> RateReport:
    """Run the full Monte-Carlo over plan.drops independent drops.

    Per drop: realize frames in batches, schedule them, accumulate rates
    (macro frames with the tier off contribute zero), beam-count PMFs and
    selection counts; attach the drop's analytic rates. With several
    drops the top-level report averages the per-drop reports and keeps
    them in ``per_drop``. Setting ``analytic=False`` skips the analytic
    columns (NaN) for speed.
    """
    if kernel is None:
        kernel = backend.get_kernel()
    reports = []
    for d in range(plan.drops):
        budget = drop_budget(cfg, d)
        inputs = EngineInputs.from_config(cfg, budget)
        stats, sizes = _run_drop_batches(inputs, plan, d, kernel)
        if analytic:
            analysis = analyze_drop(cfg, budget, quad)
        else:
            nan = float("nan")
            analysis = DropAnalysis(r_f=nan, r_m=nan,
                                    pmf_nq=np.full(cfg.n_mbs_antennas + 1, nan),
                                    pmf_nb=np.full(cfg.n_mbs_antennas + 1, nan),
                                    e_nq=nan, e_nb=nan,
                                    served_probs=np.zeros((cfg.n_mbs_antennas + 1,
                                                           cfg.n_macro_mts)),
                                    unreachable_qos=False)
        reports.append(_drop_report(cfg, plan, stats, sizes, analysis))
    if plan.drops == 1:
        return reports[0]

    d = len(reports)
    agg = RateReport(
        r_f_analytic=float(np.mean([r.r_f_analytic for r in reports])),
        r_m_analytic=float(np.mean([r.r_m_analytic for r in reports])),
        r_f_empirical=float(np.mean([r.r_f_empirical for r in reports])),
        r_m_empirical=float(np.mean([r.r_m_empirical for r in reports])),
        r_f_ci95=float(np.sqrt(np.sum([r.r_f_ci95 ** 2 for r in reports])) / d),
        r_m_ci95=float(np.sqrt(np.sum([r.r_m_ci95 ** 2 for r in reports])) / d),
        pmf_nq=np.mean([r.pmf_nq for r in reports], axis=0),
        pmf_nb=np.mean([r.pmf_nb for r in reports], axis=0),
        frames=sum(r.frames for r in reports),
        e_nq=float(np.mean([r.e_nq for r in reports])),
        e_nb=float(np.mean([r.e_nb for r in reports])),
        e_nq_ci95=float(np.sqrt(np.sum([r.e_nq_ci95 ** 2 for r in reports])) / d),
        e_nb_ci95=float(np.sqrt(np.sum([r.e_nb_ci95 ** 2 for r in reports])) / d),
        femto_selection=np.sum([r.femto_selection for r in reports], axis=0),
        macro_served=np.sum([r.macro_served for r in reports], axis=0),
        qos_violations=sum(r.qos_violations for r in reports),
        per_drop=tuple(reports),
    )
    agg.validate()
    return agg


def sweep(cfg: ScenarioConfig, plan: SimPlan, axis: str, values, kernel=None,
          quad: Quadrature = DEFAULT_QUADRATURE, analytic: bool = True) -> list:
    """One simulate() per axis value (dB), with common random numbers.

    The same plan (and therefore the same substreams) is used at every
    point, which smooths the curves for trend comparisons.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; one of {sorted(SWEEP_AXES)}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    if sorted(values) != values:
        raise ConfigError("sweep values must be sorted ascending")
    field = SWEEP_AXES[axis]
    return [simulate(replace(cfg, **{field: float(v)}), plan, kernel=kernel,
                     quad=quad, analytic=analytic) for v in values]


def fairness_audit(cfg: ScenarioConfig, plan: SimPlan, kernel=None) -> FairnessReport:
    """Selection-frequency audit.

    Femto frequencies are compared against the uniform 1/K_F law (NSNR
    selection is path-gain invariant). Macro service counts are compared
    against the per-MT expectation accumulated from the realized tie-break
    pools (each requester of the selected beam carries weight 1/pool).
    """
    if kernel is None:
        kernel = backend.get_kernel()
    budget = drop_budget(cfg, 0)
    inputs = EngineInputs.from_config(cfg, budget)
    stats, sizes = _run_drop_batches(inputs, plan, 0, kernel)
    frames = sum(sizes)
    femto_sel = np.sum([s.femto_sel for s in stats], axis=0)
    served = np.sum([s.macro_served for s in stats], axis=0)
    expected = np.sum([s.macro_expected for s in stats], axis=0)

    p = 1.0 / cfg.n_femto_mts
    sigma = np.sqrt(frames * p * (1.0 - p))
    if sigma > 0:
        dev = np.abs(femto_sel - frames * p) / sigma
    else:  # single femto-MT: selection is deterministic
        dev = np.zeros_like(femto_sel, dtype=float)
    femto_chi2 = float(np.sum((femto_sel - frames * p) ** 2 / (frames * p)))

    mask = expected > 10.0
    macro_chi2 = float(np.sum((served[mask] - expected[mask]) ** 2 / expected[mask]))

    return FairnessReport(
        frames=frames,
        femto_freq=femto_sel / frames,
        femto_max_dev_sigma=float(dev.max()),
        femto_chi2=femto_chi2,
        macro_served=served,
        macro_expected=expected,
        macro_chi2=macro_chi2,
    )
