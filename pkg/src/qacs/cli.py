"""Command-line front end.

Subcommands: simulate | sweep | analyze | validate. Configuration is an
INI file with flat [scenario], [pathloss] and [sim] sections; any key can
also be overridden on the command line with ``--set section.key=value``.
All user-facing powers/thresholds are dB or dBm; outputs are CSV.

Exit codes: 0 success, 1 usage error, 2 configuration error,
3 numerical/validation failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import analytics, backend, simkit
from .model import ConfigError, PathLossModel, PathLossParams, ScenarioConfig
from .quadrature import NumericsError, Quadrature
from .simkit import SimPlan, fairness_audit, simulate, sweep

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_SCENARIO_INT_KEYS = {"n_fap_antennas", "n_mbs_antennas", "n_femto_mts",
                      "n_macro_mts", "rng_seed"}
_SCENARIO_FLOAT_KEYS = {"p_fap", "p_mbs", "noise_femto", "noise_macro",
                        "gamma_f_req", "gamma_m_req", "macro_radius",
                        "femto_radius", "mbs_fap_distance"}
_SIM_INT_KEYS = {"frames", "drops", "batch_size", "seed", "workers"}
_SIM_FLOAT_KEYS = {"quad_abs_tol", "quad_rel_tol"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunSpec:
    """One resolved CLI invocation."""

    command: str
    config_path: str
    output_dir: str
    overrides: tuple = ()


def _parse_value(section: str, key: str, raw: str):
    raw = raw.strip()
    try:
        if section == "scenario" and key in _SCENARIO_INT_KEYS:
            return int(raw)
        if section == "scenario" and key in _SCENARIO_FLOAT_KEYS:
            return float(raw)
        if section == "sim" and key in _SIM_INT_KEYS:
            return int(raw)
        if section == "sim" and key in _SIM_FLOAT_KEYS:
            return float(raw)
        if section == "pathloss":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from None
    raise ConfigError(f"unknown configuration key [{section}] {key}")


def load_config(path: str | None, overrides=()) -> tuple[ScenarioConfig, SimPlan, Quadrature]:
    """Read the INI config (all keys optional) and apply overrides.

    An empty or missing-section file yields the documented defaults.
    Overrides are ``section.key=value`` strings, identical in effect to
    the file keys.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh, source=str(path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"config parse error: {exc}") from None

    values = {"scenario": {}, "pathloss": {}, "sim": {}}
    for section in parser.sections():
        if section not in values:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            values[section][key] = _parse_value(section, key, raw)

    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in values:
            raise ConfigError(f"unknown config section in override: {section!r}")
        values[section][key] = _parse_value(section, key, raw)

    pl_kwargs = {}
    pl = values["pathloss"]
    for cls_name in PathLossModel.LINK_CLASSES:
        base = getattr(PathLossModel(), cls_name)
        pl_kwargs[cls_name] = PathLossParams(
            intercept_db=pl.pop(f"{cls_name}_intercept_db", base.intercept_db),
            slope_db=pl.pop(f"{cls_name}_slope_db", base.slope_db),
            wall_db=pl.pop(f"{cls_name}_wall_db", base.wall_db),
        )
    if pl:
        raise ConfigError(f"unknown [pathloss] keys: {sorted(pl)}")

    try:
        cfg = ScenarioConfig(path_loss_params=PathLossModel(**pl_kwargs), **values["scenario"])
    except TypeError as exc:
        raise ConfigError(f"bad [scenario] key: {exc}") from None

    sim = dict(values["sim"])
    quad = Quadrature(abs_tol=sim.pop("quad_abs_tol", 1e-9),
                      rel_tol=sim.pop("quad_rel_tol", 1e-7))
    try:
        plan = SimPlan(**sim)
    except TypeError as exc:
        raise ConfigError(f"bad [sim] key: {exc}") from None
    return cfg, plan, quad


def _parse_values_arg(raw: str) -> list[float]:
    """Parse --values 'a:b:step' (inclusive) or a single number."""
    parts = raw.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise UsageError(f"--values must be a:b:step or a single number, got {raw!r}")
    a, b, step = (float(x) for x in parts)
    if step <= 0 or b < a:
        raise UsageError("--values needs b >= a and step > 0")
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    return [a + k * step for k in range(n)]


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([c if isinstance(c, str) else _fmt(c) for c in row])
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None


def _report_rows(report) -> list[list]:
    return [
        ["r_f_analytic", report.r_f_analytic],
        ["r_m_analytic", report.r_m_analytic],
        ["r_f_empirical", report.r_f_empirical],
        ["r_m_empirical", report.r_m_empirical],
        ["r_f_ci", report.r_f_ci95],
        ["r_m_ci", report.r_m_ci95],
        ["e_nq", report.e_nq],
        ["e_nb", report.e_nb],
        ["frames", float(report.frames)],
        ["qos_violations", float(report.qos_violations)],
    ]


def cmd_simulate(spec: RunSpec, args) -> int:
    cfg, plan, quad = load_config(spec.config_path, spec.overrides)
    plan = _apply_plan_args(plan, args)
    report = simulate(cfg, plan, quad=quad)
    out = Path(spec.output_dir)
    _write_csv(out / "report.csv", ["key", "value"], _report_rows(report))
    pmf_rows = [[str(m), report.pmf_nq[m], report.pmf_nb[m]]
                for m in range(len(report.pmf_nq))]
    _write_csv(out / "pmf.csv", ["m", "pmf_nq_empirical", "pmf_nb_empirical"], pmf_rows)
    print(f"simulate: frames={report.frames} "
          f"r_f={report.r_f_empirical:.4f} (analytic {report.r_f_analytic:.4f}) "
          f"r_m={report.r_m_empirical:.4f} (analytic {report.r_m_analytic:.4f})")
    return EXIT_OK


def cmd_analyze(spec: RunSpec, args) -> int:
    from .dropwise import analyze_drop
    from .simkit import drop_budget

    cfg, plan, quad = load_config(spec.config_path, spec.overrides)
    analysis = analyze_drop(cfg, drop_budget(cfg, 0), quad)
    out = Path(spec.output_dir)
    rows = [["r_f_analytic", analysis.r_f], ["r_m_analytic", analysis.r_m],
            ["e_nq", analysis.e_nq], ["e_nb", analysis.e_nb]]
    rows += [[f"pmf_nq_{m}", analysis.pmf_nq[m]] for m in range(len(analysis.pmf_nq))]
    rows += [[f"pmf_nb_{n}", analysis.pmf_nb[n]] for n in range(len(analysis.pmf_nb))]
    _write_csv(out / "analytics.csv", ["key", "value"], rows)
    print(f"analyze: r_f={analysis.r_f:.4f} r_m={analysis.r_m:.4f} "
          f"e_nq={analysis.e_nq:.4f} e_nb={analysis.e_nb:.4f}"
          + (" [unreachable macro QoS]" if analysis.unreachable_qos else ""))
    return EXIT_OK


SWEEP_HEADER = ["axis_value_db", "r_f_analytic", "r_f_empirical", "r_f_ci",
                "r_m_analytic", "r_m_empirical", "r_m_ci", "e_nq", "e_nb"]


def cmd_sweep(spec: RunSpec, args) -> int:
    cfg, plan, quad = load_config(spec.config_path, spec.overrides)
    plan = _apply_plan_args(plan, args)
    if args.axis is None or args.values is None:
        raise UsageError("sweep requires --axis and --values")
    values = _parse_values_arg(args.values)
    reports = sweep(cfg, plan, args.axis, values, quad=quad)
    rows = [[v, r.r_f_analytic, r.r_f_empirical, r.r_f_ci95,
             r.r_m_analytic, r.r_m_empirical, r.r_m_ci95, r.e_nq, r.e_nb]
            for v, r in zip(values, reports)]
    path = Path(spec.output_dir) / f"sweep_{args.axis}.csv"
    _write_csv(path, SWEEP_HEADER, rows)
    print(f"sweep: wrote {len(rows)} rows to {path}")
    return EXIT_OK


def _apply_plan_args(plan: SimPlan, args) -> SimPlan:
    updates = {}
    if getattr(args, "frames", None) is not None:
        updates["frames"] = args.frames
        if args.frames < plan.batch_size:
            updates["batch_size"] = args.frames
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        updates["workers"] = args.threads
    return replace(plan, **updates) if updates else plan


# ---------------------------------------------------------------------------
# validation suite
# ---------------------------------------------------------------------------

def _validation_checks(cfg: ScenarioConfig, plan: SimPlan, quad: Quadrature):
    """Yield (name, passed, detail) for the full oracle suite."""
    from math import comb

    from scipy.special import exp1

    from .dropwise import analyze_drop
    from .quadrature import integrate_semi_infinite
    from .simkit import drop_budget

    budget = drop_budget(cfg, 0)
    lam_f = float(np.median(np.atleast_1d(budget.lambda_f)))
    mu_f = float(np.median(np.atleast_1d(budget.mu_f)))
    lam_m = float(np.median(np.atleast_1d(budget.lambda_m)))
    mu_m = float(np.median(np.atleast_1d(budget.mu_m)))
    p_f = analytics.FemtoAnalysisParams(
        n_total=cfg.n_femto_mts * cfg.n_fap_antennas, n_m=cfg.n_mbs_antennas,
        lambda_f=lam_f, mu_f=mu_f, gamma_f_req=cfg.gamma_f_lin)
    p_m = analytics.MacroAnalysisParams(
        n_q=cfg.n_mbs_antennas, k_m=cfg.n_macro_mts, lambda_m=lam_m,
        mu_m=mu_m, gamma_m_req=cfg.gamma_m_lin)

    # PMF normalizations
    s = sum(analytics.pmf_nq(m, p_f, quad) for m in range(cfg.n_mbs_antennas + 1))
    yield "pmf_nq_normalization", abs(s - 1.0) <= 1e-9, f"sum={s!r}"
    s = sum(analytics.pmf_nb(n, p_f, p_m, quad) for n in range(cfg.n_mbs_antennas + 1))
    yield "pmf_nb_normalization", abs(s - 1.0) <= 1e-9, f"sum={s!r}"

    # density normalizations
    val = integrate_semi_infinite(lambda x: analytics.pdf_xf(x, p_f), 0.0, quad,
                                  scale=np.log(p_f.n_total + 1.0) + 2.0)
    yield "pdf_xf_normalization", abs(val - 1.0) <= 1e-6, f"integral={val!r}"
    val = integrate_semi_infinite(lambda g: analytics.pdf_gamma_f(g, 0, p_f, quad),
                                  0.0, quad, scale=(np.log(p_f.n_total + 1.0) + 2.0) / mu_f)
    yield "pdf_gamma_f_n0_normalization", abs(val - 1.0) <= 1e-6, f"integral={val!r}"
    for m in (1, cfg.n_mbs_antennas):
        pm = analytics.MacroAnalysisParams(n_q=m, k_m=cfg.n_macro_mts,
                                           lambda_m=lam_m, mu_m=mu_m,
                                           gamma_m_req=cfg.gamma_m_lin)
        val = integrate_semi_infinite(lambda g: float(analytics.pdf_gamma_mk(g, pm)),
                                      0.0, quad, scale=1.0 / (lam_m + mu_m))
        yield f"pdf_gamma_mk_normalization_m{m}", abs(val - 1.0) <= 1e-6, f"integral={val!r}"

    # CDF endpoints and monotonicity
    grid = np.geomspace(1e-3, 1e3, 41) * max(1.0, cfg.gamma_m_lin)
    cdf = analytics.cdf_gamma_mk(grid, p_m)
    ok = bool(cdf[0] >= 0 and cdf[-1] <= 1 and np.all(np.diff(cdf) >= -1e-12)
              and float(analytics.cdf_gamma_mk(0.0, p_m)) == 0.0
              and abs(float(analytics.cdf_gamma_mk(1e9, p_m)) - 1.0) < 1e-6)
    yield "cdf_gamma_mk_monotone_endpoints", ok, f"range=[{cdf[0]!r}, {cdf[-1]!r}]"

    # closed forms vs oracles
    worst = 0.0
    for m in range(cfg.n_mbs_antennas + 1):
        worst = max(worst, abs(analytics.pmf_nq(m, p_f, quad)
                               - analytics.pmf_nq_quadrature(m, p_f, quad)))
    yield "pmf_nq_closed_vs_quadrature", worst <= 1e-6, f"max|diff|={worst:.3e}"

    worst = 0.0
    for g in np.geomspace(0.1, 100.0, 10) * cfg.gamma_m_lin:
        worst = max(worst, abs(float(analytics.pdf_gamma_mk(g, p_m))
                               - analytics.pdf_gamma_mk_quadrature(g, p_m, quad)))
        worst = max(worst, abs(float(analytics.cdf_gamma_mk(g, p_m))
                               - analytics.cdf_gamma_mk_quadrature(g, p_m, quad)))
    yield "gamma_mk_closed_vs_quadrature", worst <= 1e-6, f"max|diff|={worst:.3e}"

    pk = analytics.prob_kq_nonzero(cfg.n_mbs_antennas, p_m, quad)
    yield "prob_kq_nonzero_forms_agree", 0.0 <= pk <= 1.0, f"value={pk!r}"

    p_small = analytics.MacroAnalysisParams(n_q=2, k_m=3, lambda_m=1.0, mu_m=0.5,
                                            gamma_m_req=1.0)
    worst = 0.0
    for n in range(0, 3):
        worst = max(worst, abs(analytics.pmf_nb_given_nq(n, 2, p_small, quad)
                               - analytics.pmf_nb_given_nq_enumerated(n, 2, p_small, quad)))
    yield "pmf_nb_closed_vs_enumeration", worst <= 1e-12, f"max|diff|={worst:.3e}"

    # variant-form discrepancy detection (these are expected to disagree
    # with the oracle somewhere; the suite fails if detection is silent)
    analytics.DISCREPANCIES.clear()
    stress = analytics.FemtoAnalysisParams(n_total=4, n_m=4, lambda_f=0.8,
                                           mu_f=0.6, gamma_f_req=2.0)
    analytics.pmf_nq(0, stress, quad)
    alt_mass = integrate_semi_infinite(
        lambda y: analytics.pdf_interference_given(y, 3.0, 2, stress, form="alt"),
        0.0, quad, scale=1.0)
    if abs(alt_mass - 1.0) > 1e-6:
        analytics.DISCREPANCIES.record("pdf_interference_given_alt", "n=2,x=3",
                                       alt_mass, 1.0)
    alt_n0 = integrate_semi_infinite(
        lambda g: analytics.pdf_gamma_f_alt_n0(g, stress), 0.0, quad,
        scale=(np.log(stress.n_total + 1.0) + 2.0) * stress.mu_f)
    if abs(alt_n0 - 1.0) > 1e-6:
        analytics.DISCREPANCIES.record("pdf_gamma_f_alt_n0", "normalization",
                                       alt_n0, 1.0)
    analytics._validate_macro_forms.cache_clear()
    analytics._validate_macro_forms(
        analytics.MacroAnalysisParams(n_q=3, k_m=10, lambda_m=1.0, mu_m=0.4,
                                      gamma_m_req=2.0), quad)
    names = analytics.DISCREPANCIES.names()
    detected = {"pdf_interference_given_alt", "pdf_gamma_f_alt_n0", "cdf_gamma_mk_alt"}
    yield ("variant_discrepancies_detected", detected <= names,
           f"detected={sorted(names & detected)}")

    # rate-integral oracle
    rho = 10.0
    val = analytics.rate_integral(lambda g: np.exp(-g / rho) / rho, 0.0, quad, scale=rho)
    ref = float(np.exp(1.0 / rho) * exp1(1.0 / rho) / np.log(2.0))
    yield "rate_integral_exponential_oracle", abs(val - ref) <= 1e-6, \
        f"value={val!r} reference={ref!r}"

    # Monte-Carlo cross-validation
    report = simulate(cfg, plan, quad=quad)
    analysis_pmf_nq = analyze_drop(cfg, budget, quad).pmf_nq
    se = np.sqrt(np.maximum(analysis_pmf_nq * (1 - analysis_pmf_nq), 1e-12) / report.frames)
    dev = np.max(np.abs(report.pmf_nq - analysis_pmf_nq) / np.maximum(se, 1e-12))
    yield "pmf_nq_mc_agreement", dev <= 4.0, f"max dev = {dev:.2f} sigma"

    rel_f = abs(report.r_f_analytic - report.r_f_empirical) / max(report.r_f_analytic, 1e-12)
    tol_f = max(0.02, 4.0 * report.r_f_ci95 / max(report.r_f_analytic, 1e-12))
    yield "rate_femto_mc_agreement", rel_f <= tol_f, f"rel err = {rel_f:.4%}"
    if report.r_m_analytic > 1e-9:
        rel_m = abs(report.r_m_analytic - report.r_m_empirical) / report.r_m_analytic
        tol_m = max(0.02, 4.0 * report.r_m_ci95 / report.r_m_analytic)
        yield "rate_macro_mc_agreement", rel_m <= tol_m, f"rel err = {rel_m:.4%}"

    yield "qos_violations_zero", report.qos_violations == 0, \
        f"violations={report.qos_violations} over {report.frames} frames"

    audit = fairness_audit(cfg, replace(plan, frames=min(plan.frames, 200_000)))
    yield "femto_fairness", audit.femto_max_dev_sigma <= 4.0, \
        f"max dev = {audit.femto_max_dev_sigma:.2f} sigma"

    # determinism across worker counts
    small = replace(plan, frames=min(plan.frames, 50_000))
    r1 = simulate(cfg, small, analytic=False)
    r4 = simulate(cfg, replace(small, workers=4), analytic=False)
    same = (r1.r_f_empirical == r4.r_f_empirical and r1.r_m_empirical == r4.r_m_empirical
            and np.array_equal(r1.pmf_nq, r4.pmf_nq))
    yield "determinism_across_workers", same, "bit-identical reports"

    if backend.HAVE_COMPILED:
        from ._engine import EngineInputs, batch_generator, draw_batch_projections
        inputs = EngineInputs.from_config(cfg, budget)
        arrays = draw_batch_projections(inputs, batch_generator(plan.seed, 0, 0), 2000)
        outs_c = backend.get_kernel("compiled").schedule_batch(
            *arrays, inputs.lam_f, inputs.mu_f, inputs.lam_m, inputs.mu_m,
            inputs.gamma_f, inputs.gamma_m)
        outs_p = backend.get_kernel("python").schedule_batch(
            *arrays, inputs.lam_f, inputs.mu_f, inputs.lam_m, inputs.mu_m,
            inputs.gamma_f, inputs.gamma_m)
        same = all(np.array_equal(a, b, equal_nan=True) for a, b in zip(outs_c, outs_p))
        yield "kernel_parity", same, "compiled vs numpy bit-identical"


def cmd_validate(spec: RunSpec, args) -> int:
    cfg, plan, quad = load_config(spec.config_path, spec.overrides)
    plan = _apply_plan_args(plan, args)
    if getattr(args, "frames", None) is None and plan.frames > 200_000:
        plan = replace(plan, frames=200_000, batch_size=min(plan.batch_size, 200_000))
    rows = []
    failures = 0
    for name, passed, detail in _validation_checks(cfg, plan, quad):
        status = "pass" if passed else "FAIL"
        if not passed:
            failures += 1
        print(f"[{status}] {name}: {detail}")
        rows.append([name, status, detail])
    _write_csv(Path(spec.output_dir) / "validation.csv",
               ["check", "status", "detail"], rows)
    print(f"validate: {len(rows) - failures}/{len(rows)} checks passed")
    return EXIT_OK if failures == 0 else EXIT_NUMERIC


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="qacs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "sweep", "analyze", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="INI configuration file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--frames", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        if name == "sweep":
            p.add_argument("--axis", choices=sorted(simkit.SWEEP_AXES))
            p.add_argument("--values", help="a:b:step (dB), inclusive")
    return parser


_COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep,
             "analyze": cmd_analyze, "validate": cmd_validate}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        spec = RunSpec(command=args.command, config_path=args.config,
                       output_dir=args.out, overrides=tuple(args.overrides))
        return _COMMANDS[args.command](spec, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
