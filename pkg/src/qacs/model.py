"""Domain types and link-budget normalizations shared by the protocol,
the simulator and the analytics.

All internal computation is carried out in linear units; dB/dBm appear only
at configuration and reporting boundaries. Powers are expressed in mW
(dBm -> mW), so noise-to-signal and interference-to-signal ratios are
dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class ConfigError(ValueError):
    """Invalid scenario/plan configuration."""


class DomainError(ValueError):
    """Operation called outside its mathematical domain."""


def db_to_linear(value_db):
    """Convert dB (or dBm) to linear scale: 10**(value/10)."""
    if np.ndim(value_db):
        return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)
    return 10.0 ** (float(value_db) / 10.0)


def linear_to_db(value):
    """Inverse of :func:`db_to_linear`."""
    if np.ndim(value):
        return 10.0 * np.log10(np.asarray(value, dtype=float))
    if value <= 0:
        raise DomainError(f"dB undefined for non-positive value {value!r}")
    return 10.0 * np.log10(float(value))


@dataclass(frozen=True)
class PathLossParams:
    """One link class: loss_dB(d) = intercept + slope*log10(d) + wall."""

    intercept_db: float
    slope_db: float
    wall_db: float = 0.0

    def __post_init__(self):
        if self.slope_db <= 0:
            raise ConfigError("path-loss slope must be > 0")
        if self.wall_db < 0:
            raise ConfigError("wall loss must be >= 0")


@dataclass(frozen=True)
class PathLossModel:
    """Per-link-class path-loss coefficients for the four link classes.

    Defaults are standard dual-stripe style values; all four classes are
    fully overridable through the configuration file.
    """

    mbs_to_macro: PathLossParams = field(default_factory=lambda: PathLossParams(15.3, 37.6, 0.0))
    mbs_to_femto: PathLossParams = field(default_factory=lambda: PathLossParams(15.3, 37.6, 10.0))
    fap_to_femto: PathLossParams = field(default_factory=lambda: PathLossParams(38.5, 20.0, 0.0))
    fap_to_macro: PathLossParams = field(default_factory=lambda: PathLossParams(38.5, 20.0, 10.0))

    LINK_CLASSES = ("mbs_to_macro", "mbs_to_femto", "fap_to_femto", "fap_to_macro")


@dataclass(frozen=True)
class ScenarioConfig:
    """Geometry, antenna/user counts, powers, noise and QoS thresholds.

    Powers and noise are in dBm, QoS thresholds in dB, distances in meters.
    ``rng_seed`` seeds the user drop; the Monte-Carlo frame streams are
    seeded separately by the simulation plan.
    """

    n_fap_antennas: int = 2
    n_mbs_antennas: int = 4
    n_femto_mts: int = 5
    n_macro_mts: int = 50
    p_fap: float = 20.0
    p_mbs: float = 50.0
    noise_femto: float = -104.0
    noise_macro: float = -104.0
    gamma_f_req: float = 20.0
    gamma_m_req: float = 10.0
    macro_radius: float = 1000.0
    femto_radius: float = 20.0
    mbs_fap_distance: float = 500.0
    path_loss_params: PathLossModel = field(default_factory=PathLossModel)
    rng_seed: int = 20240901

    def __post_init__(self):
        for name in ("n_fap_antennas", "n_mbs_antennas", "n_femto_mts", "n_macro_mts"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {v!r}")
        for name in ("macro_radius", "femto_radius", "mbs_fap_distance"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.mbs_fap_distance + self.femto_radius > self.macro_radius:
            raise ConfigError(
                "femto disk must lie inside the macro disk: "
                f"mbs_fap_distance + femto_radius = "
                f"{self.mbs_fap_distance + self.femto_radius} > macro_radius = {self.macro_radius}"
            )

    # linear-scale accessors (powers in mW)
    @property
    def p_fap_lin(self) -> float:
        return db_to_linear(self.p_fap)

    @property
    def p_mbs_lin(self) -> float:
        return db_to_linear(self.p_mbs)

    @property
    def noise_femto_lin(self) -> float:
        return db_to_linear(self.noise_femto)

    @property
    def noise_macro_lin(self) -> float:
        return db_to_linear(self.noise_macro)

    @property
    def gamma_f_lin(self) -> float:
        return db_to_linear(self.gamma_f_req)

    @property
    def gamma_m_lin(self) -> float:
        return db_to_linear(self.gamma_m_req)


@dataclass(frozen=True)
class LinkBudget:
    """Normalized link constants.

    lambda_f / mu_f are the interference-to-signal and noise-to-signal
    ratios at a femto-MT; lambda_m / mu_m the same at a macro-MT. Fields
    may be scalars (a single terminal) or 1-d arrays (one entry per
    terminal of a drop).
    """

    lambda_f: np.ndarray
    mu_f: np.ndarray
    lambda_m: np.ndarray
    mu_m: np.ndarray

    def __post_init__(self):
        for name in ("lambda_f", "mu_f", "lambda_m", "mu_m"):
            v = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, v)
            if not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise DomainError(f"LinkBudget.{name} must be positive and finite")


def link_budget(cfg: ScenarioConfig, beta_f, beta_m):
    """Femto-side normalizations (lambda_f, mu_f) for path gains beta_f
    (serving FAP link) and beta_m (interfering MBS link)."""
    beta_f = np.asarray(beta_f, dtype=float)
    beta_m = np.asarray(beta_m, dtype=float)
    if np.any(beta_f <= 0) or np.any(beta_m <= 0):
        raise DomainError("path gains must be > 0")
    sig = cfg.p_fap_lin * beta_f
    return cfg.p_mbs_lin * beta_m / sig, cfg.noise_femto_lin / sig


def link_budget_macro(cfg: ScenarioConfig, alpha_m, alpha_f):
    """Macro-side normalizations (lambda_m, mu_m) for path gains alpha_m
    (serving MBS link) and alpha_f (interfering FAP link)."""
    alpha_m = np.asarray(alpha_m, dtype=float)
    alpha_f = np.asarray(alpha_f, dtype=float)
    if np.any(alpha_m <= 0) or np.any(alpha_f <= 0):
        raise DomainError("path gains must be > 0")
    sig = cfg.p_mbs_lin * alpha_m
    return cfg.p_fap_lin * alpha_f / sig, cfg.noise_macro_lin / sig


def drop_link_budget(cfg: ScenarioConfig, beta_f, beta_m, alpha_m, alpha_f) -> LinkBudget:
    """Assemble the per-terminal LinkBudget of one user drop."""
    lam_f, mu_f = link_budget(cfg, beta_f, beta_m)
    lam_m, mu_m = link_budget_macro(cfg, alpha_m, alpha_f)
    return LinkBudget(lambda_f=lam_f, mu_f=mu_f, lambda_m=lam_m, mu_m=mu_m)


@dataclass(frozen=True)
class FrameRealization:
    """One frame's small-scale fading, codebooks and per-link path gains.

    Fading matrices have one row per terminal; codebook columns are beams.
    Path gains are fixed per drop, fading and codebooks are fresh per frame.
    """

    h_f: np.ndarray  # (K_F, N_F) FAP -> femto-MT
    h_m: np.ndarray  # (K_F, N_M) MBS -> femto-MT
    g_m: np.ndarray  # (K_M, N_M) MBS -> macro-MT
    g_f: np.ndarray  # (K_M, N_F) FAP -> macro-MT
    fap_codebook: np.ndarray  # (N_F, N_F) unitary
    mbs_codebook: np.ndarray  # (N_M, N_M) unitary
    beta_f: np.ndarray
    beta_m: np.ndarray
    alpha_m: np.ndarray
    alpha_f: np.ndarray

    UNITARITY_TOL = 1e-10

    def __post_init__(self):
        k_f, n_f = self.h_f.shape
        k_m, n_m = self.g_m.shape
        if self.h_m.shape != (k_f, n_m) or self.g_f.shape != (k_m, n_f):
            raise ConfigError("inconsistent fading matrix shapes")
        if self.fap_codebook.shape != (n_f, n_f) or self.mbs_codebook.shape != (n_m, n_m):
            raise ConfigError("codebook shapes must match antenna counts")
        for cb in (self.fap_codebook, self.mbs_codebook):
            gram = cb.conj().T @ cb
            if np.max(np.abs(gram - np.eye(cb.shape[0]))) > self.UNITARITY_TOL:
                raise ConfigError("codebook is not unitary to tolerance")
        for name in ("beta_f", "beta_m", "alpha_m", "alpha_f"):
            g = np.asarray(getattr(self, name), dtype=float)
            if np.any(g <= 0) or np.any(g > 1):
                raise ConfigError(f"{name} path gains must lie in (0, 1]")

    @property
    def n_fap_beams(self) -> int:
        return self.fap_codebook.shape[0]

    @property
    def n_mbs_beams(self) -> int:
        return self.mbs_codebook.shape[0]


@dataclass(frozen=True)
class ScheduleOutcome:
    """The protocol's decisions for one frame.

    ``macro_beam``, ``macro_mt`` and ``sinr_macro`` are present iff the
    macro tier is active this frame (at least one qualified beam and one
    qualified macro-MT); otherwise the MBS leaves the band.
    """

    femto_mt: int
    femto_beam: int
    femto_nsnr: float
    qualified_beams: tuple
    macro_requests: dict
    macro_beam: Optional[int]
    macro_mt: Optional[int]
    sinr_femto: float
    sinr_macro: Optional[float]
    macro_active: bool

    def validate(self, gamma_f: float, gamma_m: float) -> None:
        """Check the cross-field invariants (thresholds in linear scale)."""
        n_q = len(self.qualified_beams)
        k_q = len(self.macro_requests)
        expect_active = n_q > 0 and k_q > 0
        if self.macro_active != expect_active:
            raise AssertionError("macro_active inconsistent with N_Q/K_Q")
        present = (self.macro_beam is not None, self.macro_mt is not None,
                   self.sinr_macro is not None)
        if self.macro_active:
            if not all(present):
                raise AssertionError("active frame must carry macro beam/MT/SINR")
            if self.macro_beam not in self.qualified_beams:
                raise AssertionError("selected macro beam is not qualified")
            if self.sinr_femto < gamma_f or self.sinr_macro < gamma_m:
                raise AssertionError("QoS violated on an active frame")
        elif any(present):
            raise AssertionError("inactive frame must not carry macro fields")


@dataclass(frozen=True)
class RateReport:
    """Analytic and empirical ergodic rates plus distribution summaries."""

    r_f_analytic: float
    r_m_analytic: float
    r_f_empirical: float
    r_m_empirical: float
    r_f_ci95: float
    r_m_ci95: float
    pmf_nq: np.ndarray  # length N_M + 1
    pmf_nb: np.ndarray  # length N_M + 1
    frames: int
    e_nq: float = float("nan")
    e_nb: float = float("nan")
    e_nq_ci95: float = 0.0
    e_nb_ci95: float = 0.0
    femto_selection: Optional[np.ndarray] = None
    macro_served: Optional[np.ndarray] = None
    qos_violations: int = 0
    per_drop: tuple = ()

    def validate(self) -> None:
        for name in ("pmf_nq", "pmf_nb"):
            pmf = np.asarray(getattr(self, name), dtype=float)
            if np.any(pmf < 0) or abs(pmf.sum() - 1.0) > 1e-9:
                raise AssertionError(f"{name} is not a PMF (sum={pmf.sum()!r})")
        if self.r_f_ci95 < 0 or self.r_m_ci95 < 0:
            raise AssertionError("confidence half-widths must be >= 0")
        if self.frames < 1:
            raise AssertionError("frames must be >= 1")
