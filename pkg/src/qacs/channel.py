"""Randomness generators: user drops, path loss, Rayleigh fading and
isotropically random orthonormal codebooks.

Every operation takes an explicit numpy ``Generator``; nothing here owns
random state, so callers can run independent streams concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (ConfigError, FrameRealization, PathLossModel,
                    ScenarioConfig, db_to_linear)

MIN_DISTANCE_M = 1.0  # clamp below to avoid unbounded gain

_SQRT_HALF = np.sqrt(0.5)


@dataclass(frozen=True)
class UserDrop:
    """Positions (meters) of one random user layout."""

    femto_positions: np.ndarray  # (K_F, 2)
    macro_positions: np.ndarray  # (K_M, 2)
    fap_position: np.ndarray     # (2,)
    mbs_position: np.ndarray     # (2,)

    def __post_init__(self):
        for name, center, pts in (("femto", self.fap_position, self.femto_positions),
                                  ("macro", self.mbs_position, self.macro_positions)):
            if pts.ndim != 2 or pts.shape[1] != 2:
                raise ConfigError(f"{name} positions must be (K, 2)")


def _uniform_disk(center, radius, n, rng):
    # area-uniform: radius grows like sqrt(u)
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    return center + np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def drop_users(cfg: ScenarioConfig, rng: np.random.Generator) -> UserDrop:
    """Drop femto-MTs and macro-MTs uniformly over their coverage disks.

    The MBS sits at the origin and the FAP on the positive x axis at
    ``cfg.mbs_fap_distance``. Femto positions are drawn first, then macro
    positions (fixed consumption order for reproducibility).
    """
    mbs = np.zeros(2)
    fap = np.array([cfg.mbs_fap_distance, 0.0])
    femto = _uniform_disk(fap, cfg.femto_radius, cfg.n_femto_mts, rng)
    macro = _uniform_disk(mbs, cfg.macro_radius, cfg.n_macro_mts, rng)
    return UserDrop(femto_positions=femto, macro_positions=macro,
                    fap_position=fap, mbs_position=mbs)


def path_gain(model: PathLossModel, link_class: str, distance):
    """Linear power gain of one link class at ``distance`` meters.

    ``gain = 10**(-(intercept + slope*log10(d) + wall)/10)`` with the
    distance clamped below at 1 m.
    """
    if link_class not in PathLossModel.LINK_CLASSES:
        raise ConfigError(f"unknown link class {link_class!r}")
    p = getattr(model, link_class)
    d = np.maximum(np.asarray(distance, dtype=float), MIN_DISTANCE_M)
    loss_db = p.intercept_db + p.slope_db * np.log10(d) + p.wall_db
    return db_to_linear(-loss_db)


def drop_path_gains(cfg: ScenarioConfig, drop: UserDrop, model: PathLossModel | None = None):
    """Per-terminal path gains (beta_f, beta_m, alpha_m, alpha_f) of a drop."""
    if model is None:
        model = cfg.path_loss_params
    d_ff = np.linalg.norm(drop.femto_positions - drop.fap_position, axis=1)
    d_fm = np.linalg.norm(drop.femto_positions - drop.mbs_position, axis=1)
    d_mm = np.linalg.norm(drop.macro_positions - drop.mbs_position, axis=1)
    d_mf = np.linalg.norm(drop.macro_positions - drop.fap_position, axis=1)
    beta_f = path_gain(model, "fap_to_femto", d_ff)
    beta_m = path_gain(model, "mbs_to_femto", d_fm)
    alpha_m = path_gain(model, "mbs_to_macro", d_mm)
    alpha_f = path_gain(model, "fap_to_macro", d_mf)
    return beta_f, beta_m, alpha_m, alpha_f


def draw_fading(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. circularly-symmetric complex Gaussian entries, unit variance."""
    if rows < 1 or cols < 1:
        raise ConfigError("fading matrix dimensions must be >= 1")
    z = rng.standard_normal((rows, cols, 2))
    z *= _SQRT_HALF
    return z.view(np.complex128)[..., 0]


def draw_codebook(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed n x n unitary codebook (columns are beams).

    QR of a complex Ginibre matrix with the R diagonal phases folded into
    Q, which makes the distribution exactly Haar.
    """
    if n < 1:
        raise ConfigError("codebook size must be >= 1")
    g = draw_fading(n, n, rng)
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def realize_frame(cfg: ScenarioConfig, drop: UserDrop, model: PathLossModel,
                  rng: np.random.Generator) -> FrameRealization:
    """Assemble one frame: fresh fading and codebooks, drop-fixed gains.

    Draw order: h_f, h_m, g_m, g_f, FAP codebook, MBS codebook.
    """
    beta_f, beta_m, alpha_m, alpha_f = drop_path_gains(cfg, drop, model)
    k_f, k_m = cfg.n_femto_mts, cfg.n_macro_mts
    n_f, n_m = cfg.n_fap_antennas, cfg.n_mbs_antennas
    return FrameRealization(
        h_f=draw_fading(k_f, n_f, rng),
        h_m=draw_fading(k_f, n_m, rng),
        g_m=draw_fading(k_m, n_m, rng),
        g_f=draw_fading(k_m, n_f, rng),
        fap_codebook=draw_codebook(n_f, rng),
        mbs_codebook=draw_codebook(n_m, rng),
        beta_f=beta_f,
        beta_m=beta_m,
        alpha_m=alpha_m,
        alpha_f=alpha_f,
    )
