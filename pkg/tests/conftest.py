import numpy as np
import pytest

from qacs.model import LinkBudget, ScenarioConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def case1_cfg():
    return ScenarioConfig(mbs_fap_distance=100.0, rng_seed=411)


@pytest.fixture
def case2_cfg():
    return ScenarioConfig(mbs_fap_distance=800.0, rng_seed=411)


def uniform_budget(cfg, lam_f=0.06, mu_f=3e-7, lam_m=0.01, mu_m=1e-3):
    """Homogeneous link budget (every terminal identical)."""
    return LinkBudget(
        lambda_f=np.full(cfg.n_femto_mts, lam_f),
        mu_f=np.full(cfg.n_femto_mts, mu_f),
        lambda_m=np.full(cfg.n_macro_mts, lam_m),
        mu_m=np.full(cfg.n_macro_mts, mu_m),
    )
