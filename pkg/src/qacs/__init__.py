"""Two-tier macro/femto HetNet simulator and analytical toolkit for
QoS-aware coordinated random-beamforming scheduling."""

from . import analytics, backend, channel, dropwise, protocol, simkit
from .analytics import FemtoAnalysisParams, MacroAnalysisParams
from .channel import UserDrop, draw_codebook, draw_fading, drop_users, path_gain, realize_frame
from .dropwise import DropAnalysis, analyze_drop
from .model import (ConfigError, DomainError, FrameRealization, LinkBudget,
                    PathLossModel, PathLossParams, RateReport, ScenarioConfig,
                    ScheduleOutcome, db_to_linear, drop_link_budget, linear_to_db,
                    link_budget, link_budget_macro)
from .protocol import QosThresholds, run_frame
from .quadrature import NumericsError, Quadrature
from .simkit import EmpiricalStats, SimPlan, fairness_audit, simulate, sweep

__version__ = "0.1.0"
