"""Throughput-optimal relay probing for two-hop mmWave links under Bernoulli
blockage: link-budget channel model, fixed-point threshold solver, and
renewal-reward Monte Carlo simulator."""

from .channel import LinkSample, RelayRegion, ScenarioConfig, default_scenario
from .sedist import EmpiricalSe, OnOffSe, build_empirical
from .simulator import (ExplicitThreshold, FixedBeta, GenieOnOff, Myopic,
                        OptimalThreshold, PeriodRecord, ThroughputEstimate,
                        estimate_throughput, run_period, simulate_periods)
from .solver import (SolverSettings, StoppingSolution, closed_form_onoff,
                     genie_ratio_onoff, ordinary_value, solve_mu_star,
                     solve_rho)

__version__ = "0.1.0"
