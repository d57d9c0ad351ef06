"""Two-provider Wi-Fi offload game: payoffs, equilibria, market dynamics and
outcome classification for a shared unlicensed band."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, InfeasibleStrategyError, ModelError
from .market import (
    ClassId,
    DemandPool,
    MarketState,
    MigrationRule,
    NetworkKind,
    NetworkResource,
    Provider,
    StrategyProfile,
    Tariff,
    TrafficClass,
    demand_response,
    network_profit,
    provider_profit,
    qos,
    revenue,
)
from .scenario import Scenario, build, from_dict, load_scenario, save_scenario, to_dict
from .strategy import DominanceReport, NoFeasibleStrategyError, apply_strategy, best_response, dominance_check
from .equilibrium import (
    Cycle,
    EquilibriumReport,
    FixedPoint,
    NonConvergence,
    WelfareGap,
    best_response_dynamics,
    commons_welfare_gap,
    inter_provider_equilibrium,
    intra_provider_equilibrium,
    nash_oracle,
)
from .dynamics import (
    Drift,
    Periodic,
    Policy,
    Trajectory,
    detect_oscillation,
    inject_roaming,
    sabotage_impact,
    sabotage_strategy,
    simulate,
    step,
)
from .outcomes import Label, OutcomeLabel, Regime, capacity_regime, classify
