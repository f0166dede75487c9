"""Risk-allocation portfolio construction and backtesting toolkit."""

__version__ = "0.1.0"

from .attribution import (
    CoalitionBacktestRunner,
    CoalitionValueTable,
    Player,
    ShapleyReport,
    default_players,
    enumerate_coalition_values,
    shapley_values,
)
from .backtest import (
    BacktestConfig,
    BacktestResult,
    FixedWeightsStrategy,
    annual_breakdown,
    annualized_return,
    annualized_volatility,
    max_drawdown,
    run_backtest,
    sharpe_ratio,
)
from .cra import (
    ConstraintSet,
    PortfolioWeights,
    RiskAllocation,
    compute_scaling,
    cra_portfolio,
    solve_risk_allocation,
    weights_from_ray,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    DegenerateSeriesError,
    EstimatorError,
    ModelError,
    ParameterError,
    ParseError,
    RiskallocError,
    SchemaError,
)
from .marketdata import (
    AssetMeta,
    PricePanel,
    ReturnPanel,
    align_and_compute_returns,
    load_asset_meta,
    load_price_csv,
    synthetic_panel,
    trading_calendar,
    write_price_csv,
)
from .riskmodels import (
    CovarianceSeries,
    EwmaEstimator,
    GarchParams,
    ewma_update,
    fit_garch11,
    garch_forecast,
    garch_variance_path,
    iewma_covariance,
    simulate_garch11,
)
from .strategies import (
    CraStrategy,
    DD9010Strategy,
    StrategyConfig,
    VolEstimatorSpec,
    build_constraints,
    cra_strategy_step,
    dd9010_step,
    default_relative_weights,
)
