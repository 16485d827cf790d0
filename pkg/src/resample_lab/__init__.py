"""resample_lab: bias of IID and block resampled backtests for
rolling-window mean-variance portfolio rules."""

from .analysis import (BiasEstimate, BoundSet, DependenceComponents, bounds,
                       bounds_for_spec, cumulative_avg_autocovariance,
                       dependence_components_empirical, dependence_components_param,
                       mc_bias, ratio_R, sum_A, sum_B, taylor_sr_bias,
                       theoretical_bias_mean, theoretical_bias_sr, theoretical_bias_var)
from .backtest import (BaggingReport, MomentSummary, ResampleScheme, bagged_sharpe,
                       block, block_resample, block_shuffle, block_shuffle_path,
                       identity_scheme, iid_shuffle, iid_surrogate, required_sample_size,
                       resample_path, resampled_backtest, sharpe_moments, shuffle_path,
                       standard_backtest, surrogate_path)
from .dgp import (AssetSpec, GarchSpec, LatentParams, ObservableMoments, SamplePath,
                  derive_latent_params, garch_calibrate, simulate_batch, simulate_panel,
                  simulate_path, specs_from_json, specs_to_json)
from .empirical import (DifferenceRecord, RegressionSummary, ReturnTable,
                        compute_differences, estimate_bounds_from_data, load_returns,
                        regress_differences, run_pipeline, stationary_bootstrap_se,
                        studentized_difference_test)
from .experiments import (CrossSectionReport, ScenarioConfig, UniverseRecipe,
                          clone_ladder, coupling_report, default_cross_section,
                          default_dimension, jkp_like_universe, median_spec,
                          run_bias_cross_section, run_blocksize_sweep,
                          run_dimension_sweep)
from .portfolio import (BacktestConfig, mv_weights, realized_returns, rolling_covariance,
                        rolling_mean)

__version__ = "0.1.0"
