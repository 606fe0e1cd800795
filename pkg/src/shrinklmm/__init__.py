"""Shrinkage estimation and linear mixed models for blocked designs and
football score prediction."""

from .shrinkage import (ShrinkageResult, js_estimate, jsl_estimate,
                        covariance_shrink, error_variance, eb_estimate)
from .lmm import (ObservationTable, ModelSpec, VarianceComponents,
                  VariancePrior, FitResult, DisconnectedDesignError,
                  restricted_loglik, balanced_oneway_reml, reml_fit, map_fit,
                  blup_closed_form, gls_estimate)
from .designs import (BIBDSpec, DesignLayout, MarginalCov,
                      InfeasibleDesignError, LayoutSearchError,
                      complete_bibd_spec, generate_layout, save_layout,
                      load_layout, marginal_cov, simulate_data,
                      helmert_matrix, compound_cov_sqrt, dominance_check,
                      DominanceResult, MsepConfig, MsepCell, msep_study)
from .dists import (SkellamParams, PoissonFit, poisson_fit, skellam_pmf,
                    skellam_table, NormalApproxReport, normal_approx_compare)
from .football import (MatchRecord, SeasonDataset, OutcomeProbabilities,
                       CorrectPredictionRates, ConfusionTable, PoolScoreModel,
                       HOME_AWAY_SPEC, HOME_ONLY_SPEC, load_matches,
                       load_column_map, training_split, matches_to_table,
                       fit_home_away, predict_goal_diff, classify_outcome,
                       threshold_search, confusion, expected_pool_score,
                       simulate_pool_lines, PoolSimulation, season_summary,
                       SeasonSummaryRow, extract_priors, rmsep_compare,
                       RmsepRow, simulate_season)
from .streams import replicate_rng

__version__ = "0.1.0"
