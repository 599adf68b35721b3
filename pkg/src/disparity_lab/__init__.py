"""Interpretable decision-disparity models: a shallow network whose extra
hidden nodes carry the logit-space difference between an observed decision
process and a fairer desired one, trained under a four-term penalized loss,
plus the closed-form/numerical optima that certify it on synthetic data."""

from .data import (Dataset, GeneratorSpec, OutcomeCaseConfig, gen_thm42_data,
                   gen_thm43_data, inject_outcome, load_schema,
                   make_case_config, measure_c, preprocess,
                   read_canonical_csv, split, write_canonical_csv)
from .metrics import (EvalReport, consistency_measure, consistency_ratio,
                      decision_accuracy, decomposition, evaluate,
                      optimal_bce, outcome_disparity)
from .model import (ArchitectureConfig, ModelParams, forward_desired,
                    forward_observed, forward_outcome, load_params,
                    representational_disparity, save_params)
from .objectives import LossBreakdown, LossWeights, total_loss
from .theory import (OptimumReport, TheoremScenario, aligned_grid_spec,
                     grid_oracle, grid_step, thm41_optimum, thm42_optimum,
                     thm43_optimum)
from .training import (FitResult, TrainConfig, kfold_select_m_obs,
                       train_phase1, train_phase2)

__version__ = "0.1.0"

__all__ = [
    "ArchitectureConfig", "Dataset", "EvalReport", "FitResult",
    "GeneratorSpec", "LossBreakdown", "LossWeights", "ModelParams",
    "OptimumReport", "OutcomeCaseConfig", "TheoremScenario", "TrainConfig",
    "aligned_grid_spec", "consistency_measure", "consistency_ratio",
    "decision_accuracy", "decomposition", "evaluate", "forward_desired",
    "forward_observed", "forward_outcome", "gen_thm42_data", "gen_thm43_data",
    "grid_oracle", "grid_step",
    "inject_outcome", "kfold_select_m_obs", "load_params", "load_schema",
    "make_case_config", "measure_c", "optimal_bce", "outcome_disparity",
    "preprocess", "read_canonical_csv", "representational_disparity",
    "save_params", "split", "thm41_optimum", "thm42_optimum",
    "thm43_optimum", "total_loss", "train_phase1", "train_phase2",
    "write_canonical_csv",
]
