"""Multi-task learning of nominal and ordinal attributes on a shared trunk,
with task losses weighted by learned homoscedastic uncertainty."""

from .data import Dataset, GenConfig, generate, load, save, split
from .losses import TaskKind, TaskSpec, nominal_loss, ordinal_decode, ordinal_encode, ordinal_loss
from .metrics import MetricsReport, accuracy, confusion_matrix, cumulative_score, mae_mse
from .net import LossDef, ModelParams, NetConfig, OptimState, backward, forward, init_params, sgd_step
from .trainer import EpochTrace, Mode, TrainConfig, ablation_run, evaluate, predict, train
from .uncertainty import beta_weights, joint_loss, optimal_log_var

__version__ = "0.1.0"
