from .metrics import (
    DEFAULT_CUTOFFS,
    CutoffMetrics,
    EvalReport,
    evaluate,
    hr_ndcg_at_n,
    hr_ndcg_from_ranks,
    mean_indicator_at_n,
    rank_all,
    target_rank,
    top_n,
)
from .train import EpochLog, Trainer, TrainConfig, TrainingError, TrainResult, model_config_for, train

__all__ = [
    "DEFAULT_CUTOFFS", "CutoffMetrics", "EvalReport", "evaluate", "hr_ndcg_at_n",
    "hr_ndcg_from_ranks", "mean_indicator_at_n", "rank_all", "target_rank", "top_n",
    "EpochLog", "Trainer", "TrainConfig", "TrainingError", "TrainResult", "model_config_for", "train",
]
from .ablation import (
    ABLATION_KINDS,
    AblationError,
    AblationRun,
    ablate,
    corpus_from_config,
    grid_points,
    loss_config_from,
    train_from_config,
)
from .report import ReportError, emit_report, load_report_json, report_rows, write_training_log

__all__ += [
    "ABLATION_KINDS", "AblationError", "AblationRun", "ablate", "corpus_from_config", "grid_points",
    "loss_config_from", "train_from_config", "ReportError", "emit_report", "load_report_json",
    "report_rows", "write_training_log",
]
