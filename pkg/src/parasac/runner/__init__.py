"""Training loop, configuration, checkpoints, evaluation and verification."""

from .config import PROFILES, RunConfig, build_config, load_config, merge_config
from .evaluate import EvalReport, evaluate
from .normalizer import IdentityNormalizer, ObsNormalizer
from .trainer import MetricsRecord, Trainer, train

__all__ = ["PROFILES", "RunConfig", "build_config", "load_config", "merge_config", "EvalReport",
           "evaluate", "IdentityNormalizer", "ObsNormalizer", "MetricsRecord", "Trainer", "train"]
