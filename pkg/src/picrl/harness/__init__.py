from picrl.harness.config import ExperimentConfig
from picrl.harness.training import evaluate, read_csv, run_training
from picrl.harness.verify import SUITES, SuiteReport, verify_suite

__all__ = ["ExperimentConfig", "SUITES", "SuiteReport", "evaluate", "read_csv", "run_training", "verify_suite"]
