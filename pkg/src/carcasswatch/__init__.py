"""Coastal stranding surveillance: ingestion, model fitting, control charts."""

from carcasswatch.artifact import FittedArtifact, load_artifact, save_artifact
from carcasswatch.config import RunConfig, load_config
from carcasswatch.design import DesignMatrix, build_design
from carcasswatch.estimator import StrandingModel
from carcasswatch.ingest import (
    PanelEntry,
    RejectedRow,
    SurveillanceRecord,
    WeeklyPanel,
    aggregate_weekly,
    parse_csv,
)
from carcasswatch.model import Hyperparameters, ModelParts, build_model
from carcasswatch.monitor import AlertReport, ControlChart, alert_report, build_chart

__version__ = "0.1.0"

__all__ = [
    "AlertReport",
    "ControlChart",
    "DesignMatrix",
    "FittedArtifact",
    "Hyperparameters",
    "ModelParts",
    "PanelEntry",
    "RejectedRow",
    "RunConfig",
    "StrandingModel",
    "SurveillanceRecord",
    "WeeklyPanel",
    "aggregate_weekly",
    "alert_report",
    "build_chart",
    "build_design",
    "build_model",
    "load_artifact",
    "load_config",
    "parse_csv",
    "save_artifact",
    "__version__",
]
