"""Scenario mining over naturalistic-driving sensor tables."""
from .model import (
    Direction,
    ExtractionConfig,
    FrontTargetSample,
    LaneSample,
    RowKey,
    Scenario,
    ScenarioEvent,
    TripBundle,
    TripKey,
    TripSummaryRow,
    WsuSample,
)

__version__ = "0.1.0"

__all__ = [
    "Direction",
    "ExtractionConfig",
    "FrontTargetSample",
    "LaneSample",
    "RowKey",
    "Scenario",
    "ScenarioEvent",
    "TripBundle",
    "TripKey",
    "TripSummaryRow",
    "WsuSample",
]
